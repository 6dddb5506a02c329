#include <doctest.h>

#include <cmath>
#include <random>

#include "advex/attack.hpp"
#include "advex/synth.hpp"
#include "helpers.hpp"

using namespace advex;

namespace {

// Reference mean-|attribution| ranking over the seven packet features:
// frame.len first, udp.dstport second.
FeatureImportance reference_importance() {
    ShapMatrix s;
    s.rows = 1;
    s.cols = 7;
    s.values = {3.433418, 2.018903, 1.633189, 1.386476, 1.047884, 0.429822, 0.283653};
    s.sample_index_map = {0};
    return mean_abs_importance(s);
}

ShapMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
    ShapMatrix s;
    s.rows = rows.size();
    s.cols = rows.empty() ? 0 : rows[0].size();
    for (const auto& r : rows) {
        s.values.insert(s.values.end(), r.begin(), r.end());
    }
    s.sample_index_map.resize(s.rows);
    for (std::size_t i = 0; i < s.rows; ++i) {
        s.sample_index_map[i] = i;
    }
    return s;
}

}  // namespace

TEST_CASE("select_feature picks the top of the ranking") {
    const auto imp = reference_importance();
    CHECK(select_feature(imp, {}) == 0);                       // frame.len
    CHECK(select_feature(imp, {0}) == 1);                      // udp.dstport fallback
    CHECK(select_feature(imp, {0, 1, 2, 3, 4, 5}) == 6);       // last resort
    CHECK_THROWS_AS(select_feature(imp, {0, 1, 2, 3, 4, 5, 6}), ConfigError);
}

TEST_CASE("select_feature breaks ties toward the lower index") {
    ShapMatrix s;
    s.rows = 1;
    s.cols = 2;
    s.values = {2.0, 2.0};
    s.sample_index_map = {0};
    CHECK(select_feature(mean_abs_importance(s), {}) == 0);
}

TEST_CASE("find_epsilon ignores malicious rows no matter how small their value") {
    const auto schema = FeatureSchema({"a", "b"});
    const auto data = testutil::tiny_dataset({{10.0, 1.0}, {99.0, 2.0}}, {0, 1}, schema);
    const auto s = matrix_from({{-1.0, 0.5}, {-9.0, 0.4}});
    const auto found = find_epsilon(s, data, 0);
    CHECK(found.row == 0);
    CHECK(found.shap == -1.0);
    CHECK(found.value == 10.0);
}

TEST_CASE("find_epsilon matches a linear scan oracle on random data") {
    std::mt19937_64 gen(404);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 20 + gen() % 80;
        std::vector<std::vector<double>> rows;
        std::vector<std::vector<double>> shap_rows;
        std::vector<int> labels;
        for (std::size_t i = 0; i < n; ++i) {
            rows.push_back({static_cast<double>(gen() % 1000), static_cast<double>(gen() % 1000)});
            shap_rows.push_back({(static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5) * 8.0,
                                 (static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5) * 8.0});
            labels.push_back(static_cast<int>(gen() % 2));
        }
        labels[0] = 0;  // keep the search domain non-empty
        const auto schema = FeatureSchema({"a", "b"});
        const auto data = testutil::tiny_dataset(rows, labels, schema);
        const auto s = matrix_from(shap_rows);
        const int feature = static_cast<int>(gen() % 2);

        // independent scan over (shap column, label) pairs
        std::size_t want_row = 0;
        double want = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == 0 && shap_rows[i][feature] < want) {
                want = shap_rows[i][feature];
                want_row = i;
            }
        }
        const auto found = find_epsilon(s, data, feature);
        CHECK(found.row == want_row);
        CHECK(found.shap == want);
        CHECK(found.value == rows[want_row][feature]);
    }
}

TEST_CASE("find_epsilon needs at least one benign sample") {
    const auto schema = FeatureSchema({"a"});
    const auto data = testutil::tiny_dataset({{1.0}, {2.0}}, {1, 1}, schema);
    const auto s = matrix_from({{-1.0}, {-2.0}});
    CHECK_THROWS_AS(find_epsilon(s, data, 0), SplitError);
}

TEST_CASE("generate_adversarial rewrites exactly the planned column") {
    const auto malicious = testutil::tiny_dataset(
        {{60, 0, 2, 80, 64, 0, 40}, {46, 53, 0, 0, 128, 1000, 32}}, {1, 1});
    AttackPlan plan;
    plan.feature_index = 0;
    plan.feature_name = "frame.len";
    plan.epsilon = 191.0;
    const auto adv = generate_adversarial(malicious, plan);
    REQUIRE(adv.samples.n_rows() == 2);
    CHECK(adv.samples.row(0)[0] == 191.0);
    for (std::size_t j = 1; j < 7; ++j) {
        CHECK(adv.samples.at(0, j) == malicious.at(0, j));
    }
    CHECK(adv.samples.label(0) == 1);
    CHECK(adv.samples.label(1) == 1);
    CHECK(adv.origin_rows == std::vector<std::size_t>{0, 1});
}

TEST_CASE("generate_adversarial on an empty malicious set yields an empty set") {
    const auto malicious =
        testutil::tiny_dataset({}, {}, FeatureSchema::packet_features());
    AttackPlan plan;
    plan.feature_index = 0;
    plan.epsilon = 191.0;
    const auto adv = generate_adversarial(malicious, plan);
    CHECK(adv.samples.n_rows() == 0);
}

TEST_CASE("per-row column diffs are 0 or 1 and 0 only when the value matched") {
    std::mt19937_64 gen(7);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> r;
        for (int j = 0; j < 7; ++j) {
            r.push_back(static_cast<double>(gen() % 50));
        }
        rows.push_back(r);
        labels.push_back(1);
    }
    const auto malicious = testutil::tiny_dataset(rows, labels);
    AttackPlan plan;
    plan.feature_index = 2;
    plan.feature_name = "ip.flags";
    plan.epsilon = 17.0;  // sometimes equals the existing value, mostly not
    const auto adv = generate_adversarial(malicious, plan);

    for (std::size_t i = 0; i < adv.samples.n_rows(); ++i) {
        std::size_t diffs = 0;
        for (std::size_t j = 0; j < 7; ++j) {
            diffs += adv.samples.at(i, j) != malicious.at(i, j);
        }
        CHECK(diffs <= 1);
        if (diffs == 0) {
            CHECK(malicious.at(i, 2) == plan.epsilon);
        } else {
            CHECK(adv.samples.at(i, 2) == plan.epsilon);
        }
    }
}

TEST_CASE("plan validation catches schema mismatches") {
    const auto malicious = testutil::tiny_dataset({{1, 2, 3, 4, 5, 6, 7}}, {1});
    AttackPlan plan;
    plan.feature_index = 9;
    CHECK_THROWS_AS(generate_adversarial(malicious, plan), SchemaError);
    plan.feature_index = 0;
    plan.feature_name = "ip.ttl";  // wrong name for index 0
    CHECK_THROWS_AS(generate_adversarial(malicious, plan), SchemaError);
}

TEST_CASE("run_attack selects the planted feature and converts every malicious row") {
    SynthConfig scfg;
    scfg.n_samples = 3000;
    scfg.seed = 77;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 20;
    cfg.max_depth = 4;
    const auto model = train(data, cfg);

    const auto result = run_attack(model, data, {});
    REQUIRE(result.plans.size() == 1);
    const auto& plan = result.plans[0];
    CHECK(plan.feature_index == scfg.dominant_feature);
    CHECK(plan.feature_name == "frame.len");

    // plan invariants: lambda is benign, sigma matches the matrix, epsilon the data
    CHECK(data.label(plan.source_row) == 0);
    std::size_t matrix_row = result.shap.rows;
    for (std::size_t i = 0; i < result.shap.rows; ++i) {
        if (result.shap.sample_index_map[i] == plan.source_row) {
            matrix_row = i;
            break;
        }
    }
    REQUIRE(matrix_row < result.shap.rows);
    CHECK(result.shap.at(matrix_row, plan.feature_index) == plan.source_shap);
    CHECK(data.at(plan.source_row, plan.feature_index) == plan.epsilon);

    const auto parts = partition_by_label(data);
    CHECK(result.adversarial.samples.n_rows() == parts.malicious.n_rows());
    for (std::size_t i = 0; i < result.adversarial.samples.n_rows(); ++i) {
        CHECK(data.label(result.adversarial.origin_rows[i]) == 1);
        CHECK(result.adversarial.samples.at(i, plan.feature_index) == plan.epsilon);
    }
}

TEST_CASE("epsilon always comes from a benign row's actual value") {
    SynthConfig scfg;
    scfg.n_samples = 1200;
    scfg.seed = 3;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 10;
    cfg.max_depth = 3;
    const auto model = train(data, cfg);
    for (std::uint64_t seed : {1ull, 2ull}) {
        SynthConfig other = scfg;
        other.seed = seed;
        const auto d = generate(other);
        const auto result = run_attack(model, d, {});
        const auto& plan = result.plans[0];
        CHECK(d.label(plan.source_row) == 0);
        CHECK(d.at(plan.source_row, plan.feature_index) == plan.epsilon);
    }
}

TEST_CASE("adversarial margins move toward benign on the planted setup") {
    SynthConfig scfg;
    scfg.n_samples = 2000;
    scfg.seed = 11;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 15;
    cfg.max_depth = 4;
    const auto model = train(data, cfg);
    const auto result = run_attack(model, data, {});

    const auto parts = partition_by_label(data);
    std::size_t improved = 0;
    for (std::size_t i = 0; i < result.adversarial.samples.n_rows(); ++i) {
        const double before = model.predict_margin(parts.malicious.row(i));
        const double after = model.predict_margin(result.adversarial.samples.row(i));
        improved += after <= before;
    }
    // measured statistic, not a hard guarantee; the planted signal makes it strong
    CHECK(static_cast<double>(improved) >=
          0.9 * static_cast<double>(result.adversarial.samples.n_rows()));
}

TEST_CASE("run_attack is deterministic") {
    SynthConfig scfg;
    scfg.n_samples = 800;
    scfg.seed = 5;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 5;
    cfg.max_depth = 3;
    const auto model = train(data, cfg);
    const auto a = run_attack(model, data, {});
    const auto b = run_attack(model, data, {});
    CHECK(plans_to_text(a.plans, data.schema()) == plans_to_text(b.plans, data.schema()));
    CHECK(a.adversarial.samples.x() == b.adversarial.samples.x());
}

TEST_CASE("excluding the top feature falls back to the runner-up") {
    SynthConfig scfg;
    scfg.n_samples = 2000;
    scfg.seed = 19;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 15;
    cfg.max_depth = 4;
    const auto model = train(data, cfg);

    const auto base = run_attack(model, data, {});
    const int top = base.plans[0].feature_index;
    const auto fallback = run_attack(model, data, {top});
    CHECK(fallback.plans[0].feature_index != top);
    CHECK(fallback.plans[0].feature_index == base.importance.ranking[1]);

    std::set<int> all{0, 1, 2, 3, 4, 5, 6};
    CHECK_THROWS_AS(run_attack(model, data, all), ConfigError);
}

TEST_CASE("top-k perturbation plans distinct features and rewrites both columns") {
    SynthConfig scfg;
    scfg.n_samples = 1000;
    scfg.seed = 23;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 8;
    cfg.max_depth = 3;
    const auto model = train(data, cfg);
    const auto result = run_attack(model, data, {}, 2);
    REQUIRE(result.plans.size() == 2);
    CHECK(result.plans[0].feature_index != result.plans[1].feature_index);
    for (std::size_t i = 0; i < result.adversarial.samples.n_rows(); ++i) {
        for (const auto& plan : result.plans) {
            CHECK(result.adversarial.samples.at(i, plan.feature_index) == plan.epsilon);
        }
    }
}

TEST_CASE("scoped attack searches epsilon inside the scope only") {
    SynthConfig scfg;
    scfg.n_samples = 600;
    scfg.seed = 29;
    const auto data = generate(scfg);
    TrainConfig cfg;
    cfg.n_rounds = 6;
    cfg.max_depth = 3;
    const auto model = train(data, cfg);

    const auto split = stratified_split(data, 0.25, 1);
    const auto result = run_attack(model, data, {}, 1, split.test_rows);
    CHECK(result.shap.rows == split.test_rows.size());
    // lambda must be one of the scoped rows
    bool in_scope = false;
    for (auto r : split.test_rows) {
        in_scope |= r == result.plans[0].source_row;
    }
    CHECK(in_scope);
    // the rewrite still covers every malicious row of the full dataset
    const auto parts = partition_by_label(data);
    CHECK(result.adversarial.samples.n_rows() == parts.malicious.n_rows());
}
