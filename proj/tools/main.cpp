// advex: train a packet-feature botnet detector, explain it, and run the
// explanation-guided single-feature evasion attack end to end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advex/attack.hpp"
#include "advex/dataset.hpp"
#include "advex/explain.hpp"
#include "advex/gbt.hpp"
#include "advex/metrics.hpp"
#include "advex/pcap.hpp"
#include "advex/synth.hpp"

namespace fs = std::filesystem;
using namespace advex;

namespace {

constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitError = 2;

std::set<int> resolve_exclusions(const std::string& csv_names, const FeatureSchema& schema) {
    std::set<int> out;
    if (trim(csv_names).empty()) {
        return out;
    }
    for (const auto& raw : split(csv_names, ',')) {
        const auto name = trim(raw);
        const int idx = schema.index_of(name);
        if (idx < 0) {
            throw ConfigError("unknown feature in --exclude: '" + std::string(name) + "'");
        }
        out.insert(idx);
    }
    return out;
}

void write_artifact(const fs::path& dir, const std::string& name, std::string_view content,
                    std::vector<std::pair<std::string, std::uint64_t>>& hashes) {
    write_text_file((dir / name).string(), content);
    hashes.emplace_back(name, fnv1a64(content));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct TrainFlags {
    std::uint64_t seed = 42;
    double test_fraction = 0.25;
    TrainConfig config;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--seed", f.seed, "split/model seed");
    cmd->add_option("--test-fraction", f.test_fraction, "held-out fraction (default 0.25)");
    cmd->add_option("--rounds", f.config.n_rounds, "boosting rounds");
    cmd->add_option("--depth", f.config.max_depth, "maximum tree depth");
    cmd->add_option("--learning-rate", f.config.learning_rate, "shrinkage per round");
    cmd->add_option("--l2", f.config.l2_leaf_penalty, "L2 leaf penalty");
    cmd->add_option("--min-child-cover", f.config.min_child_cover, "minimum rows per child");
}

int cmd_synth(const std::string& out, const SynthConfig& config) {
    const LabeledDataset data = generate(config);
    emit_csv(data, out);
    std::cout << "wrote " << data.n_rows() << " rows (" << config.malicious_fraction * 100
              << "% malicious) to " << out << "\n";
    return kExitOk;
}

int cmd_extract(const std::vector<std::string>& pcaps, int label, const std::string& out) {
    const PcapExtractResult result = pcap_to_dataset(pcaps, label);
    emit_csv(result.dataset, out);
    std::cout << "packets " << result.packets_in << ", rows " << result.dataset.n_rows()
              << ", skipped: non-ipv4 " << result.skips.non_ipv4 << ", vlan " << result.skips.vlan
              << ", ipv6 " << result.skips.ipv6 << ", malformed " << result.skips.malformed
              << "\n";
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

int cmd_train(const std::string& csv, const TrainFlags& flags, const std::string& model_out,
              const std::string& report_out) {
    const LabeledDataset data = load_csv(csv, FeatureSchema::packet_features());
    TrainConfig config = flags.config;
    config.seed = flags.seed;
    const SplitResult split = stratified_split(data, flags.test_fraction, flags.seed);
    const TreeEnsemble model = train(split.train, config);
    save_model(model, model_out);

    const auto preds = predict_classes(model, split.test);
    const EvaluationReport report = compute_report(confusion(preds, split.test.labels()));
    std::cout << "trained " << model.trees().size() << " trees on " << split.train.n_rows()
              << " rows; test rows " << split.test.n_rows() << "\n";
    std::cout << format_report_table(report);
    std::cout << "wrote " << model_out << "\n";
    if (!report_out.empty()) {
        write_text_file(report_out, format_report_kv(report));
    }
    return kExitOk;
}

struct AttackArtifacts {
    AttackResult result;
    std::vector<std::pair<std::string, std::uint64_t>> hashes;
};

AttackArtifacts run_and_write_attack(const TreeEnsemble& model, const LabeledDataset& data,
                                     const std::set<int>& excluded, int top_k,
                                     std::span<const std::size_t> scope_rows,
                                     const fs::path& out_dir) {
    AttackArtifacts art{run_attack(model, data, excluded, top_k, scope_rows), {}};
    const AttackResult& r = art.result;

    write_artifact(out_dir, "plan.txt", plans_to_text(r.plans, data.schema()), art.hashes);
    write_artifact(out_dir, "adversarial.csv", to_csv(r.adversarial.samples), art.hashes);
    write_artifact(out_dir, "shap_values.csv", shap_to_csv(r.shap, data.schema()), art.hashes);
    write_artifact(out_dir, "importance.csv", importance_to_csv(r.importance, data.schema()),
                   art.hashes);

    // waterfall for the sample that supplied epsilon (the first plan's lambda)
    std::size_t matrix_row = 0;
    for (std::size_t i = 0; i < r.shap.rows; ++i) {
        if (r.shap.sample_index_map[i] == r.plans[0].source_row) {
            matrix_row = i;
            break;
        }
    }
    write_artifact(out_dir, "waterfall.csv", waterfall_to_csv(waterfall_data(r.shap, data, matrix_row)),
                   art.hashes);
    return art;
}

int cmd_attack(const std::string& model_path, const std::string& csv, const std::string& exclude,
               int top_k, const std::string& scope, const TrainFlags& flags,
               const std::string& out_dir) {
    const TreeEnsemble model = load_model(model_path);
    const LabeledDataset data = load_csv(csv, FeatureSchema::packet_features());
    const std::set<int> excluded = resolve_exclusions(exclude, data.schema());

    std::vector<std::size_t> scope_rows;
    if (scope != "full") {
        const SplitResult split = stratified_split(data, flags.test_fraction, flags.seed);
        scope_rows = scope == "train" ? split.train_rows : split.test_rows;
    }

    fs::create_directories(out_dir);
    const AttackArtifacts art =
        run_and_write_attack(model, data, excluded, top_k, scope_rows, out_dir);
    for (const auto& plan : art.result.plans) {
        std::cout << "feature " << plan.feature_name << " (index " << plan.feature_index
                  << "), lambda " << plan.source_row << ", sigma "
                  << format_double(plan.source_shap) << ", epsilon "
                  << format_double(plan.epsilon) << "\n";
    }
    std::cout << "rewrote " << art.result.adversarial.samples.n_rows()
              << " malicious rows; artifacts in " << out_dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& original_csv,
                 const std::string& adversarial_csv, double min_evasion,
                 const std::string& report_out) {
    const TreeEnsemble model = load_model(model_path);
    const LabeledDataset original = load_csv(original_csv, FeatureSchema::packet_features());
    const LabeledDataset adversarial = load_csv(adversarial_csv, FeatureSchema::packet_features());

    const EvaluationReport before =
        compute_report(confusion(predict_classes(model, original), original.labels()));
    std::cout << "== original samples ==\n" << format_report_table(before);

    const LabelPartition parts = partition_by_label(original);
    std::vector<int> preds = predict_classes(model, parts.benign);
    std::vector<int> truth(parts.benign.n_rows(), 0);
    const auto adv_preds = predict_classes(model, adversarial);
    preds.insert(preds.end(), adv_preds.begin(), adv_preds.end());
    truth.insert(truth.end(), adversarial.n_rows(), 1);

    EvaluationReport after = compute_report(confusion(preds, truth));
    after.evasion_rate = evasion_rate(model, adversarial);
    std::cout << "== benign + adversarial samples ==\n" << format_report_table(after);

    if (!report_out.empty()) {
        write_text_file(report_out, format_report_kv(after));
    }
    if (min_evasion > 0.0 && *after.evasion_rate < min_evasion) {
        std::cout << "evasion rate " << format_double(*after.evasion_rate)
                  << " below required " << format_double(min_evasion) << "\n";
        return kExitThreshold;
    }
    return kExitOk;
}

// --- pipeline ---------------------------------------------------------------

struct PipelineConfig {
    std::string out;
    std::string data_csv;  // empty -> synthesize
    SynthConfig synth;
    TrainFlags train;
    std::string exclude;
    std::string epsilon_scope = "full";
    int top_k = 1;
    double min_test_accuracy = 0.0;
    double min_evasion = 0.0;
};

PipelineConfig parse_pipeline_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    int line_no = 0;
    for (const auto& raw : split(read_text_file(path), '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key{trim(line.substr(0, eq))};
        if (kv.count(key)) {
            throw ConfigError("config: duplicate key '" + key + "'");
        }
        kv[key] = std::string(trim(line.substr(eq + 1)));
    }

    PipelineConfig cfg;
    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) {
            return std::nullopt;
        }
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_double = [&](const char* key, double& target) {
        if (auto v = take(key)) {
            target = parse_double(*v, key);
        }
    };
    auto take_int = [&](const char* key, auto& target) {
        if (auto v = take(key)) {
            target = static_cast<std::remove_reference_t<decltype(target)>>(parse_int(*v, key));
        }
    };

    if (auto v = take("out")) {
        cfg.out = *v;
    } else {
        throw ConfigError("config: missing required key 'out'");
    }
    if (auto v = take("data_csv")) {
        cfg.data_csv = *v;
    }
    if (auto v = take("n_samples")) {
        const long long n = parse_int(*v, "n_samples");
        if (n < 1) {
            throw ConfigError("config: n_samples must be >= 1");
        }
        cfg.synth.n_samples = static_cast<std::size_t>(n);
    }
    take_double("malicious_fraction", cfg.synth.malicious_fraction);
    take_double("signal_strength", cfg.synth.signal_strength);
    if (auto v = take("dominant_feature")) {
        const int idx = FeatureSchema::packet_features().index_of(*v);
        if (idx < 0) {
            throw ConfigError("config: dominant_feature names an unknown feature '" + *v + "'");
        }
        cfg.synth.dominant_feature = idx;
    }
    take_int("seed", cfg.train.seed);
    cfg.synth.seed = cfg.train.seed;
    take_double("test_fraction", cfg.train.test_fraction);
    take_int("rounds", cfg.train.config.n_rounds);
    take_int("depth", cfg.train.config.max_depth);
    take_double("learning_rate", cfg.train.config.learning_rate);
    take_double("l2", cfg.train.config.l2_leaf_penalty);
    take_double("min_child_cover", cfg.train.config.min_child_cover);
    if (auto v = take("exclude")) {
        cfg.exclude = *v;
    }
    if (auto v = take("epsilon_scope")) {
        if (*v != "full" && *v != "train" && *v != "test") {
            throw ConfigError("config: epsilon_scope must be full, train or test");
        }
        cfg.epsilon_scope = *v;
    }
    take_int("top_k", cfg.top_k);
    take_double("min_test_accuracy", cfg.min_test_accuracy);
    take_double("min_evasion", cfg.min_evasion);

    if (!kv.empty()) {
        throw ConfigError("config: unknown key '" + kv.begin()->first + "'");
    }
    return cfg;
}

int cmd_pipeline(const std::string& config_path) {
    const PipelineConfig cfg = parse_pipeline_config(config_path);
    const fs::path out_dir = cfg.out;
    fs::create_directories(out_dir);
    std::vector<std::pair<std::string, std::uint64_t>> hashes;

    // stage 1: data
    std::optional<LabeledDataset> data;
    if (cfg.data_csv.empty()) {
        SynthConfig synth_cfg = cfg.synth;
        synth_cfg.seed = cfg.train.seed;
        data = generate(synth_cfg);
        write_artifact(out_dir, "dataset.csv", to_csv(*data), hashes);
    } else {
        data = load_csv(cfg.data_csv, FeatureSchema::packet_features());
        hashes.emplace_back("input:" + cfg.data_csv, fnv1a64(read_text_file(cfg.data_csv)));
    }
    std::cout << "data: " << data->n_rows() << " rows\n";

    // stage 2: train + baseline report on the held-out split
    TrainConfig train_cfg = cfg.train.config;
    train_cfg.seed = cfg.train.seed;
    const SplitResult split = stratified_split(*data, cfg.train.test_fraction, cfg.train.seed);
    const TreeEnsemble model = train(split.train, train_cfg);
    const std::string model_text = serialize_model(model);
    write_artifact(out_dir, "model.txt", model_text, hashes);

    const auto test_preds = predict_classes(model, split.test);
    const EvaluationReport baseline = compute_report(confusion(test_preds, split.test.labels()));
    write_artifact(out_dir, "report_baseline.kv", format_report_kv(baseline), hashes);
    std::cout << "== baseline (test split) ==\n" << format_report_table(baseline);

    // stage 3: attack
    const std::set<int> excluded = resolve_exclusions(cfg.exclude, data->schema());
    std::span<const std::size_t> scope_rows;
    if (cfg.epsilon_scope == "train") {
        scope_rows = split.train_rows;
    } else if (cfg.epsilon_scope == "test") {
        scope_rows = split.test_rows;
    }
    const AttackArtifacts art =
        run_and_write_attack(model, *data, excluded, cfg.top_k, scope_rows, out_dir);
    hashes.insert(hashes.end(), art.hashes.begin(), art.hashes.end());
    const AttackResult& attack = art.result;
    const AttackPlan& plan = attack.plans[0];
    std::cout << "attack: feature " << plan.feature_name << ", lambda " << plan.source_row
              << ", sigma " << format_double(plan.source_shap) << ", epsilon "
              << format_double(plan.epsilon) << "\n";

    // stage 4: post-attack evaluation on the test analogue (benign test rows
    // plus the adversarial rewrites of malicious test rows)
    std::vector<char> in_test(data->n_rows(), 0);
    for (std::size_t r : split.test_rows) {
        in_test[r] = 1;
    }
    std::vector<int> preds;
    std::vector<int> truth;
    for (std::size_t i = 0; i < split.test.n_rows(); ++i) {
        if (split.test.label(i) == 0) {
            preds.push_back(model.predict_class(split.test.row(i)));
            truth.push_back(0);
        }
    }
    for (std::size_t i = 0; i < attack.adversarial.samples.n_rows(); ++i) {
        if (in_test[attack.adversarial.origin_rows[i]]) {
            preds.push_back(model.predict_class(attack.adversarial.samples.row(i)));
            truth.push_back(1);
        }
    }
    EvaluationReport post = compute_report(confusion(preds, truth));
    post.evasion_rate = evasion_rate(model, attack.adversarial);
    write_artifact(out_dir, "report_attack.kv", format_report_kv(post), hashes);
    std::cout << "== post-attack (test analogue) ==\n" << format_report_table(post);
    std::cout << "evasion rate over all adversarial rows: "
              << format_double(*post.evasion_rate) << "\n";

    // stage 5: manifest
    std::string manifest = "advex-manifest v1\n";
    manifest += "version " + std::string(kToolVersion) + "\n";
    manifest += "config data_csv " + (cfg.data_csv.empty() ? "-" : cfg.data_csv) + "\n";
    manifest += "config n_samples " + std::to_string(cfg.synth.n_samples) + "\n";
    manifest += "config malicious_fraction " + format_double(cfg.synth.malicious_fraction) + "\n";
    manifest += "config signal_strength " + format_double(cfg.synth.signal_strength) + "\n";
    manifest += "config dominant_feature " +
                data->schema().name(static_cast<std::size_t>(cfg.synth.dominant_feature)) + "\n";
    manifest += "config seed " + std::to_string(cfg.train.seed) + "\n";
    manifest += "config test_fraction " + format_double(cfg.train.test_fraction) + "\n";
    manifest += "config rounds " + std::to_string(train_cfg.n_rounds) + "\n";
    manifest += "config depth " + std::to_string(train_cfg.max_depth) + "\n";
    manifest += "config learning_rate " + format_double(train_cfg.learning_rate) + "\n";
    manifest += "config l2 " + format_double(train_cfg.l2_leaf_penalty) + "\n";
    manifest += "config min_child_cover " + format_double(train_cfg.min_child_cover) + "\n";
    manifest += "config exclude " + (cfg.exclude.empty() ? "-" : cfg.exclude) + "\n";
    manifest += "config epsilon_scope " + cfg.epsilon_scope + "\n";
    manifest += "config top_k " + std::to_string(cfg.top_k) + "\n";
    manifest += "summary baseline_accuracy " + format_double(baseline.accuracy) + "\n";
    manifest += "summary selected_feature " + plan.feature_name + "\n";
    manifest += "summary lambda " + std::to_string(plan.source_row) + "\n";
    manifest += "summary sigma " + format_double(plan.source_shap) + "\n";
    manifest += "summary epsilon " + format_double(plan.epsilon) + "\n";
    manifest += "summary evasion_rate " + format_double(*post.evasion_rate) + "\n";
    for (const auto& [name, hash] : hashes) {
        manifest += "artifact " + name + " fnv1a64 " + hex64(hash) + "\n";
    }
    write_text_file((out_dir / "manifest.txt").string(), manifest);
    std::cout << "manifest: " << (out_dir / "manifest.txt").string() << "\n";

    if (cfg.min_test_accuracy > 0.0 && baseline.accuracy < cfg.min_test_accuracy) {
        std::cout << "baseline accuracy below configured floor\n";
        return kExitThreshold;
    }
    if (cfg.min_evasion > 0.0 && *post.evasion_rate < cfg.min_evasion) {
        std::cout << "evasion rate below configured floor\n";
        return kExitThreshold;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree-ensemble botnet detector, Shapley explanations, and the "
                 "explanation-guided evasion attack"};
    app.require_subcommand(1);
    int rc = kExitOk;

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic packet-feature CSV");
    std::string synth_out;
    SynthConfig synth_cfg;
    std::string dominant_name = "frame.len";
    synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
    synth_cmd->add_option("--n", synth_cfg.n_samples, "sample count");
    synth_cmd->add_option("--malicious-fraction", synth_cfg.malicious_fraction,
                          "fraction labeled 1");
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
    synth_cmd->add_option("--signal", synth_cfg.signal_strength, "dominant-feature separation");
    synth_cmd->add_option("--dominant", dominant_name, "planted dominant feature name");
    synth_cmd->callback([&] {
        const int idx = FeatureSchema::packet_features().index_of(dominant_name);
        if (idx < 0) {
            throw ConfigError("unknown feature for --dominant: '" + dominant_name + "'");
        }
        synth_cfg.dominant_feature = idx;
        rc = cmd_synth(synth_out, synth_cfg);
    });

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "pcap files to a labeled feature CSV");
    std::vector<std::string> pcap_paths;
    int extract_label = 1;
    std::string extract_out;
    extract_cmd->add_option("pcaps", pcap_paths, "input pcap files")->required();
    extract_cmd->add_option("--label", extract_label, "label for every row (0 or 1)")->required();
    extract_cmd->add_option("--out", extract_out, "output CSV path")->required();
    extract_cmd->callback([&] { rc = cmd_extract(pcap_paths, extract_label, extract_out); });

    // train
    auto* train_cmd = app.add_subcommand("train", "train the detector and report test metrics");
    std::string train_csv;
    std::string model_out = "model.txt";
    std::string train_report_out;
    TrainFlags train_flags;
    train_cmd->add_option("csv", train_csv, "labeled dataset CSV")->required();
    train_cmd->add_option("--model-out", model_out, "model file path");
    train_cmd->add_option("--report-out", train_report_out, "write test report as key-value text");
    add_train_flags(train_cmd, train_flags);
    train_cmd->callback([&] { rc = cmd_train(train_csv, train_flags, model_out, train_report_out); });

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "run the single-feature evasion attack");
    std::string attack_model;
    std::string attack_csv;
    std::string attack_exclude;
    std::string attack_scope = "full";
    std::string attack_out = "attack-out";
    int top_k = 1;
    TrainFlags attack_flags;  // seed/test-fraction drive the scoped split
    attack_cmd->add_option("--model", attack_model, "trained model file")->required();
    attack_cmd->add_option("--data", attack_csv, "dataset CSV to attack")->required();
    attack_cmd->add_option("--exclude", attack_exclude,
                           "comma-separated feature names the attacker cannot alter");
    attack_cmd->add_option("--epsilon-scope", attack_scope, "full, train or test")
        ->check(CLI::IsMember({"full", "train", "test"}));
    attack_cmd->add_option("--top-k", top_k, "number of features to perturb (default 1)");
    attack_cmd->add_option("--seed", attack_flags.seed, "split seed for scoped runs");
    attack_cmd->add_option("--test-fraction", attack_flags.test_fraction,
                           "split fraction for scoped runs");
    attack_cmd->add_option("--out", attack_out, "artifact directory");
    attack_cmd->callback([&] {
        rc = cmd_attack(attack_model, attack_csv, attack_exclude, top_k, attack_scope,
                        attack_flags, attack_out);
    });

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "compare detection before and after the attack");
    std::string eval_model;
    std::string eval_original;
    std::string eval_adversarial;
    std::string eval_report_out;
    double min_evasion = 0.0;
    eval_cmd->add_option("--model", eval_model, "trained model file")->required();
    eval_cmd->add_option("--original", eval_original, "original dataset CSV")->required();
    eval_cmd->add_option("--adversarial", eval_adversarial, "adversarial CSV")->required();
    eval_cmd->add_option("--min-evasion", min_evasion,
                         "exit 1 when the evasion rate falls below this floor");
    eval_cmd->add_option("--report-out", eval_report_out, "write post-attack report as key-value");
    eval_cmd->callback([&] {
        rc = cmd_evaluate(eval_model, eval_original, eval_adversarial, min_evasion,
                          eval_report_out);
    });

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "run data -> train -> attack -> evaluate");
    std::string pipeline_config;
    pipe_cmd->add_option("config", pipeline_config, "pipeline config file")->required();
    pipe_cmd->callback([&] { rc = cmd_pipeline(pipeline_config); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return rc;
}
