#include "advex/attack.hpp"

#include <algorithm>
#include <limits>

namespace advex {

int select_feature(const FeatureImportance& importance, const std::set<int>& excluded) {
    for (int f : importance.ranking) {
        if (!excluded.contains(f)) {
            return f;
        }
    }
    throw ConfigError("every feature is excluded; nothing to perturb");
}

EpsilonSearch find_epsilon(const ShapMatrix& s, const LabeledDataset& data, int feature) {
    if (feature < 0 || static_cast<std::size_t>(feature) >= s.cols) {
        throw DimensionError("feature index out of range");
    }
    bool found = false;
    std::size_t best_row = 0;
    double best_shap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.rows; ++i) {
        const std::size_t source = s.sample_index_map[i];
        if (data.label(source) != 0) {
            continue;
        }
        const double v = s.at(i, static_cast<std::size_t>(feature));
        if (v < best_shap) {  // strict: ties keep the earliest row
            best_shap = v;
            best_row = source;
            found = true;
        }
    }
    if (!found) {
        throw SplitError("no benign samples in the epsilon search domain");
    }
    return EpsilonSearch{best_row, best_shap, data.at(best_row, static_cast<std::size_t>(feature))};
}

AdversarialSet generate_adversarial(const LabeledDataset& malicious,
                                    std::span<const AttackPlan> plans) {
    for (const auto& plan : plans) {
        if (plan.feature_index < 0 ||
            static_cast<std::size_t>(plan.feature_index) >= malicious.n_features()) {
            throw SchemaError("attack plan feature index out of range for the schema");
        }
        if (!plan.feature_name.empty() &&
            malicious.schema().index_of(plan.feature_name) != plan.feature_index) {
            throw SchemaError("attack plan feature name does not match the schema");
        }
    }
    std::vector<double> x(malicious.x());
    const std::size_t f = malicious.n_features();
    for (std::size_t i = 0; i < malicious.n_rows(); ++i) {
        for (const auto& plan : plans) {
            x[i * f + static_cast<std::size_t>(plan.feature_index)] = plan.epsilon;
        }
    }
    AdversarialSet out{
        LabeledDataset(malicious.schema(), std::move(x), malicious.labels()),
        std::vector<AttackPlan>(plans.begin(), plans.end()),
        std::vector<std::size_t>(malicious.n_rows())};
    for (std::size_t i = 0; i < out.origin_rows.size(); ++i) {
        out.origin_rows[i] = i;
    }
    return out;
}

AdversarialSet generate_adversarial(const LabeledDataset& malicious, const AttackPlan& plan) {
    return generate_adversarial(malicious, std::span<const AttackPlan>{&plan, 1});
}

AttackResult run_attack(const TreeEnsemble& model, const LabeledDataset& data,
                        const std::set<int>& excluded, int top_k,
                        std::span<const std::size_t> scope_rows, int threads) {
    if (top_k < 1) {
        throw ConfigError("top_k must be >= 1");
    }

    ShapMatrix shap = scope_rows.empty() ? shap_matrix(model, data, threads)
                                         : shap_matrix_rows(model, data, scope_rows, threads);
    FeatureImportance importance = mean_abs_importance(shap);

    std::set<int> taken = excluded;
    std::vector<AttackPlan> plans;
    for (int k = 0; k < top_k; ++k) {
        const int feature = select_feature(importance, taken);
        taken.insert(feature);
        const EpsilonSearch found = find_epsilon(shap, data, feature);
        AttackPlan plan;
        plan.feature_index = feature;
        plan.feature_name = data.schema().name(static_cast<std::size_t>(feature));
        plan.source_row = found.row;
        plan.source_shap = found.shap;
        plan.epsilon = found.value;
        plan.excluded_features = excluded;
        plans.push_back(std::move(plan));
    }

    LabelPartition parts = partition_by_label(data);
    AdversarialSet adversarial = generate_adversarial(parts.malicious, plans);
    for (std::size_t i = 0; i < adversarial.origin_rows.size(); ++i) {
        adversarial.origin_rows[i] = parts.malicious_rows[adversarial.origin_rows[i]];
    }

    return AttackResult{std::move(shap), std::move(importance), std::move(plans),
                        std::move(adversarial)};
}

std::string plans_to_text(std::span<const AttackPlan> plans, const FeatureSchema& schema) {
    std::string out = "advex-attack-plan v1\n";
    out += "n_plans " + std::to_string(plans.size()) + "\n";
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& p = plans[i];
        out += "plan " + std::to_string(i) + "\n";
        out += "  feature_index " + std::to_string(p.feature_index) + "\n";
        out += "  feature_name " + p.feature_name + "\n";
        out += "  source_row " + std::to_string(p.source_row) + "\n";
        out += "  source_shap " + format_double(p.source_shap) + "\n";
        out += "  epsilon " + format_double(p.epsilon) + "\n";
        out += "  excluded ";
        if (p.excluded_features.empty()) {
            out += "none";
        } else {
            bool first = true;
            for (int f : p.excluded_features) {
                if (!first) {
                    out += ',';
                }
                out += schema.name(static_cast<std::size_t>(f));
                first = false;
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace advex
