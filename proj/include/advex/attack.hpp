#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "advex/dataset.hpp"
#include "advex/explain.hpp"
#include "advex/gbt.hpp"

namespace advex {

// One planned perturbation: overwrite feature_index with epsilon, the value
// the source benign sample carried where that feature pushed hardest benign.
struct AttackPlan {
    int feature_index = -1;
    std::string feature_name;
    std::size_t source_row = 0;   // row in the attacked dataset (benign-labeled)
    double source_shap = 0.0;     // attribution at [source_row, feature_index], margin units
    double epsilon = 0.0;         // dataset value at [source_row, feature_index]
    std::set<int> excluded_features;
};

// Malicious rows rewritten per the plans; labels stay 1.
struct AdversarialSet {
    LabeledDataset samples;
    std::vector<AttackPlan> plans;            // one per perturbed feature; usually one
    std::vector<std::size_t> origin_rows;     // row i came from this row of the attacked input
};

// Highest-ranked feature not excluded.
int select_feature(const FeatureImportance& importance, const std::set<int>& excluded);

struct EpsilonSearch {
    std::size_t row;    // lambda: dataset row of the minimizing benign sample
    double shap;        // sigma: the minimum attribution found
    double value;       // epsilon: the dataset value at [row, feature]
};

// Scans benign-labeled rows for the smallest attribution of `feature`.
// Ties resolve to the lowest row index. Throws SplitError when the matrix
// covers no benign rows.
EpsilonSearch find_epsilon(const ShapMatrix& s, const LabeledDataset& data, int feature);

AdversarialSet generate_adversarial(const LabeledDataset& malicious,
                                    std::span<const AttackPlan> plans);
AdversarialSet generate_adversarial(const LabeledDataset& malicious, const AttackPlan& plan);

struct AttackResult {
    ShapMatrix shap;
    FeatureImportance importance;
    std::vector<AttackPlan> plans;
    AdversarialSet adversarial;   // origin_rows point into `data` passed to run_attack
};

// Full pipeline: attributions -> importance -> feature choice -> epsilon
// search -> malicious rewrite. Labels are read only for the benign filter and
// the partition, never for the attributions. `scope_rows`, when given,
// restricts the attribution matrix and the epsilon search; the rewrite always
// covers every malicious row of `data`.
AttackResult run_attack(const TreeEnsemble& model, const LabeledDataset& data,
                        const std::set<int>& excluded, int top_k = 1,
                        std::span<const std::size_t> scope_rows = {}, int threads = 0);

std::string plans_to_text(std::span<const AttackPlan> plans, const FeatureSchema& schema);

}  // namespace advex
