#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advex/dataset.hpp"

namespace advex {

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf margin contribution, learning rate applied
    double cover = 0.0;      // training rows that reached this node

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct TrainConfig {
    int n_rounds = 100;
    int max_depth = 6;
    double learning_rate = 0.3;
    double min_child_cover = 1.0;
    double l2_leaf_penalty = 1.0;
    std::uint64_t seed = 0;  // echoed into the model file; training is deterministic
};

// Additive margin model: margin(x) = base_score + sum of routed leaf values.
// Probability is the logistic link applied to the margin.
class TreeEnsemble {
public:
    TreeEnsemble(std::vector<Tree> trees, double base_score, int n_features,
                 TrainConfig config, std::vector<std::string> feature_names = {});

    const std::vector<Tree>& trees() const { return trees_; }
    double base_score() const { return base_score_; }
    int n_features() const { return n_features_; }
    const TrainConfig& config() const { return config_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    double predict_margin(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
    int predict_class(std::span<const double> x, double threshold = 0.5) const;

private:
    std::vector<Tree> trees_;
    double base_score_;
    int n_features_;
    TrainConfig config_;
    std::vector<std::string> feature_names_;
};

// Newton boosting on logistic loss with exact greedy split enumeration.
// Deterministic: candidate features ascending, thresholds ascending, a split
// is taken only on strictly larger gain.
TreeEnsemble train(const LabeledDataset& data, const TrainConfig& config);

double sigmoid(double margin);
double logit(double p);

std::vector<double> predict_margins(const TreeEnsemble& model, const LabeledDataset& data,
                                    int threads = 0);
std::vector<int> predict_classes(const TreeEnsemble& model, const LabeledDataset& data,
                                 double threshold = 0.5, int threads = 0);

// Versioned text format with exact decimal round-trip.
std::string serialize_model(const TreeEnsemble& model);
TreeEnsemble deserialize_model(std::string_view text);
void save_model(const TreeEnsemble& model, const std::string& path);
TreeEnsemble load_model(const std::string& path);

}  // namespace advex
