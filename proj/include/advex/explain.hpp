#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advex/dataset.hpp"
#include "advex/gbt.hpp"

namespace advex {

// Per-sample, per-feature attributions of the ensemble margin. base_value is
// the empty-coalition expected margin, so base_value + sum(row) = margin.
struct ShapMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;                  // row-major
    double base_value = 0.0;
    std::vector<std::size_t> sample_index_map;   // row i explains dataset row map[i]

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * cols, cols};
    }
    double at(std::size_t i, std::size_t j) const { return values.at(i * cols + j); }
};

struct FeatureImportance {
    std::vector<double> mean_abs;  // mean absolute attribution per feature
    std::vector<int> ranking;      // feature indices, descending mean_abs, ties -> lower index
};

// Coalition value: route on in-coalition features, cover-weighted average over
// the rest. coalition_mask bit j = feature j is in the coalition.
double tree_value_function(const TreeEnsemble& model, std::span<const double> x,
                           std::uint64_t coalition_mask);

// Empty-coalition value; what shap_matrix reports as base_value.
double expected_margin(const TreeEnsemble& model);

// Exact Shapley values by full coalition enumeration. Verification oracle;
// capped at 15 features.
std::vector<double> shap_brute_force(const TreeEnsemble& model, std::span<const double> x);

// Polynomial-time path-dependent tree Shapley. Matches shap_brute_force
// wherever the oracle is feasible.
std::vector<double> shap_fast(const TreeEnsemble& model, std::span<const double> x);

// Labels are never read; attributions depend on features only.
ShapMatrix shap_matrix(const TreeEnsemble& model, const LabeledDataset& data, int threads = 0);
ShapMatrix shap_matrix_rows(const TreeEnsemble& model, const LabeledDataset& data,
                            std::span<const std::size_t> rows, int threads = 0);

FeatureImportance mean_abs_importance(const ShapMatrix& s);

struct WaterfallEntry {
    int feature;
    std::string name;
    double value;        // the sample's feature value
    double attribution;  // margin units
};

struct WaterfallData {
    std::size_t row;          // row within the ShapMatrix
    std::size_t source_row;   // dataset row it explains
    double base_value;
    double margin;            // base_value + sum of attributions
    std::vector<WaterfallEntry> entries;  // descending |attribution|
};

WaterfallData waterfall_data(const ShapMatrix& s, const LabeledDataset& data, std::size_t row);

// Plot-ready text exports (CSV dialect of the dataset module; `#` metadata lines).
std::string shap_to_csv(const ShapMatrix& s, const FeatureSchema& schema);
std::string importance_to_csv(const FeatureImportance& imp, const FeatureSchema& schema);
std::string waterfall_to_csv(const WaterfallData& wf);

}  // namespace advex
