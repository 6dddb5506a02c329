#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advex/common.hpp"

namespace advex {

// Ordered list of feature names shared by datasets, models and reports.
class FeatureSchema {
public:
    explicit FeatureSchema(std::vector<std::string> names);

    // The seven per-packet fields, in their canonical column order.
    static FeatureSchema packet_features();

    const std::vector<std::string>& names() const { return names_; }
    std::size_t count() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    int index_of(std::string_view name) const;  // -1 when absent

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<std::string> names_;
};

// Immutable feature matrix with binary labels. Label 0 = benign, 1 = malicious.
class LabeledDataset {
public:
    LabeledDataset(FeatureSchema schema, std::vector<double> x_row_major, std::vector<int> y);

    std::size_t n_rows() const { return y_.size(); }
    std::size_t n_features() const { return schema_.count(); }
    std::span<const double> row(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;
    int label(std::size_t i) const { return y_.at(i); }
    const std::vector<int>& labels() const { return y_; }
    const std::vector<double>& x() const { return x_; }
    const FeatureSchema& schema() const { return schema_; }

private:
    FeatureSchema schema_;
    std::vector<double> x_;  // row-major, n_rows x n_features
    std::vector<int> y_;
};

struct SplitResult {
    LabeledDataset train;
    LabeledDataset test;
    std::vector<std::size_t> train_rows;  // source row indices, ascending
    std::vector<std::size_t> test_rows;
    std::uint64_t seed;
};

struct LabelPartition {
    LabeledDataset benign;
    LabeledDataset malicious;
    std::vector<std::size_t> benign_rows;  // source row indices, in source order
    std::vector<std::size_t> malicious_rows;
};

// CSV: header row = schema names plus trailing `label`, comma separated,
// LF line endings, values at full round-trip precision.
LabeledDataset load_csv(const std::string& path, const FeatureSchema& schema);
void emit_csv(const LabeledDataset& dataset, const std::string& path);
std::string to_csv(const LabeledDataset& dataset);
LabeledDataset parse_csv(std::string_view text, const FeatureSchema& schema,
                         std::string_view origin = "<string>");

// Seeded per-class shuffle followed by a prefix split. Deterministic;
// preserves source row order inside each side.
SplitResult stratified_split(const LabeledDataset& dataset, double test_fraction,
                             std::uint64_t seed);

LabelPartition partition_by_label(const LabeledDataset& dataset);

// New dataset holding the given source rows, in the given order.
LabeledDataset select_rows(const LabeledDataset& dataset, std::span<const std::size_t> rows);

}  // namespace advex
