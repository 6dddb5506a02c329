#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advex/attack.hpp"
#include "advex/dataset.hpp"
#include "advex/gbt.hpp"

namespace advex {

// Class 1 (malicious) is the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    bool degenerate = false;  // some cell had a zero denominator and was reported as 0
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvaluationReport {
    ConfusionMatrix confusion;
    ClassMetrics class0;  // computed with the positive/negative roles swapped
    ClassMetrics class1;
    double accuracy = 0.0;
    AverageMetrics macro_avg;
    AverageMetrics weighted_avg;
    double fp_rate = 0.0;
    double fn_rate = 0.0;
    bool degenerate = false;
    std::optional<double> evasion_rate;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truth);

EvaluationReport compute_report(const ConfusionMatrix& cm);

// Fraction of adversarial rows the model classifies benign; the false-negative
// rate restricted to the adversarial set.
double evasion_rate(const TreeEnsemble& model, const LabeledDataset& adversarial_samples,
                    int threads = 0);
double evasion_rate(const TreeEnsemble& model, const AdversarialSet& adversarial, int threads = 0);

// Human-readable table (per-class rows, accuracy, macro and weighted averages).
std::string format_report_table(const EvaluationReport& report);
// Machine-readable `key value` lines; deterministic bytes.
std::string format_report_kv(const EvaluationReport& report);

}  // namespace advex
