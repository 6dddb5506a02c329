#include "advex/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace advex {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.size() != truth.size()) {
        throw DimensionError("prediction and truth vectors differ in length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int p = predictions[i];
        const int t = truth[i];
        if ((p != 0 && p != 1) || (t != 0 && t != 1)) {
            throw ParseError("labels must be 0 or 1");
        }
        if (p == 1 && t == 1) {
            ++cm.tp;
        } else if (p == 0 && t == 0) {
            ++cm.tn;
        } else if (p == 1 && t == 0) {
            ++cm.fp;
        } else {
            ++cm.fn;
        }
    }
    return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic_f1(double precision, double recall, bool& degenerate) {
    if (precision + recall == 0.0) {
        degenerate = true;
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

EvaluationReport compute_report(const ConfusionMatrix& cm) {
    if (cm.total() == 0) {
        throw DimensionError("confusion matrix is empty");
    }
    EvaluationReport r;
    r.confusion = cm;

    r.class1.support = cm.tp + cm.fn;
    r.class1.precision = ratio(cm.tp, cm.tp + cm.fp, r.class1.degenerate);
    r.class1.recall = ratio(cm.tp, cm.tp + cm.fn, r.class1.degenerate);
    r.class1.f1 = harmonic_f1(r.class1.precision, r.class1.recall, r.class1.degenerate);

    // class 0 metrics swap the positive/negative roles
    r.class0.support = cm.tn + cm.fp;
    r.class0.precision = ratio(cm.tn, cm.tn + cm.fn, r.class0.degenerate);
    r.class0.recall = ratio(cm.tn, cm.tn + cm.fp, r.class0.degenerate);
    r.class0.f1 = harmonic_f1(r.class0.precision, r.class0.recall, r.class0.degenerate);

    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());

    r.macro_avg.precision = (r.class0.precision + r.class1.precision) / 2.0;
    r.macro_avg.recall = (r.class0.recall + r.class1.recall) / 2.0;
    r.macro_avg.f1 = (r.class0.f1 + r.class1.f1) / 2.0;

    const double n = static_cast<double>(cm.total());
    const double w0 = static_cast<double>(r.class0.support) / n;
    const double w1 = static_cast<double>(r.class1.support) / n;
    r.weighted_avg.precision = w0 * r.class0.precision + w1 * r.class1.precision;
    r.weighted_avg.recall = w0 * r.class0.recall + w1 * r.class1.recall;
    r.weighted_avg.f1 = w0 * r.class0.f1 + w1 * r.class1.f1;

    bool rate_degenerate = false;
    r.fp_rate = ratio(cm.fp, cm.fp + cm.tn, rate_degenerate);
    r.fn_rate = ratio(cm.fn, cm.fn + cm.tp, rate_degenerate);
    r.degenerate = r.class0.degenerate || r.class1.degenerate || rate_degenerate;
    return r;
}

double evasion_rate(const TreeEnsemble& model, const LabeledDataset& adversarial_samples,
                    int threads) {
    if (adversarial_samples.n_rows() == 0) {
        throw DimensionError("evasion rate needs a non-empty adversarial set");
    }
    const auto classes = predict_classes(model, adversarial_samples, 0.5, threads);
    std::size_t benign = 0;
    for (int c : classes) {
        benign += c == 0;
    }
    return static_cast<double>(benign) / static_cast<double>(classes.size());
}

double evasion_rate(const TreeEnsemble& model, const AdversarialSet& adversarial, int threads) {
    return evasion_rate(model, adversarial.samples, threads);
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string format_report_table(const EvaluationReport& report) {
    std::string out;
    out += "                     precision    recall  f1-score   support\n";
    auto row = [&](const std::string& name, double p, double rr, double f1, std::uint64_t support) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-18s %11s %9s %9s %9llu\n", name.c_str(),
                      fixed4(p).c_str(), fixed4(rr).c_str(), fixed4(f1).c_str(),
                      static_cast<unsigned long long>(support));
        out += buf;
    };
    row("0", report.class0.precision, report.class0.recall, report.class0.f1,
        report.class0.support);
    row("1", report.class1.precision, report.class1.recall, report.class1.f1,
        report.class1.support);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-18s %11s %9s %9s %9llu\n", "accuracy", "", "",
                  fixed4(report.accuracy).c_str(),
                  static_cast<unsigned long long>(report.confusion.total()));
    out += buf;
    row("macro average", report.macro_avg.precision, report.macro_avg.recall, report.macro_avg.f1,
        report.confusion.total());
    row("weighted average", report.weighted_avg.precision, report.weighted_avg.recall,
        report.weighted_avg.f1, report.confusion.total());
    std::snprintf(buf, sizeof(buf), "fp_rate %s  fn_rate %s\n", fixed4(report.fp_rate).c_str(),
                  fixed4(report.fn_rate).c_str());
    out += buf;
    if (report.evasion_rate) {
        std::snprintf(buf, sizeof(buf), "evasion_rate %s\n", fixed4(*report.evasion_rate).c_str());
        out += buf;
    }
    if (report.degenerate) {
        out += "note: zero-denominator cells reported as 0\n";
    }
    return out;
}

std::string format_report_kv(const EvaluationReport& report) {
    std::string out;
    auto kv = [&](const std::string& key, const std::string& value) {
        out += key + " " + value + "\n";
    };
    kv("tp", std::to_string(report.confusion.tp));
    kv("tn", std::to_string(report.confusion.tn));
    kv("fp", std::to_string(report.confusion.fp));
    kv("fn", std::to_string(report.confusion.fn));
    kv("accuracy", format_double(report.accuracy));
    kv("class0.precision", format_double(report.class0.precision));
    kv("class0.recall", format_double(report.class0.recall));
    kv("class0.f1", format_double(report.class0.f1));
    kv("class0.support", std::to_string(report.class0.support));
    kv("class1.precision", format_double(report.class1.precision));
    kv("class1.recall", format_double(report.class1.recall));
    kv("class1.f1", format_double(report.class1.f1));
    kv("class1.support", std::to_string(report.class1.support));
    kv("macro.precision", format_double(report.macro_avg.precision));
    kv("macro.recall", format_double(report.macro_avg.recall));
    kv("macro.f1", format_double(report.macro_avg.f1));
    kv("weighted.precision", format_double(report.weighted_avg.precision));
    kv("weighted.recall", format_double(report.weighted_avg.recall));
    kv("weighted.f1", format_double(report.weighted_avg.f1));
    kv("fp_rate", format_double(report.fp_rate));
    kv("fn_rate", format_double(report.fn_rate));
    kv("degenerate", report.degenerate ? "1" : "0");
    if (report.evasion_rate) {
        kv("evasion_rate", format_double(*report.evasion_rate));
    }
    return out;
}

}  // namespace advex
