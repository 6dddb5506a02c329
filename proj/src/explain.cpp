#include "advex/explain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace advex {

namespace {

double node_value(const Tree& tree, int idx, std::span<const double> x,
                  std::uint64_t coalition_mask) {
    const auto& n = tree.nodes[idx];
    if (n.is_leaf()) {
        return n.value;
    }
    if (coalition_mask >> n.feature & 1u) {
        return node_value(tree, x[n.feature] < n.threshold ? n.left : n.right, x, coalition_mask);
    }
    const auto& l = tree.nodes[n.left];
    const auto& r = tree.nodes[n.right];
    return (l.cover * node_value(tree, n.left, x, coalition_mask) +
            r.cover * node_value(tree, n.right, x, coalition_mask)) /
           n.cover;
}

double node_expectation(const Tree& tree, int idx) {
    const auto& n = tree.nodes[idx];
    if (n.is_leaf()) {
        return n.value;
    }
    return (tree.nodes[n.left].cover * node_expectation(tree, n.left) +
            tree.nodes[n.right].cover * node_expectation(tree, n.right)) /
           n.cover;
}

void check_dimension(const TreeEnsemble& model, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(model.n_features())) {
        throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                             std::to_string(model.n_features()));
    }
}

}  // namespace

double tree_value_function(const TreeEnsemble& model, std::span<const double> x,
                           std::uint64_t coalition_mask) {
    check_dimension(model, x);
    if (model.n_features() > 64) {
        throw CapacityError("coalition mask supports at most 64 features");
    }
    double v = model.base_score();
    for (const auto& tree : model.trees()) {
        v += node_value(tree, 0, x, coalition_mask);
    }
    return v;
}

double expected_margin(const TreeEnsemble& model) {
    double v = model.base_score();
    for (const auto& tree : model.trees()) {
        v += node_expectation(tree, 0);
    }
    return v;
}

std::vector<double> shap_brute_force(const TreeEnsemble& model, std::span<const double> x) {
    check_dimension(model, x);
    const int n = model.n_features();
    if (n > 15) {
        throw CapacityError("brute-force Shapley is capped at 15 features (2^n coalitions)");
    }

    const std::uint64_t n_masks = 1ull << n;
    std::vector<double> value(n_masks);
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        value[mask] = tree_value_function(model, x, mask);
    }

    std::array<double, 16> factorial{};
    factorial[0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        factorial[i] = factorial[i - 1] * i;
    }

    std::vector<double> phi(n, 0.0);
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        const int size = std::popcount(mask);
        const double weight = factorial[size] * factorial[n - size - 1] / factorial[n];
        for (int j = 0; j < n; ++j) {
            if (mask >> j & 1u) {
                continue;
            }
            phi[j] += weight * (value[mask | (1ull << j)] - value[mask]);
        }
    }
    return phi;
}

namespace {

// One distinct feature on the current root-to-leaf path. `one` is the product
// of "x follows this branch" indicators across the feature's occurrences;
// `zero` is the product of its cover ratios. Covers are positive, so `zero`
// stays positive and the polynomial division below is well defined.
struct PathFactor {
    int feature;
    double one;
    double zero;
};

// Walks one tree and adds the sample's Shapley contributions into phi.
// The path state is the coefficient list of prod_k (zero_k + one_k * z) over
// the distinct features seen so far; per-depth snapshots make sibling
// traversals bit-exact and keep the walker allocation-free once warmed up.
class FastShapWalker {
public:
    void run(const Tree& tree, std::span<const double> x, std::span<double> phi) {
        tree_ = &tree;
        x_ = x;
        phi_ = phi;
        factors_.clear();
        poly_.assign(1, 1.0);
        recurse(0, 0);
    }

private:
    void recurse(int idx, std::size_t depth) {
        const auto& n = tree_->nodes[idx];
        if (n.is_leaf()) {
            accumulate_leaf(n.value);
            return;
        }

        const bool goes_left = x_[n.feature] < n.threshold;
        const int hot = goes_left ? n.left : n.right;
        const int cold = goes_left ? n.right : n.left;

        int existing = -1;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (factors_[i].feature == n.feature) {
                existing = static_cast<int>(i);
                break;
            }
        }
        save(depth);
        const PathFactor saved_factor =
            existing >= 0 ? factors_[existing] : PathFactor{n.feature, 1.0, 1.0};

        for (const int child : {hot, cold}) {
            restore(depth);
            const PathFactor step{n.feature, child == hot ? 1.0 : 0.0,
                                  tree_->nodes[child].cover / n.cover};
            if (existing >= 0) {
                divide(poly_, saved_factor);
                factors_[existing] = {n.feature, saved_factor.one * step.one,
                                      saved_factor.zero * step.zero};
                multiply(poly_, factors_[existing]);
                recurse(child, depth + 1);
                factors_[existing] = saved_factor;
            } else {
                factors_.push_back(step);
                multiply(poly_, step);
                recurse(child, depth + 1);
                factors_.pop_back();
            }
        }
    }

    static void multiply(std::vector<double>& poly, const PathFactor& f) {
        poly.push_back(0.0);
        for (std::size_t t = poly.size() - 1; t > 0; --t) {
            poly[t] = f.zero * poly[t] + f.one * poly[t - 1];
        }
        poly[0] *= f.zero;
    }

    static void divide(std::vector<double>& poly, const PathFactor& f) {
        double carry = 0.0;
        for (std::size_t t = 0; t + 1 < poly.size(); ++t) {
            poly[t] = (poly[t] - f.one * carry) / f.zero;
            carry = poly[t];
        }
        poly.pop_back();
    }

    void accumulate_leaf(double leaf_value) {
        const std::size_t m = factors_.size();
        if (m == 0) {
            return;  // constant tree; contributes to the base value only
        }
        ensure_factorials(m);
        for (const auto& f : factors_) {
            quotient_ = poly_;
            divide(quotient_, f);
            double weighted = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                weighted += factorial_[t] * factorial_[m - 1 - t] / factorial_[m] * quotient_[t];
            }
            phi_[f.feature] += leaf_value * (f.one - f.zero) * weighted;
        }
    }

    void save(std::size_t depth) {
        if (snapshots_.size() <= depth) {
            snapshots_.resize(depth + 1);
        }
        snapshots_[depth] = poly_;
    }

    void restore(std::size_t depth) { poly_ = snapshots_[depth]; }

    void ensure_factorials(std::size_t m) {
        if (factorial_.size() > m) {
            return;
        }
        const std::size_t old = factorial_.empty() ? 1 : factorial_.size();
        if (factorial_.empty()) {
            factorial_.push_back(1.0);
        }
        factorial_.resize(m + 1);
        for (std::size_t i = old; i <= m; ++i) {
            factorial_[i] = factorial_[i - 1] * static_cast<double>(i);
        }
    }

    const Tree* tree_ = nullptr;
    std::span<const double> x_;
    std::span<double> phi_;
    std::vector<PathFactor> factors_;
    std::vector<double> poly_;
    std::vector<double> quotient_;
    std::vector<std::vector<double>> snapshots_;
    std::vector<double> factorial_;
};

}  // namespace

std::vector<double> shap_fast(const TreeEnsemble& model, std::span<const double> x) {
    check_dimension(model, x);
    std::vector<double> phi(model.n_features(), 0.0);
    FastShapWalker walker;
    for (const auto& tree : model.trees()) {
        walker.run(tree, x, phi);
    }
    return phi;
}

ShapMatrix shap_matrix_rows(const TreeEnsemble& model, const LabeledDataset& data,
                            std::span<const std::size_t> rows, int threads) {
    if (data.n_features() != static_cast<std::size_t>(model.n_features())) {
        throw SchemaError("dataset has " + std::to_string(data.n_features()) +
                          " features, model expects " + std::to_string(model.n_features()));
    }
    if (!model.feature_names().empty() && model.feature_names() != data.schema().names()) {
        throw SchemaError("dataset feature names do not match the model's");
    }

    ShapMatrix s;
    s.rows = rows.size();
    s.cols = data.n_features();
    s.values.assign(s.rows * s.cols, 0.0);
    s.base_value = expected_margin(model);
    s.sample_index_map.assign(rows.begin(), rows.end());
    parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
        FastShapWalker walker;
        for (std::size_t i = begin; i < end; ++i) {
            std::span<double> phi{s.values.data() + i * s.cols, s.cols};
            for (const auto& tree : model.trees()) {
                walker.run(tree, data.row(rows[i]), phi);
            }
        }
    });
    return s;
}

ShapMatrix shap_matrix(const TreeEnsemble& model, const LabeledDataset& data, int threads) {
    std::vector<std::size_t> rows(data.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return shap_matrix_rows(model, data, rows, threads);
}

FeatureImportance mean_abs_importance(const ShapMatrix& s) {
    if (s.rows == 0) {
        throw DimensionError("importance needs at least one sample");
    }
    FeatureImportance imp;
    imp.mean_abs.assign(s.cols, 0.0);
    for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
            imp.mean_abs[j] += std::abs(s.at(i, j));
        }
    }
    for (auto& v : imp.mean_abs) {
        v /= static_cast<double>(s.rows);
    }
    imp.ranking.resize(s.cols);
    std::iota(imp.ranking.begin(), imp.ranking.end(), 0);
    std::sort(imp.ranking.begin(), imp.ranking.end(), [&](int a, int b) {
        if (imp.mean_abs[a] != imp.mean_abs[b]) {
            return imp.mean_abs[a] > imp.mean_abs[b];
        }
        return a < b;
    });
    return imp;
}

WaterfallData waterfall_data(const ShapMatrix& s, const LabeledDataset& data, std::size_t row) {
    if (row >= s.rows) {
        throw DimensionError("waterfall row out of range");
    }
    if (s.cols != data.n_features()) {
        throw SchemaError("attribution width does not match dataset");
    }
    WaterfallData wf;
    wf.row = row;
    wf.source_row = s.sample_index_map.at(row);
    wf.base_value = s.base_value;
    wf.margin = s.base_value;
    for (std::size_t j = 0; j < s.cols; ++j) {
        const double phi = s.at(row, j);
        wf.margin += phi;
        wf.entries.push_back(
            {static_cast<int>(j), data.schema().name(j), data.at(wf.source_row, j), phi});
    }
    std::sort(wf.entries.begin(), wf.entries.end(), [](const auto& a, const auto& b) {
        const double la = std::abs(a.attribution);
        const double lb = std::abs(b.attribution);
        if (la != lb) {
            return la > lb;
        }
        return a.feature < b.feature;
    });
    return wf;
}

std::string shap_to_csv(const ShapMatrix& s, const FeatureSchema& schema) {
    if (schema.count() != s.cols) {
        throw SchemaError("schema width does not match attribution matrix");
    }
    std::string out = "# base_value " + format_double(s.base_value) + "\n";
    out += "row";
    for (const auto& n : schema.names()) {
        out += ',';
        out += n;
    }
    out += '\n';
    for (std::size_t i = 0; i < s.rows; ++i) {
        out += std::to_string(s.sample_index_map[i]);
        for (std::size_t j = 0; j < s.cols; ++j) {
            out += ',';
            out += format_double(s.at(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string importance_to_csv(const FeatureImportance& imp, const FeatureSchema& schema) {
    if (schema.count() != imp.mean_abs.size()) {
        throw SchemaError("schema width does not match importance vector");
    }
    std::string out = "rank,feature,mean_abs_shap\n";
    for (std::size_t r = 0; r < imp.ranking.size(); ++r) {
        const int j = imp.ranking[r];
        out += std::to_string(r + 1) + ',' + schema.name(j) + ',' + format_double(imp.mean_abs[j]) +
               '\n';
    }
    return out;
}

std::string waterfall_to_csv(const WaterfallData& wf) {
    std::string out;
    out += "# row " + std::to_string(wf.source_row) + "\n";
    out += "# base_value " + format_double(wf.base_value) + "\n";
    out += "# margin " + format_double(wf.margin) + "\n";
    out += "feature,value,attribution\n";
    for (const auto& e : wf.entries) {
        out += e.name + ',' + format_double(e.value) + ',' + format_double(e.attribution) + '\n';
    }
    return out;
}

}  // namespace advex
