#include "advex/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace advex {

double sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

TreeEnsemble::TreeEnsemble(std::vector<Tree> trees, double base_score, int n_features,
                           TrainConfig config, std::vector<std::string> feature_names)
    : trees_(std::move(trees)),
      base_score_(base_score),
      n_features_(n_features),
      config_(config),
      feature_names_(std::move(feature_names)) {
    if (trees_.empty()) {
        throw DimensionError("ensemble needs at least one tree");
    }
    if (n_features_ < 1) {
        throw DimensionError("ensemble needs at least one feature");
    }
    if (!feature_names_.empty() && feature_names_.size() != static_cast<std::size_t>(n_features_)) {
        throw SchemaError("feature name count does not match n_features");
    }
    for (const auto& tree : trees_) {
        if (tree.nodes.empty()) {
            throw DimensionError("tree has no nodes");
        }
        for (const auto& node : tree.nodes) {
            if (node.cover <= 0.0) {
                throw DimensionError("node cover must be positive");
            }
            if (node.is_leaf()) {
                continue;
            }
            if (node.feature >= n_features_) {
                throw DimensionError("node feature index exceeds n_features");
            }
            const auto& l = tree.nodes.at(node.left);
            const auto& r = tree.nodes.at(node.right);
            if (std::abs(l.cover + r.cover - node.cover) > 1e-6 * node.cover) {
                throw DimensionError("child covers do not sum to parent cover");
            }
        }
    }
}

namespace {

int route(const Tree& tree, std::span<const double> x) {
    int idx = 0;
    while (!tree.nodes[idx].is_leaf()) {
        const auto& n = tree.nodes[idx];
        idx = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return idx;
}

}  // namespace

double TreeEnsemble::predict_margin(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(n_features_)) {
        throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                             std::to_string(n_features_));
    }
    double margin = base_score_;
    for (const auto& tree : trees_) {
        margin += tree.nodes[route(tree, x)].value;
    }
    return margin;
}

double TreeEnsemble::predict_proba(std::span<const double> x) const {
    return sigmoid(predict_margin(x));
}

int TreeEnsemble::predict_class(std::span<const double> x, double threshold) const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("classification threshold must be in (0,1)");
    }
    return predict_margin(x) >= logit(threshold) ? 1 : 0;
}

namespace {

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool found = false;
};

struct Builder {
    const LabeledDataset& data;
    const TrainConfig& cfg;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    Tree tree;

    // rows reaching the node, consumed and re-partitioned in place
    int build(std::vector<std::size_t>& rows, int depth) {
        double g_sum = 0.0;
        double h_sum = 0.0;
        for (std::size_t r : rows) {
            g_sum += grad[r];
            h_sum += hess[r];
        }
        const double cover = static_cast<double>(rows.size());

        SplitChoice best;
        if (depth < cfg.max_depth && rows.size() >= 2) {
            best = find_split(rows, g_sum, h_sum);
        }

        int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (!best.found) {
            auto& leaf = tree.nodes[idx];
            leaf.cover = cover;
            leaf.value = -g_sum / (h_sum + cfg.l2_leaf_penalty) * cfg.learning_rate;
            return idx;
        }

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            (data.at(r, best.feature) < best.threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        int left = build(left_rows, depth + 1);
        int right = build(right_rows, depth + 1);
        auto& node = tree.nodes[idx];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        node.cover = cover;
        return idx;
    }

    SplitChoice find_split(const std::vector<std::size_t>& rows, double g_sum, double h_sum) {
        SplitChoice best;
        const double lambda = cfg.l2_leaf_penalty;
        const double parent_score = g_sum * g_sum / (h_sum + lambda);
        std::vector<std::pair<double, std::size_t>> order(rows.size());

        for (std::size_t f = 0; f < data.n_features(); ++f) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                order[i] = {data.at(rows[i], f), rows[i]};
            }
            std::sort(order.begin(), order.end());
            if (order.front().first == order.back().first) {
                continue;  // constant feature at this node
            }
            double g_left = 0.0;
            double h_left = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                g_left += grad[order[i].second];
                h_left += hess[order[i].second];
                if (order[i].first == order[i + 1].first) {
                    continue;
                }
                const double n_left = static_cast<double>(i + 1);
                const double n_right = static_cast<double>(order.size() - i - 1);
                if (n_left < cfg.min_child_cover || n_right < cfg.min_child_cover) {
                    continue;
                }
                const double g_right = g_sum - g_left;
                const double h_right = h_sum - h_left;
                const double gain = 0.5 * (g_left * g_left / (h_left + lambda) +
                                           g_right * g_right / (h_right + lambda) - parent_score);
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = (order[i].first + order[i + 1].first) / 2.0;
                    best.found = true;
                }
            }
        }
        return best;
    }
};

}  // namespace

TreeEnsemble train(const LabeledDataset& data, const TrainConfig& config) {
    if (config.n_rounds < 1 || config.max_depth < 1) {
        throw ConfigError("n_rounds and max_depth must be >= 1");
    }
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
        throw ConfigError("learning_rate must be in (0,1]");
    }
    if (config.l2_leaf_penalty < 0.0 || config.min_child_cover < 0.0) {
        throw ConfigError("penalties must be non-negative");
    }
    const std::size_t n = data.n_rows();
    if (n < 2) {
        throw TrainError("training needs at least 2 samples");
    }
    const auto positives = static_cast<std::size_t>(
        std::count(data.labels().begin(), data.labels().end(), 1));
    if (positives == 0 || positives == n) {
        throw TrainError("training data contains a single class");
    }

    const double base_score = logit(static_cast<double>(positives) / static_cast<double>(n));
    std::vector<double> margin(n, base_score);
    std::vector<double> grad(n);
    std::vector<double> hess(n);
    std::vector<Tree> trees;
    trees.reserve(config.n_rounds);

    for (int round = 0; round < config.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = p - static_cast<double>(data.label(i));
            hess[i] = p * (1.0 - p);
        }
        Builder builder{data, config, grad, hess, Tree{}};
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        builder.build(rows, 0);
        Tree tree = std::move(builder.tree);
        for (std::size_t i = 0; i < n; ++i) {
            margin[i] += tree.nodes[route(tree, data.row(i))].value;
        }
        trees.push_back(std::move(tree));
    }

    return TreeEnsemble(std::move(trees), base_score, static_cast<int>(data.n_features()), config,
                        data.schema().names());
}

std::vector<double> predict_margins(const TreeEnsemble& model, const LabeledDataset& data,
                                    int threads) {
    std::vector<double> out(data.n_rows());
    parallel_for(data.n_rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = model.predict_margin(data.row(i));
        }
    });
    return out;
}

std::vector<int> predict_classes(const TreeEnsemble& model, const LabeledDataset& data,
                                 double threshold, int threads) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("classification threshold must be in (0,1)");
    }
    const double cut = logit(threshold);
    auto margins = predict_margins(model, data, threads);
    std::vector<int> out(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) {
        out[i] = margins[i] >= cut ? 1 : 0;
    }
    return out;
}

namespace {
constexpr std::string_view kModelMagic = "advex-gbt-model";
}

std::string serialize_model(const TreeEnsemble& model) {
    std::string out;
    out += kModelMagic;
    out += " v1\n";
    const auto& cfg = model.config();
    out += "config rounds " + std::to_string(cfg.n_rounds) + " depth " +
           std::to_string(cfg.max_depth) + " learning_rate " + format_double(cfg.learning_rate) +
           " min_child_cover " + format_double(cfg.min_child_cover) + " l2 " +
           format_double(cfg.l2_leaf_penalty) + " seed " + std::to_string(cfg.seed) + "\n";
    out += "n_features " + std::to_string(model.n_features()) + "\n";
    if (!model.feature_names().empty()) {
        out += "features ";
        for (std::size_t i = 0; i < model.feature_names().size(); ++i) {
            if (i) {
                out += ',';
            }
            out += model.feature_names()[i];
        }
        out += '\n';
    }
    out += "base_score " + format_double(model.base_score()) + "\n";
    out += "n_trees " + std::to_string(model.trees().size()) + "\n";
    for (std::size_t t = 0; t < model.trees().size(); ++t) {
        const auto& tree = model.trees()[t];
        out += "tree " + std::to_string(t) + " " + std::to_string(tree.nodes.size()) + "\n";
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                out += "leaf " + format_double(n.value) + " " + format_double(n.cover) + "\n";
            } else {
                out += "split " + std::to_string(n.feature) + " " + format_double(n.threshold) +
                       " " + std::to_string(n.left) + " " + std::to_string(n.right) + " " +
                       format_double(n.cover) + "\n";
            }
        }
    }
    out += "end\n";
    return out;
}

namespace {

struct LineReader {
    std::vector<std::string> lines;
    std::size_t pos = 0;

    explicit LineReader(std::string_view text) {
        for (auto& l : split(text, '\n')) {
            lines.push_back(std::string(trim(l)));
        }
    }

    std::string next(std::string_view what) {
        while (pos < lines.size() && lines[pos].empty()) {
            ++pos;
        }
        if (pos >= lines.size()) {
            throw ParseError("corrupt model file: missing " + std::string(what));
        }
        return lines[pos++];
    }
};

std::vector<std::string> expect_tokens(const std::string& line, std::string_view keyword,
                                       std::size_t count) {
    auto tokens = split(line, ' ');
    if (tokens.empty() || tokens[0] != keyword || tokens.size() != count) {
        throw ParseError("corrupt model file: expected '" + std::string(keyword) + "' line, got '" +
                         line + "'");
    }
    return tokens;
}

}  // namespace

TreeEnsemble deserialize_model(std::string_view text) {
    if (trim(text).empty()) {
        throw ParseError("corrupt model file: empty");
    }
    LineReader reader(text);

    auto header = split(reader.next("header"), ' ');
    if (header.size() != 2 || header[0] != kModelMagic) {
        throw ParseError("corrupt model file: bad header");
    }
    if (header[1] != "v1") {
        throw ModelVersionError("unsupported model version '" + header[1] + "', expected v1");
    }

    auto cfg_tok = expect_tokens(reader.next("config"), "config", 13);
    TrainConfig cfg;
    cfg.n_rounds = static_cast<int>(parse_int(cfg_tok[2], "config rounds"));
    cfg.max_depth = static_cast<int>(parse_int(cfg_tok[4], "config depth"));
    cfg.learning_rate = parse_double(cfg_tok[6], "config learning_rate");
    cfg.min_child_cover = parse_double(cfg_tok[8], "config min_child_cover");
    cfg.l2_leaf_penalty = parse_double(cfg_tok[10], "config l2");
    cfg.seed = static_cast<std::uint64_t>(parse_int(cfg_tok[12], "config seed"));

    auto nf_tok = expect_tokens(reader.next("n_features"), "n_features", 2);
    const int n_features = static_cast<int>(parse_int(nf_tok[1], "n_features"));

    std::string line = reader.next("base_score");
    std::vector<std::string> feature_names;
    if (line.starts_with("features ")) {
        feature_names = split(std::string_view(line).substr(9), ',');
        line = reader.next("base_score");
    }
    auto base_tok = expect_tokens(line, "base_score", 2);
    const double base_score = parse_double(base_tok[1], "base_score");

    auto nt_tok = expect_tokens(reader.next("n_trees"), "n_trees", 2);
    const auto n_trees = parse_int(nt_tok[1], "n_trees");
    if (n_trees < 1) {
        throw ParseError("corrupt model file: n_trees < 1");
    }

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(n_trees));
    for (long long t = 0; t < n_trees; ++t) {
        auto tree_tok = expect_tokens(reader.next("tree"), "tree", 3);
        if (parse_int(tree_tok[1], "tree index") != t) {
            throw ParseError("corrupt model file: tree index out of order");
        }
        const auto n_nodes = parse_int(tree_tok[2], "tree node count");
        Tree tree;
        tree.nodes.reserve(static_cast<std::size_t>(n_nodes));
        for (long long k = 0; k < n_nodes; ++k) {
            auto node_line = reader.next("node");
            auto tok = split(node_line, ' ');
            TreeNode node;
            if (!tok.empty() && tok[0] == "leaf" && tok.size() == 3) {
                node.value = parse_double(tok[1], "leaf value");
                node.cover = parse_double(tok[2], "leaf cover");
            } else if (!tok.empty() && tok[0] == "split" && tok.size() == 6) {
                node.feature = static_cast<int>(parse_int(tok[1], "split feature"));
                node.threshold = parse_double(tok[2], "split threshold");
                node.left = static_cast<int>(parse_int(tok[3], "split left"));
                node.right = static_cast<int>(parse_int(tok[4], "split right"));
                node.cover = parse_double(tok[5], "split cover");
                if (node.left < 0 || node.right < 0 || node.left >= n_nodes ||
                    node.right >= n_nodes) {
                    throw ParseError("corrupt model file: child index out of range");
                }
            } else {
                throw ParseError("corrupt model file: bad node line '" + node_line + "'");
            }
            tree.nodes.push_back(node);
        }
        trees.push_back(std::move(tree));
    }
    if (reader.next("end") != "end") {
        throw ParseError("corrupt model file: missing end marker");
    }

    return TreeEnsemble(std::move(trees), base_score, n_features, cfg, std::move(feature_names));
}

void save_model(const TreeEnsemble& model, const std::string& path) {
    write_text_file(path, serialize_model(model));
}

TreeEnsemble load_model(const std::string& path) {
    return deserialize_model(read_text_file(path));
}

}  // namespace advex
