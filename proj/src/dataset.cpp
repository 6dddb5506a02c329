#include "advex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace advex {

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) {
        throw SchemaError("schema needs at least one feature");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names_) {
        if (n.empty()) {
            throw SchemaError("schema contains an empty feature name");
        }
        if (!seen.insert(n).second) {
            throw SchemaError("duplicate feature name: " + n);
        }
    }
}

FeatureSchema FeatureSchema::packet_features() {
    return FeatureSchema({"frame.len", "udp.dstport", "ip.flags", "tcp.dstport",
                          "ip.ttl", "udp.srcport", "ip.len"});
}

int FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

LabeledDataset::LabeledDataset(FeatureSchema schema, std::vector<double> x_row_major,
                               std::vector<int> y)
    : schema_(std::move(schema)), x_(std::move(x_row_major)), y_(std::move(y)) {
    if (x_.size() != y_.size() * schema_.count()) {
        throw DimensionError("feature matrix size does not match rows x features");
    }
    for (double v : x_) {
        if (!std::isfinite(v)) {
            throw DimensionError("feature values must be finite");
        }
    }
    for (int label : y_) {
        if (label != 0 && label != 1) {
            throw ParseError("labels must be 0 or 1");
        }
    }
}

std::span<const double> LabeledDataset::row(std::size_t i) const {
    if (i >= n_rows()) {
        throw DimensionError("row index out of range");
    }
    return {x_.data() + i * n_features(), n_features()};
}

double LabeledDataset::at(std::size_t i, std::size_t j) const {
    if (i >= n_rows() || j >= n_features()) {
        throw DimensionError("cell index out of range");
    }
    return x_[i * n_features() + j];
}

LabeledDataset parse_csv(std::string_view text, const FeatureSchema& schema,
                         std::string_view origin) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size()) {
                lines.push_back(text.substr(start));
            }
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    if (lines.empty()) {
        throw ParseError("empty CSV: " + std::string(origin));
    }

    auto header = split(trim(lines[0]), ',');
    std::vector<std::string> expected = schema.names();
    expected.emplace_back("label");
    if (header.size() != expected.size()) {
        throw SchemaError("header has " + std::to_string(header.size()) + " columns, expected " +
                          std::to_string(expected.size()) + ": " + std::string(origin));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (std::string_view(trim(header[i])) != expected[i]) {
            throw SchemaError("column " + std::to_string(i + 1) + " is '" + header[i] +
                              "', expected '" + expected[i] + "': " + std::string(origin));
        }
    }

    const std::size_t n_features = schema.count();
    std::vector<double> x;
    std::vector<int> y;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        std::string_view line = trim(lines[li]);
        if (line.empty()) {
            continue;
        }
        const std::size_t row = y.size() + 1;  // 1-based data row for messages
        auto cells = split(line, ',');
        if (cells.size() != n_features + 1) {
            throw SchemaError("row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(n_features + 1));
        }
        for (std::size_t j = 0; j < n_features; ++j) {
            double v = parse_double(trim(cells[j]), "row " + std::to_string(row) + " column " +
                                                        schema.name(j));
            if (!std::isfinite(v)) {
                throw ParseError("row " + std::to_string(row) + ": non-finite value in column " +
                                 schema.name(j));
            }
            x.push_back(v);
        }
        long long label = parse_int(trim(cells[n_features]), "row " + std::to_string(row) + " label");
        if (label != 0 && label != 1) {
            throw ParseError("row " + std::to_string(row) + ": label must be 0 or 1, got " +
                             std::to_string(label));
        }
        y.push_back(static_cast<int>(label));
    }
    return LabeledDataset(schema, std::move(x), std::move(y));
}

LabeledDataset load_csv(const std::string& path, const FeatureSchema& schema) {
    return parse_csv(read_text_file(path), schema, path);
}

std::string to_csv(const LabeledDataset& dataset) {
    std::string out;
    const auto& names = dataset.schema().names();
    for (std::size_t j = 0; j < names.size(); ++j) {
        out += names[j];
        out += ',';
    }
    out += "label\n";
    for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        auto r = dataset.row(i);
        for (double v : r) {
            out += format_double(v);
            out += ',';
        }
        out += dataset.label(i) ? '1' : '0';
        out += '\n';
    }
    return out;
}

void emit_csv(const LabeledDataset& dataset, const std::string& path) {
    write_text_file(path, to_csv(dataset));
}

LabeledDataset select_rows(const LabeledDataset& dataset, std::span<const std::size_t> rows) {
    const std::size_t f = dataset.n_features();
    std::vector<double> x;
    x.reserve(rows.size() * f);
    std::vector<int> y;
    y.reserve(rows.size());
    for (std::size_t src : rows) {
        auto r = dataset.row(src);
        x.insert(x.end(), r.begin(), r.end());
        y.push_back(dataset.label(src));
    }
    return LabeledDataset(dataset.schema(), std::move(x), std::move(y));
}

namespace {

// Fisher-Yates with explicit modulo draws; std::shuffle's output is not
// pinned down by the standard and the split must be reproducible.
void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

SplitResult stratified_split(const LabeledDataset& dataset, double test_fraction,
                             std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0,1)");
    }
    std::vector<std::size_t> class_rows[2];
    for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        class_rows[dataset.label(i)].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (class_rows[c].size() < 2) {
            throw SplitError("class " + std::to_string(c) + " has " +
                             std::to_string(class_rows[c].size()) +
                             " samples; stratified split needs at least 2 per class");
        }
    }

    std::mt19937_64 gen(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (int c = 0; c < 2; ++c) {
        auto rows = class_rows[c];
        seeded_shuffle(rows, gen);
        auto want = static_cast<std::size_t>(
            std::llround(static_cast<double>(rows.size()) * test_fraction));
        want = std::clamp<std::size_t>(want, 1, rows.size() - 1);
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + want);
        train_rows.insert(train_rows.end(), rows.begin() + want, rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());

    return SplitResult{select_rows(dataset, train_rows), select_rows(dataset, test_rows),
                       std::move(train_rows), std::move(test_rows), seed};
}

LabelPartition partition_by_label(const LabeledDataset& dataset) {
    std::vector<std::size_t> benign_rows;
    std::vector<std::size_t> malicious_rows;
    for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        (dataset.label(i) == 0 ? benign_rows : malicious_rows).push_back(i);
    }
    return LabelPartition{select_rows(dataset, benign_rows), select_rows(dataset, malicious_rows),
                          std::move(benign_rows), std::move(malicious_rows)};
}

}  // namespace advex
