#include "advex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace advex {

namespace {

// Per-feature domain caps for the packet schema (frame length, ports, flag
// bits, TTL, IP total length).
constexpr std::array<double, 7> kDomainLo = {1, 0, 0, 0, 0, 0, 0};
constexpr std::array<double, 7> kDomainHi = {262144, 65535, 7, 65535, 255, 65535, 65535};

double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Inverse-CDF triangular draw rounded to an integer value.
double draw_tri(const TriRange& r, std::mt19937_64& gen) {
    if (r.hi <= r.lo) {
        return r.lo;
    }
    const double u = uniform01(gen);
    const double span = r.hi - r.lo;
    const double cut = (r.mode - r.lo) / span;
    double v;
    if (u < cut) {
        v = r.lo + std::sqrt(u * span * (r.mode - r.lo));
    } else {
        v = r.hi - std::sqrt((1.0 - u) * span * (r.hi - r.mode));
    }
    return std::clamp(std::round(v), r.lo, r.hi);
}

void validate_range(const TriRange& r, std::size_t feature, const FeatureSchema& schema) {
    if (!(r.lo <= r.mode && r.mode <= r.hi)) {
        throw ConfigError("range for " + schema.name(feature) + " needs lo <= mode <= hi");
    }
    if (r.lo < kDomainLo[feature] || r.hi > kDomainHi[feature]) {
        throw ConfigError("range for " + schema.name(feature) + " leaves the field domain [" +
                          format_double(kDomainLo[feature]) + ", " +
                          format_double(kDomainHi[feature]) + "]");
    }
}

}  // namespace

LabeledDataset generate(const SynthConfig& config) {
    const FeatureSchema schema = FeatureSchema::packet_features();
    if (config.n_samples < 1) {
        throw ConfigError("n_samples must be >= 1");
    }
    if (!(config.malicious_fraction > 0.0 && config.malicious_fraction < 1.0)) {
        throw ConfigError("malicious_fraction must be in (0,1)");
    }
    if (config.dominant_feature < 0 || config.dominant_feature >= 7) {
        throw ConfigError("dominant_feature index out of range");
    }
    if (!(config.signal_strength >= 0.0 && config.signal_strength <= 1.0)) {
        throw ConfigError("signal_strength must be in [0,1]");
    }
    for (std::size_t j = 0; j < 7; ++j) {
        validate_range(config.benign[j], j, schema);
        validate_range(config.malicious[j], j, schema);
    }

    // Weakening the signal slides the malicious dominant range toward the
    // benign one, creating overlap.
    auto malicious_ranges = config.malicious;
    {
        const std::size_t d = static_cast<std::size_t>(config.dominant_feature);
        const TriRange& b = config.benign[d];
        TriRange& m = malicious_ranges[d];
        const double blend = 1.0 - config.signal_strength;
        m.hi = std::round(m.hi + blend * (b.hi - m.hi));
        m.mode = std::round(std::min(m.mode + blend * (b.mode - m.mode), m.hi));
    }

    const auto n_malicious = static_cast<std::size_t>(std::llround(
        static_cast<double>(config.n_samples) * config.malicious_fraction));
    if (n_malicious == 0 || n_malicious >= config.n_samples) {
        throw ConfigError("malicious_fraction leaves one class empty at this sample count");
    }

    std::mt19937_64 gen(config.seed);
    std::vector<int> y(config.n_samples, 0);
    std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_malicious), 1);
    for (std::size_t i = y.size(); i > 1; --i) {
        std::swap(y[i - 1], y[gen() % i]);
    }

    std::vector<double> x;
    x.reserve(config.n_samples * 7);
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        const auto& ranges = y[i] == 1 ? malicious_ranges : config.benign;
        for (std::size_t j = 0; j < 7; ++j) {
            x.push_back(draw_tri(ranges[j], gen));
        }
    }
    return LabeledDataset(schema, std::move(x), std::move(y));
}

}  // namespace advex
