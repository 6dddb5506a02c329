#pragma once

#include <array>
#include <cstdint>

#include "advex/dataset.hpp"

namespace advex {

// Bounded integer triangular distribution: values in [lo, hi], peak at mode.
struct TriRange {
    double lo = 0;
    double hi = 0;
    double mode = 0;
};

// Synthetic packet-feature generator with one planted dominant feature.
// Malicious rows draw the dominant feature from a low range (small scanning
// and keep-alive style frames), benign rows from a high range; the remaining
// features overlap heavily across classes.
struct SynthConfig {
    std::size_t n_samples = 20000;
    double malicious_fraction = 0.25;
    int dominant_feature = 0;  // frame.len in the default schema
    // 1.0 keeps the configured separation; lower values slide the malicious
    // dominant range toward the benign one.
    double signal_strength = 1.0;
    std::uint64_t seed = 42;
    std::array<TriRange, 7> benign{{
        {120, 1514, 512},   // frame.len
        {0, 65535, 500},    // udp.dstport
        {0, 2, 2},          // ip.flags
        {0, 65535, 443},    // tcp.dstport
        {32, 255, 64},      // ip.ttl
        {0, 65535, 32768},  // udp.srcport
        {28, 1500, 498},    // ip.len
    }};
    std::array<TriRange, 7> malicious{{
        {40, 110, 60},
        {0, 65535, 800},
        {0, 2, 0},
        {0, 65535, 80},
        {32, 255, 64},
        {0, 65535, 32768},
        {28, 1500, 498},
    }};
};

LabeledDataset generate(const SynthConfig& config);

}  // namespace advex
