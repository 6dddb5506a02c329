#pragma once

// Shared fixture builders for the test suites: in-memory pcap files, small
// hand-built trees and random ensembles with consistent covers.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "advex/dataset.hpp"
#include "advex/gbt.hpp"

namespace testutil {

// --- pcap fixture bytes ------------------------------------------------------

inline void put_u32(std::string& out, std::uint32_t v, bool big_endian) {
    if (big_endian) {
        out += static_cast<char>(v >> 24);
        out += static_cast<char>(v >> 16);
        out += static_cast<char>(v >> 8);
        out += static_cast<char>(v);
    } else {
        out += static_cast<char>(v);
        out += static_cast<char>(v >> 8);
        out += static_cast<char>(v >> 16);
        out += static_cast<char>(v >> 24);
    }
}

inline void put_u16be(std::string& out, std::uint16_t v) {
    out += static_cast<char>(v >> 8);
    out += static_cast<char>(v);
}

inline std::string pcap_global_header(bool big_endian) {
    std::string out;
    put_u32(out, 0xA1B2C3D4, big_endian);  // microsecond magic
    if (big_endian) {
        put_u16be(out, 2);
        put_u16be(out, 4);
    } else {
        out += '\x02';
        out += '\x00';
        out += '\x04';
        out += '\x00';
    }
    put_u32(out, 0, big_endian);       // thiszone
    put_u32(out, 0, big_endian);       // sigfigs
    put_u32(out, 65535, big_endian);   // snaplen
    put_u32(out, 1, big_endian);       // linktype: Ethernet
    return out;
}

inline std::string pcap_record(const std::string& frame, std::uint32_t ts_sec,
                               std::uint32_t ts_usec, bool big_endian) {
    std::string out;
    put_u32(out, ts_sec, big_endian);
    put_u32(out, ts_usec, big_endian);
    put_u32(out, static_cast<std::uint32_t>(frame.size()), big_endian);
    put_u32(out, static_cast<std::uint32_t>(frame.size()), big_endian);
    out += frame;
    return out;
}

inline std::string ethernet_header(std::uint16_t ethertype) {
    std::string out(12, '\x02');  // locally administered dummy MACs
    put_u16be(out, ethertype);
    return out;
}

struct Ipv4Spec {
    std::uint16_t total_len = 40;
    std::uint8_t flags = 0;  // 3-bit value; DF = 2, MF = 1
    std::uint8_t ttl = 64;
    std::uint8_t protocol = 6;
};

inline std::string ipv4_header(const Ipv4Spec& s) {
    std::string out;
    out += '\x45';  // version 4, IHL 5
    out += '\x00';
    put_u16be(out, s.total_len);
    put_u16be(out, 1);  // identification
    put_u16be(out, static_cast<std::uint16_t>(s.flags << 13));
    out += static_cast<char>(s.ttl);
    out += static_cast<char>(s.protocol);
    put_u16be(out, 0);  // checksum not validated
    out += "\xc0\xa8\x01\x0a";
    out += "\xc0\xa8\x01\x14";
    return out;
}

// 60-byte TCP SYN to port 80, TTL 64, DF set, IP total length 40.
// Expected feature row: [60, 0, 2, 80, 64, 0, 40].
inline std::string tcp_syn_frame() {
    std::string out = ethernet_header(0x0800);
    out += ipv4_header({40, 2, 64, 6});
    put_u16be(out, 45000);  // src port
    put_u16be(out, 80);     // dst port
    put_u32(out, 0, true);  // seq
    put_u32(out, 0, true);  // ack
    out += '\x50';          // data offset 5
    out += '\x02';          // SYN
    put_u16be(out, 64240);  // window
    put_u16be(out, 0);      // checksum
    put_u16be(out, 0);      // urgent
    out.append(6, '\x00');  // Ethernet padding to 60 bytes
    return out;
}

// 46-byte UDP datagram 1000 -> 53, TTL 128, no IP flags, total length 32.
// Expected feature row: [46, 53, 0, 0, 128, 1000, 32].
inline std::string udp_dns_frame() {
    std::string out = ethernet_header(0x0800);
    out += ipv4_header({32, 0, 128, 17});
    put_u16be(out, 1000);  // src port
    put_u16be(out, 53);    // dst port
    put_u16be(out, 12);    // udp length
    put_u16be(out, 0);     // checksum
    out += "abcd";
    return out;
}

// Minimal ARP request; 42 bytes, skipped as non-IPv4.
inline std::string arp_frame() {
    std::string out = ethernet_header(0x0806);
    out.append(28, '\x01');
    return out;
}

// --- datasets ----------------------------------------------------------------

inline advex::LabeledDataset tiny_dataset(const std::vector<std::vector<double>>& rows,
                                          const std::vector<int>& labels,
                                          advex::FeatureSchema schema =
                                              advex::FeatureSchema::packet_features()) {
    std::vector<double> x;
    for (const auto& r : rows) {
        x.insert(x.end(), r.begin(), r.end());
    }
    return advex::LabeledDataset(std::move(schema), std::move(x), labels);
}

// --- hand-built and random ensembles ------------------------------------------

inline advex::Tree leaf_tree(double value, double cover) {
    advex::Tree t;
    advex::TreeNode leaf;
    leaf.value = value;
    leaf.cover = cover;
    t.nodes.push_back(leaf);
    return t;
}

// Random tree with consistent covers: cover mass is split recursively.
inline advex::Tree random_tree(std::mt19937_64& gen, int n_features, int max_depth) {
    advex::Tree tree;
    auto rnd = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    // returns node index
    auto build = [&](auto&& self, int depth, double cover) -> int {
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const bool make_leaf = depth >= max_depth || rnd() < 0.25 || cover < 2.0;
        if (make_leaf) {
            tree.nodes[idx].value = rnd() * 4.0 - 2.0;
            tree.nodes[idx].cover = cover;
            return idx;
        }
        const double frac = 0.2 + 0.6 * rnd();
        const int left = self(self, depth + 1, cover * frac);
        const int right = self(self, depth + 1, cover * (1.0 - frac));
        auto& n = tree.nodes[idx];
        n.feature = static_cast<int>(gen() % static_cast<std::uint64_t>(n_features));
        n.threshold = rnd() * 10.0;
        n.left = left;
        n.right = right;
        n.cover = tree.nodes[left].cover + tree.nodes[right].cover;
        return idx;
    };
    build(build, 0, 1000.0);
    return tree;
}

inline advex::TreeEnsemble random_ensemble(std::uint64_t seed, int n_features, int n_trees,
                                           int max_depth) {
    std::mt19937_64 gen(seed);
    std::vector<advex::Tree> trees;
    trees.reserve(n_trees);
    for (int t = 0; t < n_trees; ++t) {
        trees.push_back(random_tree(gen, n_features, max_depth));
    }
    const double base = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
    return advex::TreeEnsemble(std::move(trees), base, n_features, advex::TrainConfig{});
}

inline std::vector<double> random_point(std::mt19937_64& gen, int n_features) {
    std::vector<double> x(n_features);
    for (auto& v : x) {
        v = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 10.0;
    }
    return x;
}

}  // namespace testutil
