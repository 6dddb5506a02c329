#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "advex/dataset.hpp"

namespace advex {

struct PacketRecord {
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_usec = 0;
    std::uint32_t captured_len = 0;  // equals payload.size()
    std::uint32_t original_len = 0;  // as written; may legitimately differ
    std::vector<std::uint8_t> payload;
};

// One Table-style feature row. Ports absent from the packet's transport
// protocol carry the fill value 0 (an impossible ephemeral source port).
struct ExtractedFeatures {
    double frame_len = 0;
    double udp_dstport = 0;
    double ip_flags = 0;  // integer value of the 3 IPv4 flag bits; DF-only = 2, MF-only = 1
    double tcp_dstport = 0;
    double ip_ttl = 0;
    double udp_srcport = 0;
    double ip_len = 0;  // the IPv4 total-length field, not the capture length

    std::array<double, 7> to_row() const {
        return {frame_len, udp_dstport, ip_flags, tcp_dstport, ip_ttl, udp_srcport, ip_len};
    }
};

struct SkipCounters {
    std::size_t non_ipv4 = 0;  // ARP and other ethertypes
    std::size_t vlan = 0;
    std::size_t ipv6 = 0;
    std::size_t malformed = 0;

    std::size_t total() const { return non_ipv4 + vlan + ipv6 + malformed; }
};

// Classic pcap only (microsecond magic, either byte order), Ethernet link type.
class PcapReader {
public:
    explicit PcapReader(const std::string& path);

    // Next record in file order; nullopt at a clean end of file.
    std::optional<PacketRecord> next();

private:
    std::uint32_t read_u32(const unsigned char* p) const;

    std::ifstream in_;
    std::string path_;
    bool swapped_ = false;
    std::size_t record_index_ = 0;  // 1-based in error messages
};

std::vector<PacketRecord> read_pcap(const std::string& path);

// nullopt means the frame was skipped; the matching counter is incremented.
std::optional<ExtractedFeatures> extract_features(const PacketRecord& record, SkipCounters& skips);

struct PcapExtractResult {
    LabeledDataset dataset;
    SkipCounters skips;
    std::size_t packets_in = 0;
};

PcapExtractResult pcap_to_dataset(const std::vector<std::string>& paths, int label);

}  // namespace advex
