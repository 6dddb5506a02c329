#include "advex/pcap.hpp"

namespace advex {

namespace {

constexpr std::uint32_t kMagicNative = 0xA1B2C3D4;   // microsecond pcap, file-endian
constexpr std::uint32_t kMagicSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::uint32_t kMaxRecordLen = 0x0FFFFFFF;

std::uint32_t load_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t load_be32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[3]) | static_cast<std::uint32_t>(p[2]) << 8 |
           static_cast<std::uint32_t>(p[1]) << 16 | static_cast<std::uint32_t>(p[0]) << 24;
}

std::uint16_t load_be16(const unsigned char* p) {
    return static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[0]) << 8 |
                                      static_cast<std::uint32_t>(p[1]));
}

}  // namespace

std::uint32_t PcapReader::read_u32(const unsigned char* p) const {
    return swapped_ ? load_be32(p) : load_le32(p);
}

PcapReader::PcapReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) {
        throw IoError("cannot open pcap file: " + path);
    }
    unsigned char header[kGlobalHeaderLen];
    in_.read(reinterpret_cast<char*>(header), kGlobalHeaderLen);
    if (static_cast<std::size_t>(in_.gcount()) != kGlobalHeaderLen) {
        throw PcapFormatError(path + ": shorter than a pcap global header");
    }
    const std::uint32_t magic = load_le32(header);
    if (magic == kMagicNative) {
        swapped_ = false;
    } else if (magic == kMagicSwapped) {
        swapped_ = true;
    } else {
        throw PcapFormatError(path + ": unsupported capture format (magic mismatch)");
    }
    const std::uint32_t link_type = read_u32(header + 20);
    if (link_type != kLinkEthernet) {
        throw PcapFormatError(path + ": unsupported link type " + std::to_string(link_type) +
                              ", only Ethernet is handled");
    }
}

std::optional<PacketRecord> PcapReader::next() {
    unsigned char header[kRecordHeaderLen];
    in_.read(reinterpret_cast<char*>(header), kRecordHeaderLen);
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) {
        return std::nullopt;
    }
    ++record_index_;
    if (got != kRecordHeaderLen) {
        throw PcapTruncationError(path_ + ": record " + std::to_string(record_index_) +
                                  " truncated inside its header");
    }
    PacketRecord rec;
    rec.ts_sec = read_u32(header);
    rec.ts_usec = read_u32(header + 4);
    rec.captured_len = read_u32(header + 8);
    rec.original_len = read_u32(header + 12);
    if (rec.captured_len > kMaxRecordLen) {
        throw PcapFormatError(path_ + ": record " + std::to_string(record_index_) +
                              " has an implausible capture length");
    }
    rec.payload.resize(rec.captured_len);
    in_.read(reinterpret_cast<char*>(rec.payload.data()), rec.captured_len);
    if (static_cast<std::size_t>(in_.gcount()) != rec.captured_len) {
        throw PcapTruncationError(path_ + ": record " + std::to_string(record_index_) +
                                  " truncated inside its payload");
    }
    return rec;
}

std::vector<PacketRecord> read_pcap(const std::string& path) {
    PcapReader reader(path);
    std::vector<PacketRecord> out;
    while (auto rec = reader.next()) {
        out.push_back(std::move(*rec));
    }
    return out;
}

std::optional<ExtractedFeatures> extract_features(const PacketRecord& record,
                                                  SkipCounters& skips) {
    constexpr std::size_t kEthLen = 14;
    constexpr std::uint16_t kEtherIpv4 = 0x0800;
    constexpr std::uint16_t kEtherIpv6 = 0x86DD;
    constexpr std::uint16_t kEtherVlan = 0x8100;
    constexpr std::uint16_t kEtherQinQ = 0x88A8;

    const auto& p = record.payload;
    if (p.size() < kEthLen) {
        ++skips.malformed;
        return std::nullopt;
    }
    const std::uint16_t ethertype = load_be16(p.data() + 12);
    if (ethertype == kEtherVlan || ethertype == kEtherQinQ) {
        ++skips.vlan;
        return std::nullopt;
    }
    if (ethertype == kEtherIpv6) {
        ++skips.ipv6;
        return std::nullopt;
    }
    if (ethertype != kEtherIpv4) {
        ++skips.non_ipv4;
        return std::nullopt;
    }

    if (p.size() < kEthLen + 20) {
        ++skips.malformed;
        return std::nullopt;
    }
    const unsigned char* ip = p.data() + kEthLen;
    const unsigned version = ip[0] >> 4;
    const unsigned ihl = ip[0] & 0x0F;
    if (version != 4 || ihl < 5 || kEthLen + ihl * 4 > p.size()) {
        ++skips.malformed;
        return std::nullopt;
    }

    ExtractedFeatures f;
    f.frame_len = static_cast<double>(record.captured_len);
    f.ip_len = static_cast<double>(load_be16(ip + 2));
    f.ip_flags = static_cast<double>(ip[6] >> 5);
    f.ip_ttl = static_cast<double>(ip[8]);

    const unsigned proto = ip[9];
    const std::size_t segment = kEthLen + ihl * 4;
    if (proto == 6) {  // TCP: only the destination port feeds a feature
        if (segment + 4 > p.size()) {
            ++skips.malformed;
            return std::nullopt;
        }
        f.tcp_dstport = static_cast<double>(load_be16(p.data() + segment + 2));
    } else if (proto == 17) {  // UDP
        if (segment + 4 > p.size()) {
            ++skips.malformed;
            return std::nullopt;
        }
        f.udp_srcport = static_cast<double>(load_be16(p.data() + segment));
        f.udp_dstport = static_cast<double>(load_be16(p.data() + segment + 2));
    }
    // other IP protocols keep all port fields at the fill value
    return f;
}

PcapExtractResult pcap_to_dataset(const std::vector<std::string>& paths, int label) {
    if (label != 0 && label != 1) {
        throw ConfigError("label must be 0 or 1");
    }
    std::vector<double> x;
    std::vector<int> y;
    SkipCounters skips;
    std::size_t packets = 0;
    for (const auto& path : paths) {
        PcapReader reader(path);
        while (auto rec = reader.next()) {
            ++packets;
            if (auto features = extract_features(*rec, skips)) {
                for (double v : features->to_row()) {
                    x.push_back(v);
                }
                y.push_back(label);
            }
        }
    }
    return PcapExtractResult{
        LabeledDataset(FeatureSchema::packet_features(), std::move(x), std::move(y)), skips,
        packets};
}

}  // namespace advex
