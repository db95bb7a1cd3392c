#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "telescope/core_model.hpp"
#include "telescope/pcap_writer.hpp"

namespace fixtures {

using telescope::Timestamp;

class TempDir {
public:
    explicit TempDir(std::string_view tag = "t");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// One record to write plus the record parse_headers should produce for it.
struct FixturePacket {
    std::uint32_t seconds = 0;
    std::uint32_t nanos = 0;  // written as nanos/1000 in microsecond files
    std::vector<std::uint8_t> frame;
    std::uint32_t original_length = 0;
    telescope::PacketRecord expected;
};

/// Mixed traffic: TCP with random flags, UDP, ICMP, VLAN-tagged and
/// IP-options frames, ARP, IPv6, truncated transport headers and
/// non-first fragments. Timestamps are non-decreasing from `start_seconds`.
std::vector<FixturePacket> random_packets(std::mt19937_64& rng, std::size_t count,
                                          std::uint32_t start_seconds);

void write_capture(const std::filesystem::path& path, const std::vector<FixturePacket>& packets,
                   telescope::PcapWriterOptions options = {});

/// Ethernet + IPv4 (with `options` bytes, a multiple of 4) + UDP.
std::vector<std::uint8_t> udp_with_ip_options(telescope::Ipv4Address src, telescope::Ipv4Address dst,
                                              std::uint16_t sport, std::uint16_t dport,
                                              std::vector<std::uint8_t> options);
/// Ethernet + one or two 802.1Q tags + IPv4 + TCP.
std::vector<std::uint8_t> vlan_tcp(int tags, telescope::Ipv4Address src, telescope::Ipv4Address dst,
                                   std::uint16_t sport, std::uint16_t dport, std::uint8_t flags);

std::vector<std::uint8_t> from_hex(std::string_view hex);
std::string read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::string_view data);
std::string gunzip(const std::filesystem::path& path);
void gzip_to(const std::filesystem::path& path, std::string_view data);

telescope::Ipv4Address ip(std::string_view dotted);

}  // namespace fixtures
