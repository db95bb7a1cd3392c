#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

struct PcapWriterOptions {
    bool nanosecond = false;
    bool big_endian = false;
    std::uint32_t snaplen = 65535;
    std::uint32_t link_type = kLinkTypeEthernet;
    int compression_level = 6;  // 0 stores without compression
};

/// Writes a gzip-compressed classic pcap file.
class PcapGzWriter {
public:
    PcapGzWriter(const std::filesystem::path& path, PcapWriterOptions options = {});
    PcapGzWriter(const PcapGzWriter&) = delete;
    PcapGzWriter& operator=(const PcapGzWriter&) = delete;
    ~PcapGzWriter();

    /// `original_length` defaults to the frame size.
    void write(Timestamp ts, std::span<const std::uint8_t> frame,
               std::optional<std::uint32_t> original_length = std::nullopt);
    /// Record with explicit header fields; `fraction` is in the file's time unit.
    void write_raw(std::uint32_t seconds, std::uint32_t fraction, std::span<const std::uint8_t> frame,
                   std::uint32_t original_length);
    void close();

    std::uint64_t packets_written() const { return packets_; }

private:
    void put(const void* data, std::size_t size);
    void put32(std::uint32_t v);
    void put16(std::uint16_t v);

    void* gz_ = nullptr;
    PcapWriterOptions options_;
    std::uint64_t packets_ = 0;
};

/// Ethernet II frame builders for fixtures and synthetic archives.
namespace frames {

struct Endpoint {
    Ipv4Address ip;
    std::uint16_t port = 0;
};

std::vector<std::uint8_t> tcp(Endpoint src, Endpoint dst, TcpFlagSet flags,
                              std::size_t payload_bytes = 0);
std::vector<std::uint8_t> udp(Endpoint src, Endpoint dst, std::size_t payload_bytes = 0);
std::vector<std::uint8_t> icmp_echo(Ipv4Address src, Ipv4Address dst, std::size_t payload_bytes = 0);
std::vector<std::uint8_t> arp_request(Ipv4Address sender, Ipv4Address target);
std::vector<std::uint8_t> ipv6_udp(std::uint16_t src_port, std::uint16_t dst_port);

}  // namespace frames

}  // namespace telescope
