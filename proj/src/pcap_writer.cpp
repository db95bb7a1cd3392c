#include "telescope/pcap_writer.hpp"

#include <zlib.h>

#include <algorithm>

#include <fmt/format.h>

#include "telescope/errors.hpp"

namespace telescope {

PcapGzWriter::PcapGzWriter(const std::filesystem::path& path, PcapWriterOptions options)
    : options_(options) {
    const auto mode = fmt::format("wb{}", std::clamp(options.compression_level, 0, 9));
    gz_ = gzopen(path.c_str(), mode.c_str());
    if (gz_ == nullptr) throw IoError("cannot create " + path.string());
    gzbuffer(static_cast<gzFile>(gz_), 256 * 1024);
    put32(options.nanosecond ? 0xa1b23c4d : 0xa1b2c3d4);
    put16(2);
    put16(4);
    put32(0);
    put32(0);
    put32(options.snaplen);
    put32(options.link_type);
}

PcapGzWriter::~PcapGzWriter() {
    if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
}

void PcapGzWriter::close() {
    if (gz_ == nullptr) return;
    const int rc = gzclose(static_cast<gzFile>(gz_));
    gz_ = nullptr;
    if (rc != Z_OK) throw IoError("gzclose failed");
}

void PcapGzWriter::put(const void* data, std::size_t size) {
    if (size == 0) return;
    if (gzwrite(static_cast<gzFile>(gz_), data, static_cast<unsigned>(size)) !=
        static_cast<int>(size)) {
        throw IoError("gzwrite failed");
    }
}

void PcapGzWriter::put32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) {
        const int shift = options_.big_endian ? (24 - 8 * i) : (8 * i);
        b[i] = static_cast<std::uint8_t>(v >> shift);
    }
    put(b, 4);
}

void PcapGzWriter::put16(std::uint16_t v) {
    std::uint8_t b[2];
    if (options_.big_endian) {
        b[0] = static_cast<std::uint8_t>(v >> 8);
        b[1] = static_cast<std::uint8_t>(v);
    } else {
        b[0] = static_cast<std::uint8_t>(v);
        b[1] = static_cast<std::uint8_t>(v >> 8);
    }
    put(b, 2);
}

void PcapGzWriter::write(Timestamp ts, std::span<const std::uint8_t> frame,
                         std::optional<std::uint32_t> original_length) {
    const std::int64_t micros = to_micros(ts);
    const auto sub = static_cast<std::uint32_t>(micros % 1'000'000);
    write_raw(static_cast<std::uint32_t>(micros / 1'000'000), options_.nanosecond ? sub * 1000 : sub,
              frame, original_length.value_or(static_cast<std::uint32_t>(frame.size())));
}

void PcapGzWriter::write_raw(std::uint32_t seconds, std::uint32_t fraction,
                             std::span<const std::uint8_t> frame, std::uint32_t original_length) {
    put32(seconds);
    put32(fraction);
    put32(static_cast<std::uint32_t>(frame.size()));
    put32(original_length);
    put(frame.data(), frame.size());
    ++packets_;
}

namespace frames {

namespace {

void push16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void push32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    push16(out, static_cast<std::uint16_t>(v >> 16));
    push16(out, static_cast<std::uint16_t>(v));
}

std::uint16_t checksum(std::span<const std::uint8_t> bytes) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) sum += (bytes[i] << 8) | bytes[i + 1];
    if (bytes.size() % 2) sum += bytes.back() << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

std::vector<std::uint8_t> ethernet(std::uint16_t ether_type) {
    std::vector<std::uint8_t> out{0x00, 0x1b, 0x21, 0x3a, 0x4c, 0x5d,   // dst MAC
                                  0x00, 0x0c, 0x29, 0x11, 0x22, 0x33};  // src MAC
    push16(out, ether_type);
    return out;
}

std::vector<std::uint8_t> ipv4(std::uint8_t protocol, Ipv4Address src, Ipv4Address dst,
                               std::span<const std::uint8_t> l4) {
    auto out = ethernet(0x0800);
    const std::size_t ip_start = out.size();
    out.push_back(0x45);
    out.push_back(0x00);
    push16(out, static_cast<std::uint16_t>(20 + l4.size()));
    push16(out, 0x1234);  // id
    push16(out, 0x4000);  // DF
    out.push_back(64);
    out.push_back(protocol);
    push16(out, 0);
    push32(out, src.value);
    push32(out, dst.value);
    const auto sum = checksum(std::span(out).subspan(ip_start, 20));
    out[ip_start + 10] = static_cast<std::uint8_t>(sum >> 8);
    out[ip_start + 11] = static_cast<std::uint8_t>(sum);
    out.insert(out.end(), l4.begin(), l4.end());
    return out;
}

}  // namespace

std::vector<std::uint8_t> tcp(Endpoint src, Endpoint dst, TcpFlagSet flags, std::size_t payload_bytes) {
    std::vector<std::uint8_t> l4;
    push16(l4, src.port);
    push16(l4, dst.port);
    push32(l4, 0x01020304);  // seq
    push32(l4, flags.has(TcpFlag::Ack) ? 0x0a0b0c0d : 0);
    l4.push_back(0x50);  // data offset 5
    l4.push_back(flags.bits());
    push16(l4, 65535);
    push16(l4, 0);
    push16(l4, 0);
    l4.resize(l4.size() + payload_bytes, 0xab);
    return ipv4(6, src.ip, dst.ip, l4);
}

std::vector<std::uint8_t> udp(Endpoint src, Endpoint dst, std::size_t payload_bytes) {
    std::vector<std::uint8_t> l4;
    push16(l4, src.port);
    push16(l4, dst.port);
    push16(l4, static_cast<std::uint16_t>(8 + payload_bytes));
    push16(l4, 0);
    l4.resize(l4.size() + payload_bytes, 0xcd);
    return ipv4(17, src.ip, dst.ip, l4);
}

std::vector<std::uint8_t> icmp_echo(Ipv4Address src, Ipv4Address dst, std::size_t payload_bytes) {
    std::vector<std::uint8_t> l4{8, 0, 0, 0, 0x00, 0x01, 0x00, 0x01};
    l4.resize(l4.size() + payload_bytes, 0xef);
    const auto sum = checksum(l4);
    l4[2] = static_cast<std::uint8_t>(sum >> 8);
    l4[3] = static_cast<std::uint8_t>(sum);
    return ipv4(1, src, dst, l4);
}

std::vector<std::uint8_t> arp_request(Ipv4Address sender, Ipv4Address target) {
    auto out = ethernet(0x0806);
    push16(out, 1);       // Ethernet
    push16(out, 0x0800);  // IPv4
    out.push_back(6);
    out.push_back(4);
    push16(out, 1);  // request
    for (std::uint8_t b : {0x00, 0x0c, 0x29, 0x11, 0x22, 0x33}) out.push_back(b);
    push32(out, sender.value);
    for (int i = 0; i < 6; ++i) out.push_back(0);
    push32(out, target.value);
    return out;
}

std::vector<std::uint8_t> ipv6_udp(std::uint16_t src_port, std::uint16_t dst_port) {
    auto out = ethernet(0x86dd);
    push32(out, 0x60000000);
    push16(out, 8);
    out.push_back(17);
    out.push_back(64);
    for (int i = 0; i < 32; ++i) out.push_back(static_cast<std::uint8_t>(i == 15 || i == 31));
    push16(out, src_port);
    push16(out, dst_port);
    push16(out, 8);
    push16(out, 0);
    return out;
}

}  // namespace frames

}  // namespace telescope
