#include "fixtures.hpp"

#include <zlib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace fixtures {

namespace fs = std::filesystem;
using namespace telescope;

TempDir::TempDir(std::string_view tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("telescope-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

void push16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

void push32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    push16(v, static_cast<std::uint16_t>(x >> 16));
    push16(v, static_cast<std::uint16_t>(x));
}

void ethernet(std::vector<std::uint8_t>& v) {
    for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x02, 0x02, 0x00, 0x00, 0x00, 0x00, 0x01}) {
        v.push_back(b);
    }
}

// IPv4 header with options; checksum filled in.
void ipv4(std::vector<std::uint8_t>& v, Ipv4Address src, Ipv4Address dst, std::uint8_t protocol,
          std::size_t l4_bytes, const std::vector<std::uint8_t>& options = {}) {
    const auto start = v.size();
    const auto header = 20 + options.size();
    v.push_back(static_cast<std::uint8_t>(0x40 | (header / 4)));
    v.push_back(0);
    push16(v, static_cast<std::uint16_t>(header + l4_bytes));
    push16(v, 0x4242);
    push16(v, 0);
    v.push_back(64);
    v.push_back(protocol);
    push16(v, 0);
    push32(v, src.value);
    push32(v, dst.value);
    v.insert(v.end(), options.begin(), options.end());
    std::uint32_t sum = 0;
    for (std::size_t i = start; i < v.size(); i += 2) sum += (std::uint32_t(v[i]) << 8) | v[i + 1];
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    const auto checksum = static_cast<std::uint16_t>(~sum);
    v[start + 10] = static_cast<std::uint8_t>(checksum >> 8);
    v[start + 11] = static_cast<std::uint8_t>(checksum);
}

Ipv4Address random_ip(std::mt19937_64& rng) {
    return Ipv4Address{static_cast<std::uint32_t>(rng())};
}

std::uint16_t random_port(std::mt19937_64& rng) {
    return static_cast<std::uint16_t>(rng());
}

}  // namespace

Ipv4Address ip(std::string_view dotted) {
    auto parsed = Ipv4Address::parse(dotted);
    if (!parsed) throw std::invalid_argument("bad address " + std::string(dotted));
    return *parsed;
}

std::vector<std::uint8_t> udp_with_ip_options(Ipv4Address src, Ipv4Address dst, std::uint16_t sport,
                                              std::uint16_t dport, std::vector<std::uint8_t> options) {
    if (options.size() % 4 != 0 || options.size() > 40) throw std::invalid_argument("ip options");
    std::vector<std::uint8_t> v;
    ethernet(v);
    push16(v, 0x0800);
    ipv4(v, src, dst, 17, 8, options);
    push16(v, sport);
    push16(v, dport);
    push16(v, 8);
    push16(v, 0);
    return v;
}

std::vector<std::uint8_t> vlan_tcp(int tags, Ipv4Address src, Ipv4Address dst, std::uint16_t sport,
                                   std::uint16_t dport, std::uint8_t flags) {
    std::vector<std::uint8_t> v;
    ethernet(v);
    for (int t = 0; t < tags; ++t) {
        push16(v, t == 0 && tags == 2 ? 0x88a8 : 0x8100);
        push16(v, static_cast<std::uint16_t>(100 + t));
    }
    push16(v, 0x0800);
    ipv4(v, src, dst, 6, 20);
    push16(v, sport);
    push16(v, dport);
    push32(v, 1);
    push32(v, 0);
    v.push_back(0x50);
    v.push_back(flags);
    push16(v, 1024);
    push16(v, 0);
    push16(v, 0);
    return v;
}

std::vector<FixturePacket> random_packets(std::mt19937_64& rng, std::size_t count,
                                          std::uint32_t start_seconds) {
    std::vector<FixturePacket> out;
    out.reserve(count);
    std::uint64_t t_ns = std::uint64_t(start_seconds) * 1'000'000'000ull;
    for (std::size_t i = 0; i < count; ++i) {
        t_ns += rng() % 1'500'000'000ull;
        FixturePacket p;
        p.seconds = static_cast<std::uint32_t>(t_ns / 1'000'000'000ull);
        p.nanos = static_cast<std::uint32_t>(t_ns % 1'000'000'000ull);
        auto& e = p.expected;
        e.timestamp = timestamp_from_micros(static_cast<std::int64_t>(p.seconds) * 1'000'000 + p.nanos / 1000);

        const auto src = random_ip(rng);
        const auto dst = random_ip(rng);
        const auto sport = random_port(rng);
        const auto dport = random_port(rng);
        const auto roll = rng() % 100;
        std::size_t full = 0;
        if (roll < 35) {
            const auto flags = static_cast<std::uint8_t>(rng());
            p.frame = frames::tcp({src, sport}, {dst, dport}, TcpFlagSet(flags), rng() % 24);
            full = p.frame.size();
            // Snap-length truncation inside the payload keeps the header intact.
            if (rng() % 5 == 0 && p.frame.size() > 14 + 20 + 20) {
                p.frame.resize(14 + 20 + 20 + rng() % (p.frame.size() - 54 + 1));
            }
            e = {e.timestamp, PacketType::Tcp, src, dst, sport, dport, TcpFlagSet(flags)};
        } else if (roll < 55) {
            p.frame = frames::udp({src, sport}, {dst, dport}, rng() % 48);
            e = {e.timestamp, PacketType::Udp, src, dst, sport, dport, {}};
        } else if (roll < 65) {
            p.frame = frames::icmp_echo(src, dst, rng() % 32);
            e = {e.timestamp, PacketType::Icmp, src, dst, std::nullopt, std::nullopt, {}};
        } else if (roll < 70) {
            const auto flags = static_cast<std::uint8_t>(rng());
            p.frame = vlan_tcp(1 + static_cast<int>(rng() % 2), src, dst, sport, dport, flags);
            e = {e.timestamp, PacketType::Tcp, src, dst, sport, dport, TcpFlagSet(flags)};
        } else if (roll < 75) {
            std::vector<std::uint8_t> options(4 * (1 + rng() % 10), 0x01);  // NOPs
            p.frame = udp_with_ip_options(src, dst, sport, dport, options);
            e = {e.timestamp, PacketType::Udp, src, dst, sport, dport, {}};
        } else if (roll < 80) {
            p.frame = frames::arp_request(src, dst);
            e = {e.timestamp, PacketType::Unknown, std::nullopt, std::nullopt, std::nullopt, std::nullopt, {}};
        } else if (roll < 85) {
            p.frame = frames::ipv6_udp(sport, dport);
            e = {e.timestamp, PacketType::Unknown, std::nullopt, std::nullopt, std::nullopt, std::nullopt, {}};
        } else if (roll < 90) {
            // Transport header cut short by the snap length.
            p.frame = frames::tcp({src, sport}, {dst, dport}, TcpFlagSet{TcpFlag::Syn});
            full = p.frame.size();
            p.frame.resize(14 + 20 + rng() % 14);
            e = {e.timestamp, PacketType::Unknown, src, dst, std::nullopt, std::nullopt, {}};
        } else if (roll < 95) {
            p.frame = frames::udp({src, sport}, {dst, dport}, 16);
            p.frame[14 + 7] = static_cast<std::uint8_t>(1 + rng() % 255);  // fragment offset != 0
            e = {e.timestamp, PacketType::Unknown, src, dst, std::nullopt, std::nullopt, {}};
        } else {
            p.frame = frames::udp({src, sport}, {dst, dport}, 8);
            p.frame[14 + 9] = 47;  // GRE
            e = {e.timestamp, PacketType::Unknown, src, dst, std::nullopt, std::nullopt, {}};
        }
        p.original_length = static_cast<std::uint32_t>(std::max(full, p.frame.size()));
        out.push_back(std::move(p));
    }
    return out;
}

void write_capture(const fs::path& path, const std::vector<FixturePacket>& packets,
                   PcapWriterOptions options) {
    PcapGzWriter writer(path, options);
    for (const auto& p : packets) {
        writer.write_raw(p.seconds, options.nanosecond ? p.nanos : p.nanos / 1000, p.frame,
                         p.original_length);
    }
    writer.close();
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(std::stoul(std::string(hex.substr(i, 2)), nullptr, 16)));
    }
    return out;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_bytes(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::string gunzip(const fs::path& path) {
    gzFile in = gzopen(path.string().c_str(), "rb");
    if (!in) throw std::runtime_error("gzopen " + path.string());
    std::string data;
    char block[65536];
    int n = 0;
    while ((n = gzread(in, block, sizeof block)) > 0) data.append(block, static_cast<std::size_t>(n));
    gzclose(in);
    return data;
}

void gzip_to(const fs::path& path, std::string_view data) {
    gzFile out = gzopen(path.string().c_str(), "wb6");
    if (!out) throw std::runtime_error("gzopen " + path.string());
    if (!data.empty()) gzwrite(out, data.data(), static_cast<unsigned>(data.size()));
    gzclose(out);
}

}  // namespace fixtures
