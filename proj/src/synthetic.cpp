#include "telescope/synthetic.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>

#include "telescope/errors.hpp"
#include "telescope/pcap_writer.hpp"

namespace telescope {

namespace fs = std::filesystem;

namespace {

// Scanner networks; the geo table shipped with the synthetic config uses the same prefixes.
constexpr std::array<std::uint32_t, 8> kScannerNets = {
    0x3d000000,  // 61.0.0.0/8
    0x5b000000,  // 91.0.0.0/8
    0x67000000,  // 103.0.0.0/8
    0xb9000000,  // 185.0.0.0/8
    0x2d000000,  // 45.0.0.0/8
    0xbe000000,  // 190.0.0.0/8
    0x29000000,  // 41.0.0.0/8
    0x17000000,  // 23.0.0.0/8
};

constexpr std::array<std::uint16_t, 10> kScanPorts = {23, 445, 22, 80, 8080, 3389, 443, 2323, 5555, 1433};
constexpr std::array<std::uint16_t, 5> kUdpPorts = {53, 123, 161, 1900, 5060};
constexpr std::uint32_t kDarkNet = 0x2c000000;  // 44.0.0.0/8

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
}

Ipv4Address scanner(Rng& rng) {
    // Skewed: a few hosts per network send most of the scans.
    const auto net = kScannerNets[rng.below(rng.below(kScannerNets.size()) + 1)];
    const auto host = static_cast<std::uint32_t>(rng.below(rng.below(64) + 1)) + 1;
    return Ipv4Address{net | (host * 2654435761u & 0x00ffffffu)};
}

Ipv4Address dark_address(Rng& rng) {
    return Ipv4Address{kDarkNet | static_cast<std::uint32_t>(rng.below(1u << 24))};
}

std::uint16_t high_port(Rng& rng) {
    return static_cast<std::uint16_t>(1024 + rng.below(64511));
}

std::string read_gz(const fs::path& path) {
    gzFile in = gzopen(path.string().c_str(), "rb");
    if (!in) throw IoError("cannot open " + path.string());
    std::string data;
    std::array<char, 65536> block{};
    int n = 0;
    while ((n = gzread(in, block.data(), static_cast<unsigned>(block.size()))) > 0) {
        data.append(block.data(), static_cast<std::size_t>(n));
    }
    gzclose(in);
    if (n < 0) throw IoError("cannot decompress " + path.string());
    return data;
}

void write_gz(const fs::path& path, std::string_view data) {
    gzFile out = gzopen(path.string().c_str(), "wb6");
    if (!out) throw IoError("cannot create " + path.string());
    if (!data.empty() && gzwrite(out, data.data(), static_cast<unsigned>(data.size())) == 0) {
        gzclose(out);
        throw IoError("cannot write " + path.string());
    }
    if (gzclose(out) != Z_OK) throw IoError("cannot close " + path.string());
}

}  // namespace

std::uint64_t write_synthetic_capture(const fs::path& path, const CaptureFileName& name,
                                      std::size_t packets, std::uint64_t seed) {
    Rng rng(seed);
    PcapWriterOptions options;
    const auto variant = static_cast<unsigned>(name.hour) % 4;
    options.nanosecond = variant & 1;
    options.big_endian = variant & 2;
    PcapGzWriter writer(path, options);

    std::vector<std::int64_t> offsets(packets);
    for (auto& o : offsets) o = static_cast<std::int64_t>(rng.below(3'600'000'000ull));
    std::sort(offsets.begin(), offsets.end());

    const auto base = name.start();
    for (auto offset : offsets) {
        const auto ts = base + std::chrono::microseconds{offset};
        const auto roll = rng.below(100);
        std::vector<std::uint8_t> frame;
        if (roll < 55) {
            const auto port = kScanPorts[rng.below(rng.below(kScanPorts.size()) + 1)];
            frame = frames::tcp({scanner(rng), high_port(rng)}, {dark_address(rng), port},
                                TcpFlagSet{TcpFlag::Syn});
        } else if (roll < 75) {
            static const TcpFlagSet kBackscatter[] = {TcpFlagSet{TcpFlag::Syn, TcpFlag::Ack},
                                                      TcpFlagSet{TcpFlag::Rst},
                                                      TcpFlagSet{TcpFlag::Rst, TcpFlag::Ack}};
            const std::uint16_t service = rng.below(2) ? 80 : 443;
            const Ipv4Address victim{static_cast<std::uint32_t>(rng.next())};
            frame = frames::tcp({victim, service}, {dark_address(rng), high_port(rng)},
                                kBackscatter[rng.below(3)]);
        } else if (roll < 90) {
            frame = frames::udp({scanner(rng), high_port(rng)},
                                {dark_address(rng), kUdpPorts[rng.below(kUdpPorts.size())]},
                                rng.below(64));
        } else if (roll < 97) {
            frame = frames::icmp_echo(scanner(rng), dark_address(rng), 32);
        } else if (roll < 99) {
            frame = frames::arp_request(dark_address(rng), dark_address(rng));
        } else {
            frame = frames::ipv6_udp(high_port(rng), 53);
        }
        writer.write(ts, frame);
    }
    writer.close();
    return writer.packets_written();
}

void damage_capture(const fs::path& path, CorruptionKind kind) {
    std::error_code ec;
    switch (kind) {
    case CorruptionKind::EmptyFile:
        fs::resize_file(path, 0, ec);
        break;
    case CorruptionKind::TruncatedGzip:
        // Shorter than header plus trailer, so even the fast probe sees it.
        fs::resize_file(path, std::min<std::uintmax_t>(fs::file_size(path), 16), ec);
        break;
    case CorruptionKind::BadGzipCrc: {
        std::FILE* f = std::fopen(path.string().c_str(), "r+b");
        if (!f) throw IoError("cannot open " + path.string());
        std::fseek(f, 2, SEEK_SET);
        std::fputc(0x07, f);  // unknown compression method
        std::fclose(f);
        break;
    }
    case CorruptionKind::BadPcapMagic: {
        auto data = read_gz(path);
        std::fill_n(data.begin(), std::min<std::size_t>(4, data.size()), '\x00');
        write_gz(path, data);
        break;
    }
    case CorruptionKind::TruncatedPacket: {
        auto data = read_gz(path);
        data.resize(data.size() > 24 + 7 ? data.size() - 7 : 24 + 5);
        write_gz(path, data);
        break;
    }
    }
    if (ec) throw IoError("cannot damage " + path.string() + ": " + ec.message());
}

SyntheticArchive generate_archive(const SyntheticArchiveOptions& options) {
    if (options.holes + options.corrupted > options.hours) {
        throw std::invalid_argument("more holes and damaged files than hours");
    }
    Rng rng(mix(options.seed, 0x5eed));
    std::set<std::size_t> holes;
    while (holes.size() < options.holes) holes.insert(rng.below(options.hours));
    std::set<std::size_t> damaged;
    while (damaged.size() < options.corrupted) {
        const auto h = rng.below(options.hours);
        if (!holes.contains(h)) damaged.insert(h);
    }

    SyntheticArchive archive;
    std::size_t damage_index = 0;
    for (std::size_t h = 0; h < options.hours; ++h) {
        const auto name = CaptureFileName::containing(options.start + std::chrono::hours{h});
        if (holes.contains(h)) {
            archive.holes.push_back(name);
            continue;
        }
        const auto dir = options.root / fmt::format("{:04}", static_cast<int>(name.date.year())) /
                         fmt::format("{:02}", static_cast<unsigned>(name.date.month()));
        fs::create_directories(dir);
        const auto path = dir / name.render();

        auto file_rng = Rng(mix(options.seed, h));
        auto packets = options.packets_per_file;
        if (packets > 0) {
            packets = packets * 3 / 4 + file_rng.below(packets / 2 + 1);
            if (file_rng.below(40) == 0) packets *= 3;  // occasional scanning burst
        }
        write_synthetic_capture(path, name, packets, file_rng.next());
        archive.written.push_back(name);

        if (damaged.contains(h)) {
            const auto kind = kAllCorruptionKinds[damage_index++ % std::size(kAllCorruptionKinds)];
            damage_capture(path, kind);
            archive.corrupted.emplace_back(name, kind);
        }
    }
    return archive;
}

}  // namespace telescope
