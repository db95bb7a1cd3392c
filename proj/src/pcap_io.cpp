#include "telescope/pcap_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <vector>

#include "telescope/errors.hpp"

namespace telescope {

namespace {

constexpr std::size_t kInputChunk = 256 * 1024;
constexpr std::size_t kOutputChunk = 256 * 1024;
constexpr std::size_t kPcapHeaderBytes = 24;
constexpr std::size_t kRecordHeaderBytes = 16;
// libpcap's MAXIMUM_SNAPLEN; larger declared snaplens are honored up to kHardRecordCap.
constexpr std::uint32_t kDefaultRecordCap = 262144;
constexpr std::uint32_t kHardRecordCap = 16 * 1024 * 1024;

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;

std::uint32_t load_le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path) {
    FilePtr f{std::fopen(path.c_str(), "rb")};
    if (!f) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    return f;
}

/// Streaming gzip inflater over a FILE. Handles concatenated members and
/// ignores non-gzip trailing bytes after a complete member, like gzip(1).
class GzipSource {
public:
    enum class Status { Streaming, Done, Truncated, DataError };

    explicit GzipSource(FilePtr file) : file_(std::move(file)), input_(kInputChunk) {
        std::memset(&zs_, 0, sizeof zs_);
        if (inflateInit2(&zs_, 15 + 16) != Z_OK) throw IoError("inflateInit2 failed");
    }
    GzipSource(const GzipSource&) = delete;
    GzipSource& operator=(const GzipSource&) = delete;
    ~GzipSource() { inflateEnd(&zs_); }

    /// Decompresses up to `capacity` bytes; returns 0 once the stream has
    /// stopped (see status()).
    std::size_t read(std::uint8_t* out, std::size_t capacity) {
        std::size_t produced = 0;
        while (produced < capacity && status_ == Status::Streaming) {
            if (between_members_ && !start_next_member()) break;
            if (zs_.avail_in == 0 && !refill()) {
                status_ = member_bytes_ ? Status::Truncated : Status::Done;
                fault_offset_ = bytes_read_;
                break;
            }
            zs_.next_out = out + produced;
            zs_.avail_out = static_cast<uInt>(capacity - produced);
            const auto before_in = zs_.avail_in;
            const int rc = inflate(&zs_, Z_NO_FLUSH);
            member_bytes_ += before_in - zs_.avail_in;
            produced = capacity - zs_.avail_out;
            if (rc == Z_STREAM_END) {
                between_members_ = true;
                member_bytes_ = 0;
            } else if (rc == Z_DATA_ERROR || rc == Z_NEED_DICT) {
                status_ = Status::DataError;
                fault_offset_ = bytes_read_ - zs_.avail_in;
            } else if (rc == Z_MEM_ERROR) {
                throw IoError("zlib out of memory");
            }
            // Z_OK and Z_BUF_ERROR: keep feeding.
        }
        return produced;
    }

    Status status() const { return status_; }
    std::uint64_t fault_offset() const { return fault_offset_; }

private:
    bool refill() {
        // Keep unread bytes (only possible while peeking at a member boundary).
        if (zs_.avail_in > 0) std::memmove(input_.data(), zs_.next_in, zs_.avail_in);
        const std::size_t kept = zs_.avail_in;
        const std::size_t got = std::fread(input_.data() + kept, 1, input_.size() - kept, file_.get());
        if (got == 0 && std::ferror(file_.get())) throw IoError("read error while inflating");
        bytes_read_ += got;
        zs_.next_in = input_.data();
        zs_.avail_in = static_cast<uInt>(kept + got);
        return got > 0;
    }

    bool start_next_member() {
        while (zs_.avail_in < 2) {
            if (!refill()) break;
        }
        if (zs_.avail_in < 2 || zs_.next_in[0] != 0x1f || zs_.next_in[1] != 0x8b) {
            status_ = Status::Done;
            return false;
        }
        inflateReset(&zs_);
        between_members_ = false;
        return true;
    }

    FilePtr file_;
    std::vector<std::uint8_t> input_;
    z_stream zs_;
    Status status_ = Status::Streaming;
    bool between_members_ = false;
    std::uint64_t member_bytes_ = 0;
    std::uint64_t bytes_read_ = 0;
    std::uint64_t fault_offset_ = 0;
};

std::optional<PcapFileHeader> decode_file_header(const std::uint8_t* p) {
    PcapFileHeader h;
    const std::uint32_t magic = load_le32(p);
    if (magic == kMagicMicro || magic == kMagicNano) {
        h.swapped = false;
        h.nanosecond = magic == kMagicNano;
    } else if (bswap32(magic) == kMagicMicro || bswap32(magic) == kMagicNano) {
        h.swapped = true;
        h.nanosecond = bswap32(magic) == kMagicNano;
    } else {
        return std::nullopt;
    }
    auto u32 = [&](std::size_t off) {
        const auto v = load_le32(p + off);
        return h.swapped ? bswap32(v) : v;
    };
    const auto version = u32(4);
    // version is two u16 fields; reading them as one u32 puts major in the low half.
    h.version_major = static_cast<std::uint16_t>(version & 0xffff);
    h.version_minor = static_cast<std::uint16_t>(version >> 16);
    h.thiszone = static_cast<std::int32_t>(u32(8));
    h.sigfigs = u32(12);
    h.snaplen = u32(16);
    h.link_type = u32(20);
    return h;
}

bool has_pcap_magic(const std::uint8_t* p) {
    const std::uint32_t m = load_le32(p);
    return m == kMagicMicro || m == kMagicNano || bswap32(m) == kMagicMicro ||
           bswap32(m) == kMagicNano;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) {
    switch (kind) {
    case CorruptionKind::TruncatedGzip: return "TRUNCATED_GZIP";
    case CorruptionKind::BadGzipCrc: return "BAD_GZIP_CRC";
    case CorruptionKind::BadPcapMagic: return "BAD_PCAP_MAGIC";
    case CorruptionKind::TruncatedPacket: return "TRUNCATED_PACKET";
    case CorruptionKind::EmptyFile: break;
    }
    return "EMPTY_FILE";
}

std::optional<CorruptionKind> parse_corruption_kind(std::string_view text) {
    for (auto kind : kAllCorruptionKinds) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

struct CaptureStream::State {
    State(const std::filesystem::path& p, FilePtr file, std::uint64_t size)
        : path(p), compressed_size(size), gz(std::move(file)), buffer(kOutputChunk) {}

    std::filesystem::path path;
    std::uint64_t compressed_size;
    GzipSource gz;
    std::vector<std::uint8_t> buffer;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::uint64_t stream_offset = 0;  // decompressed offset of buffer[begin]
    std::uint32_t record_cap = kDefaultRecordCap;
    std::optional<PcapFileHeader> header;
    std::optional<CorruptionReport> corruption;
    std::uint64_t packets = 0;
    bool finished = false;

    std::size_t available() const { return end - begin; }

    // Buffers at least `n` bytes unless the inflater stops first.
    void fill(std::size_t n) {
        if (available() >= n) return;
        if (buffer.size() - begin < n || begin > buffer.size() / 2) {
            std::memmove(buffer.data(), buffer.data() + begin, available());
            end -= begin;
            begin = 0;
        }
        if (buffer.size() < n) buffer.resize(std::max(n, buffer.size() * 2));
        while (available() < n) {
            const auto got = gz.read(buffer.data() + end, buffer.size() - end);
            if (got == 0) break;
            end += got;
        }
    }

    void consume(std::size_t n) {
        begin += n;
        stream_offset += n;
    }

    // Ends the stream because fewer bytes arrived than a header or record needs.
    void fail_short(std::uint64_t offset) {
        switch (gz.status()) {
        case GzipSource::Status::Truncated:
            fail(CorruptionKind::TruncatedGzip, gz.fault_offset());
            break;
        case GzipSource::Status::DataError:
            fail(CorruptionKind::BadGzipCrc, gz.fault_offset());
            break;
        default:
            fail(CorruptionKind::TruncatedPacket, offset);
            break;
        }
    }

    void fail(CorruptionKind kind, std::optional<std::uint64_t> offset) {
        corruption = CorruptionReport{path.filename().string(), kind, offset, packets};
        finished = true;
    }

    void read_file_header() {
        fill(kPcapHeaderBytes);
        if (available() == 0 && gz.status() == GzipSource::Status::Done) {
            fail(CorruptionKind::EmptyFile, std::nullopt);
            return;
        }
        if (available() >= 4 && !has_pcap_magic(buffer.data() + begin)) {
            fail(CorruptionKind::BadPcapMagic, 0);
            return;
        }
        if (available() < kPcapHeaderBytes) {
            fail_short(0);
            return;
        }
        header = decode_file_header(buffer.data() + begin);
        if (header->snaplen > record_cap) record_cap = std::min(header->snaplen, kHardRecordCap);
        consume(kPcapHeaderBytes);
    }

    std::optional<RawPacket> next() {
        if (finished) return std::nullopt;
        fill(kRecordHeaderBytes);
        if (available() == 0) {
            if (gz.status() == GzipSource::Status::Done) {
                finished = true;
            } else {
                fail_short(stream_offset);
            }
            return std::nullopt;
        }
        if (available() < kRecordHeaderBytes) {
            fail_short(stream_offset);
            return std::nullopt;
        }
        const std::uint8_t* rec = buffer.data() + begin;
        auto u32 = [&](std::size_t off) {
            const auto v = load_le32(rec + off);
            return header->swapped ? bswap32(v) : v;
        };
        const std::uint64_t seconds = u32(0);
        const std::uint64_t fraction = u32(4);
        const std::uint32_t captured = u32(8);
        const std::uint32_t original = u32(12);
        if (captured > record_cap) {
            fail(CorruptionKind::TruncatedPacket, stream_offset);
            return std::nullopt;
        }
        fill(kRecordHeaderBytes + captured);
        if (available() < kRecordHeaderBytes + captured) {
            fail_short(stream_offset);
            return std::nullopt;
        }
        rec = buffer.data() + begin;  // fill() may have moved the buffer
        const std::uint64_t micros =
            seconds * 1'000'000 + (header->nanosecond ? fraction / 1000 : fraction);
        RawPacket packet{timestamp_from_micros(static_cast<std::int64_t>(micros)), captured, original,
                         std::span<const std::uint8_t>(rec + kRecordHeaderBytes, captured)};
        consume(kRecordHeaderBytes + captured);
        ++packets;
        return packet;
    }
};

CaptureStream::CaptureStream(std::unique_ptr<State> state) : state_(std::move(state)) {}
CaptureStream::CaptureStream(CaptureStream&&) noexcept = default;
CaptureStream& CaptureStream::operator=(CaptureStream&&) noexcept = default;
CaptureStream::~CaptureStream() = default;

CaptureStream CaptureStream::open(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    auto state = std::make_unique<State>(path, open_file(path), size);
    if (size == 0) {
        state->fail(CorruptionKind::EmptyFile, std::nullopt);
    } else {
        state->read_file_header();
    }
    return CaptureStream(std::move(state));
}

std::optional<RawPacket> CaptureStream::next() { return state_->next(); }
const std::optional<CorruptionReport>& CaptureStream::corruption() const { return state_->corruption; }
const std::optional<PcapFileHeader>& CaptureStream::header() const { return state_->header; }
std::uint64_t CaptureStream::packets_read() const { return state_->packets; }
std::uint64_t CaptureStream::compressed_size() const { return state_->compressed_size; }
const std::filesystem::path& CaptureStream::path() const { return state_->path; }

PacketRecord parse_headers(const RawPacket& raw, std::uint32_t link_type) {
    PacketRecord record;
    record.timestamp = raw.timestamp;
    record.type = PacketType::Unknown;
    if (link_type != kLinkTypeEthernet) return record;

    auto bytes = raw.link_layer_bytes;
    if (bytes.size() < 14) return record;
    std::size_t offset = 12;
    std::uint16_t ether_type = load_be16(&bytes[offset]);
    // Up to two 802.1Q / 802.1ad tags.
    for (int tags = 0; tags < 2 && (ether_type == 0x8100 || ether_type == 0x88a8); ++tags) {
        offset += 4;
        if (bytes.size() < offset + 2) return record;
        ether_type = load_be16(&bytes[offset]);
    }
    offset += 2;
    if (ether_type != 0x0800) return record;

    auto ip = bytes.subspan(offset);
    if (ip.size() < 20 || (ip[0] >> 4) != 4) return record;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || ip.size() < ihl) return record;
    record.src_ip = Ipv4Address{std::uint32_t(ip[12]) << 24 | std::uint32_t(ip[13]) << 16 |
                                std::uint32_t(ip[14]) << 8 | ip[15]};
    record.dst_ip = Ipv4Address{std::uint32_t(ip[16]) << 24 | std::uint32_t(ip[17]) << 16 |
                                std::uint32_t(ip[18]) << 8 | ip[19]};

    const std::uint8_t protocol = ip[9];
    if (protocol == 1) {
        record.type = PacketType::Icmp;
        return record;
    }
    // Non-first fragments carry no transport header.
    const std::uint16_t fragment_offset = load_be16(&ip[6]) & 0x1fff;
    if (fragment_offset != 0) return record;

    auto l4 = ip.subspan(ihl);
    if (protocol == 6 && l4.size() >= 14) {
        record.type = PacketType::Tcp;
        record.src_port = load_be16(&l4[0]);
        record.dst_port = load_be16(&l4[2]);
        record.tcp_flags = TcpFlagSet(l4[13]);
    } else if (protocol == 17 && l4.size() >= 8) {
        record.type = PacketType::Udp;
        record.src_port = load_be16(&l4[0]);
        record.dst_port = load_be16(&l4[2]);
    }
    return record;
}

namespace {
constexpr std::array<std::pair<TcpFlag, std::string_view>, 8> kFlagNames{{
    {TcpFlag::Fin, "FIN"},
    {TcpFlag::Syn, "SYN"},
    {TcpFlag::Rst, "RST"},
    {TcpFlag::Psh, "PSH"},
    {TcpFlag::Ack, "ACK"},
    {TcpFlag::Urg, "URG"},
    {TcpFlag::Ece, "ECE"},
    {TcpFlag::Cwr, "CWR"},
}};
}  // namespace

std::string render_tcp_flags(TcpFlagSet flags) {
    std::string out;
    for (const auto& [flag, name] : kFlagNames) {
        if (!flags.has(flag)) continue;
        if (!out.empty()) out += '|';
        out += name;
    }
    return out;
}

std::optional<TcpFlagSet> parse_tcp_flags(std::string_view text) {
    std::uint8_t bits = 0;
    if (text.empty()) return TcpFlagSet{};
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto bar = text.find('|', pos);
        auto token = text.substr(pos, bar == std::string_view::npos ? text.npos : bar - pos);
        auto it = std::find_if(kFlagNames.begin(), kFlagNames.end(),
                               [&](const auto& entry) { return entry.second == token; });
        if (it == kFlagNames.end()) return std::nullopt;
        bits |= static_cast<std::uint8_t>(it->first);
        if (bar == std::string_view::npos) break;
        pos = bar + 1;
    }
    return TcpFlagSet(bits);
}

std::optional<CorruptionReport> probe_capture(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    const auto name = path.filename().string();
    auto report = [&](CorruptionKind kind, std::optional<std::uint64_t> offset) {
        return CorruptionReport{name, kind, offset, 0};
    };
    if (size == 0) return report(CorruptionKind::EmptyFile, std::nullopt);

    {
        auto file = open_file(path);
        std::array<std::uint8_t, 3> magic{};
        const auto got = std::fread(magic.data(), 1, magic.size(), file.get());
        if (got < 2 || magic[0] != 0x1f || magic[1] != 0x8b || (got == 3 && magic[2] != 8)) {
            return got < 2 ? report(CorruptionKind::TruncatedGzip, got)
                           : report(CorruptionKind::BadGzipCrc, 0);
        }
    }

    // Leading bytes: does the stream decompress into a pcap header?
    {
        GzipSource gz(open_file(path));
        std::array<std::uint8_t, 4> head{};
        std::size_t got = 0;
        while (got < head.size()) {
            const auto n = gz.read(head.data() + got, head.size() - got);
            if (n == 0) break;
            got += n;
        }
        if (got == 4 && !has_pcap_magic(head.data())) return report(CorruptionKind::BadPcapMagic, 0);
        if (got < 4) {
            switch (gz.status()) {
            case GzipSource::Status::Truncated:
                return report(CorruptionKind::TruncatedGzip, gz.fault_offset());
            case GzipSource::Status::DataError:
                return report(CorruptionKind::BadGzipCrc, gz.fault_offset());
            default:
                return report(got == 0 ? CorruptionKind::EmptyFile : CorruptionKind::TruncatedPacket,
                              got == 0 ? std::nullopt : std::optional<std::uint64_t>{0});
            }
        }
    }

    // Trailer: 10-byte header + 8-byte trailer minimum; ISIZE cannot exceed
    // the maximum deflate expansion (1032:1) of the compressed bytes.
    if (size < 18) return report(CorruptionKind::TruncatedGzip, size);
    auto file = open_file(path);
    std::array<std::uint8_t, 4> tail{};
    if (std::fseek(file.get(), -4, SEEK_END) != 0 ||
        std::fread(tail.data(), 1, tail.size(), file.get()) != tail.size()) {
        throw IoError("cannot read gzip trailer of " + path.string());
    }
    const std::uint64_t isize = load_le32(tail.data());
    if (isize > size * 1032) {
        return report(CorruptionKind::TruncatedGzip, size);
    }
    return std::nullopt;
}

std::optional<CorruptionReport> full_scan_capture(const std::filesystem::path& path) {
    auto stream = CaptureStream::open(path);
    while (stream.next()) {
    }
    return stream.corruption();
}

}  // namespace telescope
