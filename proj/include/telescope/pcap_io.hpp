#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "telescope/core_model.hpp"

namespace telescope {

inline constexpr std::uint32_t kLinkTypeEthernet = 1;

enum class CorruptionKind : std::uint8_t {
    TruncatedGzip,   // compressed stream ends before the deflate end marker / trailer
    BadGzipCrc,      // gzip header, deflate data, CRC-32 or ISIZE check failed
    BadPcapMagic,    // decompressed data does not start with a pcap magic number
    TruncatedPacket, // pcap data ends inside a header or record, or a record length is impossible
    EmptyFile,       // no bytes at all (compressed or decompressed)
};

inline constexpr CorruptionKind kAllCorruptionKinds[] = {
    CorruptionKind::TruncatedGzip, CorruptionKind::BadGzipCrc, CorruptionKind::BadPcapMagic,
    CorruptionKind::TruncatedPacket, CorruptionKind::EmptyFile};

std::string_view to_string(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption_kind(std::string_view text);

/// Why a capture stream stopped early. For gzip-level faults `byte_offset`
/// is the offset in the compressed file; for pcap-level faults it is the
/// offset in the decompressed stream of the header or record that failed.
struct CorruptionReport {
    std::string file_name;
    CorruptionKind kind = CorruptionKind::EmptyFile;
    std::optional<std::uint64_t> byte_offset;
    std::uint64_t packets_recovered = 0;

    friend bool operator==(const CorruptionReport&, const CorruptionReport&) = default;
};

struct PcapFileHeader {
    bool swapped = false;
    bool nanosecond = false;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::int32_t thiszone = 0;
    std::uint32_t sigfigs = 0;
    std::uint32_t snaplen = 0;
    std::uint32_t link_type = kLinkTypeEthernet;
};

/// One pcap record. `link_layer_bytes` points into the stream's buffer and is
/// only valid until the next call to CaptureStream::next().
struct RawPacket {
    Timestamp timestamp;
    std::uint32_t captured_length = 0;
    std::uint32_t original_length = 0;
    std::span<const std::uint8_t> link_layer_bytes;
};

/// Single-pass, single-consumer reader over a gzip-compressed classic pcap
/// file. Memory use is one inflate window plus the largest record; the file
/// is never materialized. Corruption ends the stream and is reported through
/// corruption() rather than thrown.
class CaptureStream {
public:
    /// Throws IoError when the path cannot be opened.
    static CaptureStream open(const std::filesystem::path& path);

    CaptureStream(CaptureStream&&) noexcept;
    CaptureStream& operator=(CaptureStream&&) noexcept;
    ~CaptureStream();

    /// Next record in file order, or nullopt at clean EOF or on corruption.
    std::optional<RawPacket> next();

    /// Set once next() has returned nullopt because of a fault.
    const std::optional<CorruptionReport>& corruption() const;
    /// Absent when the pcap header could not be read.
    const std::optional<PcapFileHeader>& header() const;
    std::uint64_t packets_read() const;
    std::uint64_t compressed_size() const;
    const std::filesystem::path& path() const;

private:
    struct State;
    explicit CaptureStream(std::unique_ptr<State> state);
    std::unique_ptr<State> state_;
};

/// Decodes Ethernet II -> IPv4 -> TCP/UDP/ICMP. Never fails: anything it
/// cannot decode comes back as PacketType::Unknown with undecodable fields absent.
PacketRecord parse_headers(const RawPacket& raw, std::uint32_t link_type = kLinkTypeEthernet);

/// "|"-joined in header bit order: FIN, SYN, RST, PSH, ACK, URG, ECE, CWR.
std::string render_tcp_flags(TcpFlagSet flags);
/// Inverse of render_tcp_flags; accepts names in any order, rejects unknown names.
std::optional<TcpFlagSet> parse_tcp_flags(std::string_view text);

/// Cheap integrity check that avoids decompressing the whole file: empty
/// file, gzip header, plausibility of the gzip trailer's ISIZE against the
/// compressed size, and the pcap magic in the first decompressed bytes.
/// Returns the detected fault, or nullopt when the file looks sound.
/// Throws IoError when the file cannot be read.
std::optional<CorruptionReport> probe_capture(const std::filesystem::path& path);

/// Streams the whole file and reports any fault (exact but costs a full inflate).
std::optional<CorruptionReport> full_scan_capture(const std::filesystem::path& path);

}  // namespace telescope
