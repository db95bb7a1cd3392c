#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace telescope {

// All timestamps are UTC microseconds since the Unix epoch.
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;
using Date = std::chrono::year_month_day;

inline Timestamp timestamp_from_micros(std::int64_t micros) {
    return Timestamp{std::chrono::microseconds{micros}};
}

inline std::int64_t to_micros(Timestamp t) {
    return t.time_since_epoch().count();
}

inline Timestamp start_of(Date d) {
    return std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::sys_days{d});
}

Date date_of(Timestamp t);

/// "YYYY-MM-DD"
std::string format_date(Date d);
std::optional<Date> parse_date(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ", with a ".ffffff" fraction only when non-zero.
std::string format_timestamp(Timestamp t);
/// Accepts "YYYY-MM-DD" or "YYYY-MM-DDTHH[:MM[:SS]][Z]".
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Name of one hourly archive file, rendered as `YYYY-MM-DD.HH.pcap.gz`.
struct CaptureFileName {
    Date date;
    int hour = 0;

    static CaptureFileName containing(Timestamp t);

    Timestamp start() const;
    std::string render() const;

    friend bool operator==(const CaptureFileName& a, const CaptureFileName& b) {
        return a.date == b.date && a.hour == b.hour;
    }
    friend std::strong_ordering operator<=>(const CaptureFileName& a, const CaptureFileName& b) {
        return a.start() <=> b.start();
    }
};

/// Throws MalformedName on any deviation from the exact pattern.
CaptureFileName parse_capture_file_name(std::string_view name);
std::optional<CaptureFileName> try_parse_capture_file_name(std::string_view name);

enum class PacketType : std::uint8_t { Tcp, Udp, Icmp, Unknown };

inline constexpr PacketType kAllPacketTypes[] = {PacketType::Tcp, PacketType::Udp,
                                                 PacketType::Icmp, PacketType::Unknown};

std::string_view to_string(PacketType type);
std::optional<PacketType> parse_packet_type(std::string_view text);

struct Ipv4Address {
    std::uint32_t value = 0;  // host byte order

    std::string to_string() const;
    static std::optional<Ipv4Address> parse(std::string_view text);

    friend auto operator<=>(const Ipv4Address&, const Ipv4Address&) = default;
};

// Bit values match the TCP header flags octet.
enum class TcpFlag : std::uint8_t {
    Fin = 0x01,
    Syn = 0x02,
    Rst = 0x04,
    Psh = 0x08,
    Ack = 0x10,
    Urg = 0x20,
    Ece = 0x40,
    Cwr = 0x80,
};

class TcpFlagSet {
public:
    constexpr TcpFlagSet() = default;
    constexpr explicit TcpFlagSet(std::uint8_t bits) : bits_(bits) {}
    constexpr TcpFlagSet(std::initializer_list<TcpFlag> flags) {
        for (auto f : flags) bits_ |= static_cast<std::uint8_t>(f);
    }

    constexpr bool has(TcpFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }

    friend constexpr bool operator==(TcpFlagSet, TcpFlagSet) = default;

private:
    std::uint8_t bits_ = 0;
};

struct PacketRecord {
    Timestamp timestamp;
    PacketType type = PacketType::Unknown;
    std::optional<Ipv4Address> src_ip;
    std::optional<Ipv4Address> dst_ip;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    TcpFlagSet tcp_flags;

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// Ports present iff TCP/UDP, flags empty unless TCP, non-negative timestamp.
bool is_consistent(const PacketRecord& record);

/// Coarse per-file metadata. `time` is the latest packet timestamp and is
/// absent for captures without packets.
struct CaptureSummary {
    std::optional<Timestamp> time;
    CaptureFileName file_name;
    std::uint64_t file_size_bytes = 0;
    std::uint64_t data_size_bytes = 0;
    std::uint64_t num_packets = 0;
    double data_bit_rate = 0.0;
    double data_byte_rate = 0.0;
    double avg_pkt_rate_pps = 0.0;
    double avg_pkt_size_bytes = 0.0;

    friend bool operator==(const CaptureSummary&, const CaptureSummary&) = default;
};

bool is_consistent(const CaptureSummary& summary);

/// One row of the monitored address-space timeline; `end` is exclusive, absent when open.
struct AddressSpaceEpoch {
    Date start;
    std::optional<Date> end;
    std::uint64_t dark_address_count = 0;
    std::string label;

    bool contains(Timestamp t) const;
};

/// Throws ConfigError when epochs are unsorted, overlap, or have zero counts.
void validate_timeline(std::span<const AddressSpaceEpoch> timeline);

/// Throws UncoveredTimestamp when no epoch contains t.
const AddressSpaceEpoch& epoch_for(std::span<const AddressSpaceEpoch> timeline, Timestamp t);
std::uint64_t dark_address_count_for(std::span<const AddressSpaceEpoch> timeline, Timestamp t);

struct Sample {
    Timestamp bucket_start;
    double value = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Ordered samples of one measurement. Missing buckets are gaps, never zeros.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(std::string measurement, std::string unit, bool scales_with_address_space)
        : measurement_(std::move(measurement)),
          unit_(std::move(unit)),
          scales_with_address_space_(scales_with_address_space) {}

    /// Throws std::invalid_argument unless bucket is strictly after the last one.
    void append(Timestamp bucket_start, double value);

    const std::string& measurement() const { return measurement_; }
    const std::string& unit() const { return unit_; }
    /// True for counts and volumes, false for intensive quantities like mean packet size.
    bool scales_with_address_space() const { return scales_with_address_space_; }
    const std::vector<Sample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::string measurement_;
    std::string unit_;
    bool scales_with_address_space_ = false;
    std::vector<Sample> samples_;
};

}  // namespace telescope
