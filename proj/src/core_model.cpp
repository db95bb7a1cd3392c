#include "telescope/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "telescope/errors.hpp"

namespace telescope {

namespace chr = std::chrono;

namespace {

// Parses exactly `width` ASCII digits.
std::optional<int> fixed_digits(std::string_view text, std::size_t pos, std::size_t width) {
    if (pos + width > text.size()) return std::nullopt;
    int value = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        char c = text[i];
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
    }
    return value;
}

std::optional<Date> date_at(std::string_view text, std::size_t pos) {
    auto y = fixed_digits(text, pos, 4);
    auto m = fixed_digits(text, pos + 5, 2);
    auto d = fixed_digits(text, pos + 8, 2);
    if (!y || !m || !d || text[pos + 4] != '-' || text[pos + 7] != '-') return std::nullopt;
    Date date{chr::year{*y}, chr::month{static_cast<unsigned>(*m)},
              chr::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

}  // namespace

Date date_of(Timestamp t) {
    return Date{chr::floor<chr::days>(t)};
}

std::string format_date(Date d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10) return std::nullopt;
    return date_at(text, 0);
}

std::string format_timestamp(Timestamp t) {
    auto day = chr::floor<chr::days>(t);
    chr::hh_mm_ss<chr::microseconds> tod{t - day};
    auto base = fmt::format("{}T{:02d}:{:02d}:{:02d}", format_date(Date{day}), tod.hours().count(),
                            tod.minutes().count(), tod.seconds().count());
    if (tod.subseconds().count() != 0) base += fmt::format(".{:06d}", tod.subseconds().count());
    return base + "Z";
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    if (text.size() < 10) return std::nullopt;
    auto date = date_at(text, 0);
    if (!date) return std::nullopt;
    Timestamp t = start_of(*date);
    std::string_view rest = text.substr(10);
    if (rest.empty()) return t;
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    rest.remove_prefix(1);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);

    int fields[3] = {0, 0, 0};
    const int limits[3] = {23, 59, 59};
    for (int i = 0; i < 3 && !rest.empty(); ++i) {
        if (i > 0) {
            if (rest.front() != ':') return std::nullopt;
            rest.remove_prefix(1);
        }
        auto v = fixed_digits(rest, 0, 2);
        if (!v || *v > limits[i]) return std::nullopt;
        fields[i] = *v;
        rest.remove_prefix(2);
    }
    if (!rest.empty()) return std::nullopt;
    return t + chr::hours{fields[0]} + chr::minutes{fields[1]} + chr::seconds{fields[2]};
}

CaptureFileName CaptureFileName::containing(Timestamp t) {
    auto day = chr::floor<chr::days>(t);
    auto hour = chr::floor<chr::hours>(t - day);
    return CaptureFileName{Date{day}, static_cast<int>(hour.count())};
}

Timestamp CaptureFileName::start() const {
    return start_of(date) + chr::hours{hour};
}

std::string CaptureFileName::render() const {
    return fmt::format("{}.{:02d}.pcap.gz", format_date(date), hour);
}

std::optional<CaptureFileName> try_parse_capture_file_name(std::string_view name) {
    constexpr std::string_view kSuffix = ".pcap.gz";
    // YYYY-MM-DD.HH.pcap.gz
    if (name.size() != 13 + kSuffix.size()) return std::nullopt;
    if (name.substr(13) != kSuffix || name[10] != '.') return std::nullopt;
    auto date = date_at(name, 0);
    auto hour = fixed_digits(name, 11, 2);
    if (!date || !hour || *hour > 23) return std::nullopt;
    return CaptureFileName{*date, *hour};
}

CaptureFileName parse_capture_file_name(std::string_view name) {
    auto parsed = try_parse_capture_file_name(name);
    if (!parsed) throw MalformedName(std::string(name));
    return *parsed;
}

std::string_view to_string(PacketType type) {
    switch (type) {
    case PacketType::Tcp: return "TCP";
    case PacketType::Udp: return "UDP";
    case PacketType::Icmp: return "ICMP";
    case PacketType::Unknown: break;
    }
    return "unknown";
}

std::optional<PacketType> parse_packet_type(std::string_view text) {
    for (auto type : kAllPacketTypes) {
        if (to_string(type) == text) return type;
    }
    return std::nullopt;
}

std::string Ipv4Address::to_string() const {
    return fmt::format("{}.{}.{}.{}", value >> 24, (value >> 16) & 0xff, (value >> 8) & 0xff,
                       value & 0xff);
}

std::optional<Ipv4Address> Ipv4Address::parse(std::string_view text) {
    std::uint32_t result = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        unsigned v = 0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc{} || v > 255 || next - p > 3) return std::nullopt;
        p = next;
        result = (result << 8) | v;
    }
    if (p != end) return std::nullopt;
    return Ipv4Address{result};
}

bool is_consistent(const PacketRecord& r) {
    const bool l4 = r.type == PacketType::Tcp || r.type == PacketType::Udp;
    if (r.src_port.has_value() != l4 || r.dst_port.has_value() != l4) return false;
    if (r.type != PacketType::Tcp && !r.tcp_flags.empty()) return false;
    return to_micros(r.timestamp) >= 0;
}

bool is_consistent(const CaptureSummary& s) {
    auto close = [](double a, double b, double rel) {
        return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
    };
    if (!close(s.data_byte_rate * 8.0, s.data_bit_rate, 1e-9) &&
        !(s.data_byte_rate == 0.0 && s.data_bit_rate == 0.0)) {
        return false;
    }
    if (s.num_packets == 0) {
        return s.data_size_bytes == 0 && s.data_bit_rate == 0.0 && s.data_byte_rate == 0.0 &&
               s.avg_pkt_rate_pps == 0.0 && s.avg_pkt_size_bytes == 0.0;
    }
    return close(s.avg_pkt_size_bytes * static_cast<double>(s.num_packets),
                 static_cast<double>(s.data_size_bytes), 1e-6) ||
           (s.data_size_bytes == 0 && s.avg_pkt_size_bytes == 0.0);
}

bool AddressSpaceEpoch::contains(Timestamp t) const {
    if (t < start_of(start)) return false;
    return !end || t < start_of(*end);
}

void validate_timeline(std::span<const AddressSpaceEpoch> timeline) {
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        const auto& e = timeline[i];
        if (e.dark_address_count == 0) {
            throw ConfigError("address-space epoch '" + e.label + "' has zero dark addresses");
        }
        if (e.end && *e.end <= e.start) {
            throw ConfigError("address-space epoch '" + e.label + "' ends before it starts");
        }
        if (i + 1 < timeline.size()) {
            const auto& next = timeline[i + 1];
            if (!e.end || *e.end > next.start) {
                throw ConfigError("address-space epochs '" + e.label + "' and '" + next.label +
                                  "' overlap or are out of order");
            }
        }
    }
}

const AddressSpaceEpoch& epoch_for(std::span<const AddressSpaceEpoch> timeline, Timestamp t) {
    auto it = std::find_if(timeline.begin(), timeline.end(),
                           [t](const AddressSpaceEpoch& e) { return e.contains(t); });
    if (it == timeline.end()) {
        throw UncoveredTimestamp("no address-space epoch covers " + format_timestamp(t));
    }
    return *it;
}

std::uint64_t dark_address_count_for(std::span<const AddressSpaceEpoch> timeline, Timestamp t) {
    return epoch_for(timeline, t).dark_address_count;
}

void TimeSeries::append(Timestamp bucket_start, double value) {
    if (!samples_.empty() && bucket_start <= samples_.back().bucket_start) {
        throw std::invalid_argument("time series '" + measurement_ +
                                    "': buckets must be strictly increasing");
    }
    samples_.push_back({bucket_start, value});
}

}  // namespace telescope
