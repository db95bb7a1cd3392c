#include "telescope/metadata_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "telescope/errors.hpp"

namespace telescope {

namespace {

std::string real(double v) {
    return fmt::format("{:.6f}", v);
}

template <typename T>
T parse_int(std::string_view text, std::string_view what) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error("bad integer for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return value;
}

double parse_real(std::string_view text, std::string_view what) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error("bad number for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = text.find(sep, pos);
        out.push_back(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

// Index of the first unescaped `c` at or after `pos`.
std::size_t find_unescaped(std::string_view text, char c, std::size_t pos = 0) {
    for (std::size_t i = pos; i < text.size(); ++i) {
        if (text[i] == '\\') {
            ++i;
        } else if (text[i] == c) {
            return i;
        }
    }
    return std::string_view::npos;
}

std::string unescape(std::string_view text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        out += text[i];
    }
    return out;
}

}  // namespace

SummaryResult summarize_capture(const std::filesystem::path& path) {
    SummaryResult result;
    auto& s = result.summary;
    s.file_name = parse_capture_file_name(path.filename().string());

    auto stream = CaptureStream::open(path);
    s.file_size_bytes = stream.compressed_size();
    std::optional<Timestamp> earliest;
    std::optional<Timestamp> latest;
    while (auto packet = stream.next()) {
        s.data_size_bytes += packet->captured_length;
        ++s.num_packets;
        if (!earliest || packet->timestamp < *earliest) earliest = packet->timestamp;
        if (!latest || packet->timestamp > *latest) latest = packet->timestamp;
    }
    result.corruption = stream.corruption();
    s.time = latest;

    if (s.num_packets > 0) {
        const auto data = static_cast<double>(s.data_size_bytes);
        const auto packets = static_cast<double>(s.num_packets);
        s.avg_pkt_size_bytes = data / packets;
        const double duration = static_cast<double>(to_micros(*latest) - to_micros(*earliest)) / 1e6;
        if (duration > 0.0) {
            s.data_byte_rate = data / duration;
            s.data_bit_rate = s.data_byte_rate * 8.0;
            s.avg_pkt_rate_pps = packets / duration;
        }
    }
    return result;
}

std::string summary_to_csv(const CaptureSummary& s) {
    return fmt::format("{},{},{},{},{},{},{},{},{}",
                       s.time ? std::to_string(to_micros(*s.time)) : std::string{},
                       s.file_name.render(), s.file_size_bytes, s.data_size_bytes, s.num_packets,
                       real(s.data_bit_rate), real(s.data_byte_rate), real(s.avg_pkt_rate_pps),
                       real(s.avg_pkt_size_bytes));
}

CaptureSummary parse_summary_csv(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto cells = split(line, ',');
    if (cells.size() != 9) {
        throw Error("summary row needs 9 columns, got " + std::to_string(cells.size()));
    }
    CaptureSummary s;
    if (!cells[0].empty()) s.time = timestamp_from_micros(parse_int<std::int64_t>(cells[0], "time"));
    s.file_name = parse_capture_file_name(cells[1]);
    s.file_size_bytes = parse_int<std::uint64_t>(cells[2], "file_size_bytes");
    s.data_size_bytes = parse_int<std::uint64_t>(cells[3], "data_size_bytes");
    s.num_packets = parse_int<std::uint64_t>(cells[4], "num_packets");
    s.data_bit_rate = parse_real(cells[5], "data_bit_rate");
    s.data_byte_rate = parse_real(cells[6], "data_byte_rate");
    s.avg_pkt_rate_pps = parse_real(cells[7], "avg_pkt_rate_pps");
    s.avg_pkt_size_bytes = parse_real(cells[8], "avg_pkt_size_bytes");
    return s;
}

std::string escape_tag_value(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        if (c == ',' || c == ' ' || c == '=' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

std::string summary_to_line_protocol(const CaptureSummary& s) {
    if (!s.time) {
        throw MissingTimestamp("summary for " + s.file_name.render() +
                               " has no packet timestamp; use the file's nominal hour");
    }
    return fmt::format(
        "{},file_name={} file_size_bytes={}i,data_size_bytes={}i,num_packets={}i,data_bit_rate={},"
        "data_byte_rate={},avg_pkt_rate_pps={},avg_pkt_size_bytes={} {}",
        kLineProtocolMeasurement, escape_tag_value(s.file_name.render()), s.file_size_bytes,
        s.data_size_bytes, s.num_packets, real(s.data_bit_rate), real(s.data_byte_rate),
        real(s.avg_pkt_rate_pps), real(s.avg_pkt_size_bytes), to_micros(*s.time) * 1000);
}

CaptureSummary parse_summary_line_protocol(std::string_view line) {
    const auto tags_end = find_unescaped(line, ' ');
    const auto fields_end = find_unescaped(line, ' ', tags_end + 1);
    if (tags_end == std::string_view::npos || fields_end == std::string_view::npos) {
        throw Error("line protocol needs measurement, fields and timestamp");
    }
    const auto series = line.substr(0, tags_end);
    const auto comma = find_unescaped(series, ',');
    if (comma == std::string_view::npos || series.substr(0, comma) != kLineProtocolMeasurement) {
        throw Error("unexpected measurement in line protocol");
    }
    const auto tag = series.substr(comma + 1);
    constexpr std::string_view kTagKey = "file_name=";
    if (!tag.starts_with(kTagKey)) throw Error("missing file_name tag");

    CaptureSummary s;
    s.file_name = parse_capture_file_name(unescape(tag.substr(kTagKey.size())));
    const auto ns = parse_int<std::int64_t>(line.substr(fields_end + 1), "timestamp");
    s.time = timestamp_from_micros(ns / 1000);

    int seen = 0;
    for (auto field : split(line.substr(tags_end + 1, fields_end - tags_end - 1), ',')) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) throw Error("malformed field in line protocol");
        const auto key = field.substr(0, eq);
        auto value = field.substr(eq + 1);
        auto integer = [&](std::uint64_t& out) {
            if (!value.ends_with('i')) throw Error("integer field without i suffix");
            out = parse_int<std::uint64_t>(value.substr(0, value.size() - 1), key);
        };
        if (key == "file_size_bytes") {
            integer(s.file_size_bytes);
        } else if (key == "data_size_bytes") {
            integer(s.data_size_bytes);
        } else if (key == "num_packets") {
            integer(s.num_packets);
        } else if (key == "data_bit_rate") {
            s.data_bit_rate = parse_real(value, key);
        } else if (key == "data_byte_rate") {
            s.data_byte_rate = parse_real(value, key);
        } else if (key == "avg_pkt_rate_pps") {
            s.avg_pkt_rate_pps = parse_real(value, key);
        } else if (key == "avg_pkt_size_bytes") {
            s.avg_pkt_size_bytes = parse_real(value, key);
        } else {
            throw Error("unknown field '" + std::string(key) + "'");
        }
        ++seen;
    }
    if (seen != 7) throw Error("line protocol must carry 7 fields");
    return s;
}

LineProtocolBatcher::LineProtocolBatcher(Sink sink, std::size_t batch_lines)
    : sink_(std::move(sink)), batch_lines_(std::max<std::size_t>(batch_lines, 1)) {}

LineProtocolBatcher::~LineProtocolBatcher() {
    try {
        flush();
    } catch (...) {
    }
}

void LineProtocolBatcher::add(std::string_view line) {
    buffer_.append(line);
    buffer_ += '\n';
    if (++pending_lines_ >= batch_lines_) flush();
}

void LineProtocolBatcher::flush() {
    if (pending_lines_ == 0) return;
    sink_(buffer_);
    buffer_.clear();
    pending_lines_ = 0;
    ++batches_;
}

}  // namespace telescope
