#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

struct SummaryResult {
    CaptureSummary summary;
    std::optional<CorruptionReport> corruption;
};

/// One streaming pass over a capture. Rates divide by the span between the
/// earliest and latest packet and are 0 when that span is 0. A corrupted
/// file is summarized over the packets recovered before the fault.
/// Throws MalformedName if the file name is not an archive name, IoError if
/// it cannot be read.
SummaryResult summarize_capture(const std::filesystem::path& path);

inline constexpr std::string_view kSummaryCsvHeader =
    "time,file_name,file_size_bytes,data_size_bytes,num_packets,data_bit_rate,data_byte_rate,"
    "avg_pkt_rate_pps,avg_pkt_size_bytes";

/// `time` renders as integer microseconds, empty when absent; reals use six decimals.
std::string summary_to_csv(const CaptureSummary& summary);
/// Throws Error on a malformed row.
CaptureSummary parse_summary_csv(std::string_view line);

inline constexpr std::string_view kLineProtocolMeasurement = "pcap_metadata";

/// Throws MissingTimestamp for summaries without a packet timestamp.
std::string summary_to_line_protocol(const CaptureSummary& summary);
/// Inverse of summary_to_line_protocol. Throws Error on malformed input.
CaptureSummary parse_summary_line_protocol(std::string_view line);

/// Escapes commas, spaces and equals signs in a line-protocol tag value.
std::string escape_tag_value(std::string_view value);

inline constexpr std::size_t kLineProtocolBatch = 5000;

/// Buffers line-protocol lines and hands them to `sink` in batches of at most
/// `batch_lines` lines, so no single write request grows with the input.
class LineProtocolBatcher {
public:
    using Sink = std::function<void(std::string_view batch)>;

    explicit LineProtocolBatcher(Sink sink, std::size_t batch_lines = kLineProtocolBatch);
    ~LineProtocolBatcher();

    void add(std::string_view line);
    void flush();

    std::size_t batches_written() const { return batches_; }

private:
    Sink sink_;
    std::size_t batch_lines_;
    std::size_t pending_lines_ = 0;
    std::size_t batches_ = 0;
    std::string buffer_;
};

}  // namespace telescope
