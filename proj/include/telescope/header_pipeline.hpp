#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

// Column order of the packet-header table.
inline constexpr std::string_view kHeaderCsvHeader =
    "timestamp_micro,packet_type,src_ip,dst_ip,src_port,dst_port,tcp_parsed_flags";

/// Appends one CSV row (no newline). Absent IPs and ports are empty cells.
void append_header_row(std::string& out, const PacketRecord& record);
std::string header_row(const PacketRecord& record);
/// Throws Error on malformed rows.
PacketRecord parse_header_row(std::string_view line);

struct ExtractionStats {
    std::array<std::uint64_t, 4> per_type{};  // indexed by PacketType
    std::uint64_t rows = 0;
    std::optional<CorruptionReport> corruption;

    std::uint64_t count(PacketType type) const { return per_type[static_cast<std::size_t>(type)]; }
};

using RowSink = std::function<void(const PacketRecord&)>;

/// Streams every packet through parse_headers in file order. Corruption
/// truncates the output; the stats carry the report.
/// Throws MalformedName for non-archive names and IoError for unreadable files.
ExtractionStats extract_headers(const std::filesystem::path& path, const RowSink& sink);

/// extract_headers into a CSV file with a header line.
ExtractionStats extract_headers_to_csv(const std::filesystem::path& capture,
                                       const std::filesystem::path& csv);

/// Splits a file into `<path>.partNNN` chunks of at most `chunk_limit` bytes
/// without breaking lines. Concatenating the chunks reproduces the input
/// byte for byte; an empty input yields no chunks. Stale parts from earlier
/// runs are removed. Throws LineTooLong when one line (with its newline)
/// exceeds the limit.
std::vector<std::filesystem::path> split_csv(const std::filesystem::path& path,
                                             std::uint64_t chunk_limit);

/// One LOAD DATA statement per chunk. Only the first chunk carries the CSV
/// header, so only its statement skips a line.
std::vector<std::string> emit_bulk_load(const std::vector<std::filesystem::path>& chunks,
                                        std::string_view table, bool first_chunk_has_header = true);

/// Quotes a path as a single-quoted SQL string literal.
std::string sql_string_literal(std::string_view text);

/// Table DDL plus the time, dst_port and src_ip indexes; applied once.
std::string schema_sql(std::string_view table);

/// Groups statement indices into consecutive waves of at most `parallelism`.
std::vector<std::vector<std::size_t>> plan_import_waves(std::size_t statements, unsigned parallelism);

/// Tab-separated `wave, statement index, script, chunk` lines for an external executor.
std::string render_import_manifest(
    const std::vector<std::pair<std::filesystem::path, std::vector<std::filesystem::path>>>& scripts,
    unsigned parallelism);

}  // namespace telescope
