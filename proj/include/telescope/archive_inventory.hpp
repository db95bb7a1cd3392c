#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

/// Expected-versus-present view of an archive over [range_start, range_end).
/// Missing and corrupted are disjoint: an unreadable present file is corrupted.
struct ArchiveInventory {
    Timestamp range_start;
    Timestamp range_end;
    std::map<CaptureFileName, std::filesystem::path> present;
    std::vector<CaptureFileName> missing;
    std::vector<CorruptionReport> corrupted;  // ordered by file name
    std::map<int, std::uint64_t> per_year_missing;
    std::map<int, std::uint64_t> per_year_corrupted;

    std::uint64_t expected_hours() const;
    bool is_corrupted(const CaptureFileName& name) const;
};

enum class ProbeMode { Fast, Full };

struct ScanOptions {
    ProbeMode mode = ProbeMode::Fast;
    unsigned parallelism = 4;
};

/// Every hour in [start, end) as an archive file name. Throws
/// std::invalid_argument unless both ends are hour-aligned and start <= end.
std::vector<CaptureFileName> expected_files(Timestamp start, Timestamp end);

/// Walks `root` recursively for archive file names inside the range and
/// probes each one. Throws IoError when root is not a readable directory.
ArchiveInventory scan_archive(const std::filesystem::path& root, Timestamp start, Timestamp end,
                              const ScanOptions& options = {});

/// ISO-8601 weekdays and weeks, UTC. Selectors combine with AND.
struct SamplingPolicy {
    std::optional<std::chrono::weekday> weekday;
    std::optional<int> hour;
    unsigned week_stride = 1;  // every Nth ISO week, counted from the week of the range start
    std::vector<Date> explicit_dates;

    /// Throws InvalidPolicy when no selector is set or a value is out of range.
    void validate() const;
    bool matches(const CaptureFileName& name, Timestamp range_start) const;
};

struct Selection {
    std::vector<CaptureFileName> selected;     // present on disk, in time order
    std::vector<CaptureFileName> unavailable;  // expected by the policy but missing
};

Selection select_files(const ArchiveInventory& inventory, const SamplingPolicy& policy);

/// Case-insensitive "mon".."sun" or full English names.
std::optional<std::chrono::weekday> parse_weekday(std::string_view text);

struct OutageGap {
    CaptureFileName first;
    std::uint64_t hours = 0;

    friend bool operator==(const OutageGap&, const OutageGap&) = default;
};

struct YearOutages {
    std::uint64_t missing = 0;
    std::uint64_t corrupted = 0;
};

struct OutageReport {
    std::uint64_t expected = 0;
    std::uint64_t total_missing = 0;
    std::uint64_t total_corrupted = 0;
    std::map<int, YearOutages> per_year;  // every year touched by the range
    std::optional<OutageGap> longest_gap;
    std::map<CorruptionKind, std::uint64_t> kinds;
    std::string text;
    std::string per_year_csv;  // year,missing,corrupted
};

OutageReport outage_report(const ArchiveInventory& inventory);

/// Longest run of consecutive missing hours; ties go to the earliest run.
std::optional<OutageGap> longest_gap(const std::vector<CaptureFileName>& missing);

}  // namespace telescope
