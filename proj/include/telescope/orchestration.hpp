#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "telescope/analytics.hpp"
#include "telescope/archive_inventory.hpp"
#include "telescope/config.hpp"
#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

std::uint32_t file_crc32(const std::filesystem::path& path);

struct StageResult {
    std::vector<std::filesystem::path> staged;  // same order as the input
    std::size_t copied = 0;
    std::size_t skipped = 0;
};

/// Copies archive files into a flat staging directory, verifying a CRC-32 of
/// each copy and recording it in a `<name>.crc32` sidecar. Files already
/// staged with the same size are not copied again, but their sidecar checksum
/// is re-verified. Throws InsufficientSpace before copying anything when the
/// pending copies do not fit, ChecksumMismatch naming the offending file, or
/// IoError.
StageResult stage(const std::vector<std::filesystem::path>& files,
                  const std::filesystem::path& staging_dir);

enum class PipelineKind { Meta, Headers };

enum class FileStatus { Success, Corrupted, Failed, Skipped };

std::string_view to_string(FileStatus status);

struct FileRun {
    std::string file;
    FileStatus status = FileStatus::Success;
    std::int64_t duration_ms = 0;
    std::uint64_t rows = 0;
    std::optional<CorruptionKind> corruption_kind;
    unsigned retries = 0;
    std::string error;
};

struct RunReport {
    PipelineKind kind = PipelineKind::Meta;
    std::vector<FileRun> files;

    bool any_corruption() const;
    bool any_failure() const;
    std::string to_json() const;
};

struct RunOptions {
    std::filesystem::path output_dir;  // meta/ or headers/ is created below it
    std::uint64_t chunk_bytes = kDefaultChunkBytes;
    unsigned import_parallelism = kDefaultImportParallelism;
    std::string table_name = "pcap_drill";
    unsigned parallel = 1;  // files processed at once; 1 is strictly sequential
};

/// Runs one sub-pipeline over the selection. Files whose outputs already
/// exist are skipped, so an interrupted run can simply be repeated. A failing
/// file is retried once and never aborts the run.
RunReport run_pipeline(PipelineKind kind, const std::vector<std::filesystem::path>& selection,
                       const RunOptions& options);

struct AnalyzeOptions {
    std::filesystem::path output_dir;  // reads meta/ and headers/, writes analysis/
    Timestamp from;
    Timestamp to;
    Bucket bucket = Bucket::Month;
    double height_factor = kDefaultHeightFactor;
    std::size_t min_distance = kDefaultMinDistance;
    std::size_t top_n = 10;
    std::vector<AddressSpaceEpoch> timeline;
    std::optional<std::filesystem::path> geo_table;
};

struct AnalyzeResult {
    std::size_t summaries = 0;
    std::size_t header_files = 0;
    std::vector<std::filesystem::path> written;
    std::vector<std::string> notes;
};

/// Throws IoError when outputs cannot be written.
AnalyzeResult analyze(const AnalyzeOptions& options);

struct PlotBundle {
    std::vector<std::filesystem::path> written;
    std::vector<std::string> omitted;
};

/// Collects analysis and inventory outputs into `<output_dir>/plots` with a
/// manifest of axes and units. Missing inputs are omitted and noted.
PlotBundle emit_plot_data(const std::filesystem::path& output_dir);

/// Writes `<output_dir>/inventory/`: outage_report.txt, outages_per_year.csv,
/// missing.txt and corrupted.csv.
OutageReport write_inventory_outputs(const ArchiveInventory& inventory,
                                     const std::filesystem::path& output_dir);

/// Writes a file via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace telescope
