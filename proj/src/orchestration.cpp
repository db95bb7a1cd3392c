#include "telescope/orchestration.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "telescope/errors.hpp"
#include "telescope/header_pipeline.hpp"
#include "telescope/metadata_pipeline.hpp"

namespace telescope {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kIoBlock = 1 << 20;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

// "2024-06-01.12.pcap.gz" -> "2024-06-01.12"
std::string capture_stem(const CaptureFileName& name) {
    auto rendered = name.render();
    return rendered.substr(0, rendered.size() - std::string_view(".pcap.gz").size());
}

std::vector<fs::path> sorted_files_with_suffix(const fs::path& dir, std::string_view suffix) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename().string().ends_with(suffix)) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string number(double v) {
    return fmt::format("{}", v);
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<char> block(kIoBlock);
    uLong crc = crc32(0L, Z_NULL, 0);
    while (in) {
        in.read(block.data(), static_cast<std::streamsize>(block.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        crc = crc32_z(crc, reinterpret_cast<const Bytef*>(block.data()), got);
    }
    if (in.bad()) throw IoError("read failed for " + path.string());
    return static_cast<std::uint32_t>(crc);
}

namespace {

fs::path sidecar_for(const fs::path& staged) {
    return fs::path(staged.string() + ".crc32");
}

std::optional<std::uint32_t> read_sidecar(const fs::path& staged) {
    std::ifstream in(sidecar_for(staged));
    if (!in) return std::nullopt;
    std::string hex;
    in >> hex;
    try {
        return static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_sidecar(const fs::path& staged, std::uint32_t crc) {
    write_file_atomic(sidecar_for(staged), fmt::format("{:08x}\n", crc));
}

// Copies src to dst, returning the CRC-32 of the bytes read from src.
std::uint32_t copy_with_crc(const fs::path& src, const fs::path& dst) {
    std::ifstream in(src, std::ios::binary);
    if (!in) throw IoError("cannot read " + src.string());
    std::ofstream out(dst, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + dst.string());
    std::vector<char> block(kIoBlock);
    uLong crc = crc32(0L, Z_NULL, 0);
    while (in) {
        in.read(block.data(), static_cast<std::streamsize>(block.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        crc = crc32_z(crc, reinterpret_cast<const Bytef*>(block.data()), got);
        out.write(block.data(), static_cast<std::streamsize>(got));
    }
    if (in.bad() || !out) throw IoError("copy failed: " + src.string() + " -> " + dst.string());
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

StageResult stage(const std::vector<fs::path>& files, const fs::path& staging_dir) {
    std::error_code ec;
    fs::create_directories(staging_dir, ec);
    if (ec) throw IoError("cannot create staging dir " + staging_dir.string() + ": " + ec.message());

    StageResult result;
    std::vector<std::size_t> pending;
    std::uint64_t pending_bytes = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& src = files[i];
        const auto dst = staging_dir / src.filename();
        result.staged.push_back(dst);
        const auto src_size = fs::file_size(src, ec);
        if (ec) throw IoError("cannot stat " + src.string() + ": " + ec.message());
        const auto dst_size = fs::file_size(dst, ec);
        if (!ec && dst_size == src_size) {
            const auto recorded = read_sidecar(dst);
            const auto actual = file_crc32(dst);
            const auto expected = recorded ? *recorded : file_crc32(src);
            if (actual != expected) {
                throw ChecksumMismatch(dst.filename().string(),
                                       fmt::format("staged crc32 {:08x}, expected {:08x}", actual,
                                                   expected));
            }
            if (!recorded) write_sidecar(dst, actual);
            ++result.skipped;
            continue;
        }
        pending.push_back(i);
        pending_bytes += src_size;
    }

    const auto space = fs::space(staging_dir, ec);
    if (!ec && space.available < pending_bytes) {
        throw InsufficientSpace(fmt::format("staging needs {} bytes but {} has {} available",
                                            pending_bytes, staging_dir.string(), space.available));
    }

    for (auto i : pending) {
        const auto& src = files[i];
        const auto& dst = result.staged[i];
        const auto tmp = fs::path(dst.string() + ".partial");
        const auto source_crc = copy_with_crc(src, tmp);
        const auto copy_crc = file_crc32(tmp);
        if (copy_crc != source_crc) {
            fs::remove(tmp, ec);
            throw ChecksumMismatch(dst.filename().string(),
                                   fmt::format("copy crc32 {:08x}, source {:08x}", copy_crc, source_crc));
        }
        fs::rename(tmp, dst, ec);
        if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
        write_sidecar(dst, copy_crc);
        ++result.copied;
    }
    return result;
}

std::string_view to_string(FileStatus status) {
    switch (status) {
    case FileStatus::Success: return "success";
    case FileStatus::Corrupted: return "corrupted";
    case FileStatus::Failed: return "failed";
    case FileStatus::Skipped: break;
    }
    return "skipped";
}

bool RunReport::any_corruption() const {
    return std::any_of(files.begin(), files.end(),
                       [](const FileRun& f) { return f.status == FileStatus::Corrupted; });
}

bool RunReport::any_failure() const {
    return std::any_of(files.begin(), files.end(),
                       [](const FileRun& f) { return f.status == FileStatus::Failed; });
}

std::string RunReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["pipeline"] = kind == PipelineKind::Meta ? "meta" : "headers";
    doc["files"] = nlohmann::ordered_json::array();
    for (const auto& f : files) {
        nlohmann::ordered_json entry;
        entry["file"] = f.file;
        entry["status"] = to_string(f.status);
        entry["duration_ms"] = f.duration_ms;
        entry["rows"] = f.rows;
        entry["corruption_kind"] =
            f.corruption_kind ? nlohmann::ordered_json(std::string(to_string(*f.corruption_kind)))
                              : nlohmann::ordered_json(nullptr);
        entry["retries"] = f.retries;
        if (!f.error.empty()) entry["error"] = f.error;
        doc["files"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

namespace {

struct FileOutcome {
    FileRun run;
    std::string line_protocol;  // meta only
};

FileOutcome process_meta(const fs::path& capture, const fs::path& dir) {
    FileOutcome outcome;
    const auto name = parse_capture_file_name(capture.filename().string());
    const auto stem = capture_stem(name);
    const auto csv_path = dir / (stem + ".meta.csv");
    if (fs::exists(csv_path)) {
        outcome.run.status = FileStatus::Skipped;
        return outcome;
    }
    const auto result = summarize_capture(capture);
    auto for_series = result.summary;
    if (!for_series.time) for_series.time = name.start();
    outcome.line_protocol = summary_to_line_protocol(for_series);
    write_file_atomic(dir / (stem + ".lp"), outcome.line_protocol + "\n");
    // The CSV is the completion marker, so it is written last.
    write_file_atomic(csv_path, std::string(kSummaryCsvHeader) + "\n" + summary_to_csv(result.summary) + "\n");
    outcome.run.rows = result.summary.num_packets;
    if (result.corruption) {
        outcome.run.status = FileStatus::Corrupted;
        outcome.run.corruption_kind = result.corruption->kind;
    }
    return outcome;
}

FileOutcome process_headers(const fs::path& capture, const fs::path& dir, const RunOptions& options) {
    FileOutcome outcome;
    const auto name = parse_capture_file_name(capture.filename().string());
    const auto stem = capture_stem(name);
    const auto script = dir / ("import_" + stem + ".sql");
    if (fs::exists(script)) {
        outcome.run.status = FileStatus::Skipped;
        return outcome;
    }
    const auto csv = dir / (stem + ".headers.csv");
    const auto stats = extract_headers_to_csv(capture, csv);
    const auto chunks = split_csv(csv, options.chunk_bytes);
    std::string sql;
    for (const auto& statement : emit_bulk_load(chunks, options.table_name)) sql += statement + "\n\n";
    write_file_atomic(script, sql);
    outcome.run.rows = stats.rows;
    if (stats.corruption) {
        outcome.run.status = FileStatus::Corrupted;
        outcome.run.corruption_kind = stats.corruption->kind;
    }
    return outcome;
}

void rewrite_import_manifest(const fs::path& dir, const RunOptions& options) {
    std::vector<std::pair<fs::path, std::vector<fs::path>>> scripts;
    for (const auto& script : sorted_files_with_suffix(dir, ".sql")) {
        const auto fname = script.filename().string();
        if (!fname.starts_with("import_")) continue;
        const auto stem = fname.substr(7, fname.size() - 7 - 4);
        const auto prefix = stem + ".headers.csv.part";
        std::vector<fs::path> chunks;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().filename().string().starts_with(prefix)) chunks.push_back(entry.path());
        }
        std::sort(chunks.begin(), chunks.end());
        scripts.emplace_back(script, std::move(chunks));
    }
    write_file_atomic(dir / "import_manifest.txt",
                      render_import_manifest(scripts, options.import_parallelism));
}

}  // namespace

RunReport run_pipeline(PipelineKind kind, const std::vector<fs::path>& selection,
                       const RunOptions& options) {
    RunReport report;
    report.kind = kind;
    const auto dir = fs::absolute(options.output_dir / (kind == PipelineKind::Meta ? "meta" : "headers"));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<FileOutcome> outcomes(selection.size());
    auto run_one = [&](std::size_t i) {
        const auto started = std::chrono::steady_clock::now();
        FileOutcome outcome;
        for (unsigned attempt = 0; attempt < 2; ++attempt) {
            try {
                outcome = kind == PipelineKind::Meta ? process_meta(selection[i], dir)
                                                     : process_headers(selection[i], dir, options);
                outcome.run.retries = attempt;
                break;
            } catch (const std::exception& e) {
                outcome = FileOutcome{};
                outcome.run.status = FileStatus::Failed;
                outcome.run.error = e.what();
                outcome.run.retries = attempt;
            }
        }
        outcome.run.file = selection[i].filename().string();
        outcome.run.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - started)
                                      .count();
        outcomes[i] = std::move(outcome);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.parallel,
                                                             static_cast<unsigned>(selection.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < selection.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < selection.size(); i = next++) run_one(i);
            });
        }
    }

    if (kind == PipelineKind::Meta) {
        std::ofstream combined(dir / "metadata.lp", std::ios::binary | std::ios::app);
        if (!combined) throw IoError("cannot open " + (dir / "metadata.lp").string());
        LineProtocolBatcher batcher([&](std::string_view batch) {
            combined.write(batch.data(), static_cast<std::streamsize>(batch.size()));
            combined.flush();
        });
        for (const auto& o : outcomes) {
            if (!o.line_protocol.empty()) batcher.add(o.line_protocol);
        }
        batcher.flush();
        if (!combined) throw IoError("write failed for metadata.lp");
    } else {
        write_file_atomic(dir / "schema.sql", schema_sql(options.table_name));
        rewrite_import_manifest(dir, options);
    }

    for (auto& o : outcomes) report.files.push_back(std::move(o.run));
    write_file_atomic(dir / "run_report.json", report.to_json());
    return report;
}

OutageReport write_inventory_outputs(const ArchiveInventory& inventory, const fs::path& output_dir) {
    const auto dir = output_dir / "inventory";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    auto report = outage_report(inventory);
    write_file_atomic(dir / "outage_report.txt", report.text);
    write_file_atomic(dir / "outages_per_year.csv", report.per_year_csv);
    std::string missing;
    for (const auto& name : inventory.missing) missing += name.render() + "\n";
    write_file_atomic(dir / "missing.txt", missing);
    std::string corrupted = "file,kind,byte_offset,packets_recovered\n";
    for (const auto& c : inventory.corrupted) {
        corrupted += fmt::format("{},{},{},{}\n", c.file_name, to_string(c.kind),
                                 c.byte_offset ? std::to_string(*c.byte_offset) : std::string{},
                                 c.packets_recovered);
    }
    write_file_atomic(dir / "corrupted.csv", corrupted);
    return report;
}

AnalyzeResult analyze(const AnalyzeOptions& options) {
    AnalyzeResult result;
    const auto out_dir = options.output_dir / "analysis";
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    // Outputs from a previous analysis must not survive into this one.
    for (const auto& stale : sorted_files_with_suffix(out_dir, ".csv")) fs::remove(stale);

    auto in_range = [&](const CaptureFileName& name) {
        return name.start() >= options.from && name.start() < options.to;
    };
    auto emit = [&](const std::string& file, const std::string& content) {
        write_file_atomic(out_dir / file, content);
        result.written.push_back(out_dir / file);
    };

    std::vector<CaptureSummary> summaries;
    for (const auto& path : sorted_files_with_suffix(options.output_dir / "meta", ".meta.csv")) {
        std::istringstream in(read_file(path));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto s = parse_summary_csv(line);
            if (in_range(s.file_name)) summaries.push_back(std::move(s));
        }
    }
    result.summaries = summaries.size();

    const int first_year = static_cast<int>(date_of(options.from).year());
    const int last_year = static_cast<int>(date_of(options.to - std::chrono::microseconds{1}).year());

    if (summaries.empty()) {
        result.notes.push_back("no metadata summaries in range; series and peaks skipped");
    } else {
        const auto series_set = aggregate(summaries, options.bucket);
        std::string peaks_csv = "measurement,index,bucket,value,threshold\n";
        for (auto measurement : kMeasurements) {
            const auto& series = series_set.at(std::string(measurement));
            std::string csv = "bucket,value\n";
            for (const auto& s : series.samples()) {
                csv += format_timestamp(s.bucket_start) + "," + number(s.value) + "\n";
            }
            emit(fmt::format("series_{}.csv", measurement), csv);

            if (series.size() >= 3) {
                for (const auto& p : find_peaks(series, options.height_factor, options.min_distance)) {
                    peaks_csv += fmt::format("{},{},{},{},{}\n", measurement, p.index,
                                             format_timestamp(p.bucket_start), number(p.value),
                                             number(p.threshold));
                }
            }

            if (series.scales_with_address_space() && !options.timeline.empty()) {
                try {
                    const auto normalized = normalize(series, options.timeline);
                    std::string ncsv = "bucket,value\n";
                    for (const auto& s : normalized.samples()) {
                        ncsv += format_timestamp(s.bucket_start) + "," + number(s.value) + "\n";
                    }
                    emit(fmt::format("series_{}_normalized.csv", measurement), ncsv);
                } catch (const UncoveredTimestamp& e) {
                    result.notes.push_back(fmt::format("{} not normalized: {}", measurement, e.what()));
                }
            }
        }
        emit("peaks.csv", peaks_csv);
        std::string ppy = "year,peaks\n";
        for (const auto& [year, count] : peaks_per_year(series_set, first_year, last_year,
                                                        options.height_factor, options.min_distance)) {
            ppy += fmt::format("{},{}\n", year, count);
        }
        emit("peaks_per_year.csv", ppy);
    }

    PortTally ports(Bucket::Month);
    SourceTally sources;
    ClassifiedCounts classes;
    for (const auto& path : sorted_files_with_suffix(options.output_dir / "headers", ".headers.csv")) {
        const auto fname = path.filename().string();
        const auto name = try_parse_capture_file_name(
            fname.substr(0, fname.size() - std::string_view(".headers.csv").size()) + ".pcap.gz");
        if (!name || !in_range(*name)) continue;
        ++result.header_files;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read " + path.string());
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto record = parse_header_row(line);
            ports.add(record);
            sources.add(record);
            classes.add(classify(record));
        }
    }

    if (result.header_files == 0) {
        result.notes.push_back("no packet-header CSVs in range; rankings skipped");
    } else {
        std::string top_ports_csv = "rank,port,total,bucket,count\n";
        std::size_t rank = 0;
        for (const auto& r : ports.top(options.top_n)) {
            ++rank;
            for (const auto& [bucket, count] : r.per_bucket) {
                top_ports_csv += fmt::format("{},{},{},{},{}\n", rank, r.port, r.total,
                                             format_timestamp(bucket), count);
            }
        }
        emit("top_ports.csv", top_ports_csv);

        const GeoTable geo = options.geo_table ? GeoTable::load(*options.geo_table) : GeoTable{};
        const auto top = sources.top(options.top_n, &geo);
        std::string top_sources_csv = "rank,src_ip,count,region\n";
        rank = 0;
        for (const auto& r : top.ranking) {
            top_sources_csv += fmt::format("{},{},{},{}\n", ++rank, r.ip.to_string(), r.count,
                                           r.region.value_or(std::string(GeoTable::kUnknownRegion)));
        }
        emit("top_sources.csv", top_sources_csv);

        std::string heatmap = "region,count\n";
        for (const auto& [region, count] : top.regions) heatmap += fmt::format("{},{}\n", region, count);
        emit("heatmap_regions.csv", heatmap);

        emit("classification.csv",
             fmt::format("class,count\nscan,{}\nbackscatter,{}\nother,{}\ntotal,{}\n", classes.scan,
                         classes.backscatter, classes.other, classes.total()));
    }
    return result;
}

namespace {

struct PlotSpec {
    std::string output;
    fs::path input;
    std::string x_axis;
    std::string y_axis;
    std::string unit;
};

}  // namespace

PlotBundle emit_plot_data(const fs::path& output_dir) {
    const auto analysis = output_dir / "analysis";
    const auto plots = output_dir / "plots";
    std::error_code ec;
    fs::create_directories(plots, ec);
    if (ec) throw IoError("cannot create " + plots.string() + ": " + ec.message());

    static constexpr std::string_view kUnits[] = {"Mpps", "bytes", "Mbps", "GB", "packets", "GB"};
    std::vector<PlotSpec> specs;
    for (std::size_t i = 0; i < kMeasurements.size(); ++i) {
        const auto m = std::string(kMeasurements[i]);
        specs.push_back({fmt::format("panel_{}_{}.csv", static_cast<char>('A' + i), m),
                         analysis / ("series_" + m + ".csv"), "bucket", m, std::string(kUnits[i])});
    }
    specs.push_back({"peaks_per_year.csv", analysis / "peaks_per_year.csv", "year", "peaks", "count"});
    specs.push_back({"missing_per_year.csv", output_dir / "inventory" / "outages_per_year.csv", "year",
                     "missing,corrupted", "files"});
    specs.push_back({"top_ports.csv", analysis / "top_ports.csv", "bucket", "count", "packets"});
    specs.push_back({"region_heatmap.csv", analysis / "heatmap_regions.csv", "region", "count", "packets"});

    PlotBundle bundle;
    std::string manifest = "file\tx_axis\ty_axis\tunit\tsource\n";
    for (const auto& spec : specs) {
        const auto target = plots / spec.output;
        if (!fs::exists(spec.input)) {
            fs::remove(target, ec);
            bundle.omitted.push_back(spec.output);
            manifest += fmt::format("# omitted {}: missing input {}\n", spec.output,
                                    fs::relative(spec.input, output_dir).generic_string());
            continue;
        }
        write_file_atomic(target, read_file(spec.input));
        bundle.written.push_back(target);
        manifest += fmt::format("{}\t{}\t{}\t{}\t{}\n", spec.output, spec.x_axis, spec.y_axis, spec.unit,
                                fs::relative(spec.input, output_dir).generic_string());
    }
    write_file_atomic(plots / "manifest.txt", manifest);
    bundle.written.push_back(plots / "manifest.txt");
    return bundle;
}

}  // namespace telescope
