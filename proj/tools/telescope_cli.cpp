#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "telescope/archive_inventory.hpp"
#include "telescope/config.hpp"
#include "telescope/errors.hpp"
#include "telescope/orchestration.hpp"

namespace fs = std::filesystem;
using namespace telescope;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kCorruption = 3 };

struct Common {
    std::string config;
    std::string from;
    std::string to;
};

struct Sampling {
    std::string weekday;
    int hour = -1;
    unsigned week_stride = 1;
    std::vector<std::string> dates;

    bool requested() const { return !weekday.empty() || hour >= 0 || !dates.empty(); }

    SamplingPolicy policy() const {
        SamplingPolicy p;
        if (!weekday.empty()) {
            p.weekday = parse_weekday(weekday);
            if (!p.weekday) throw InvalidPolicy("unknown weekday: " + weekday);
        }
        if (hour >= 0) p.hour = hour;
        p.week_stride = week_stride;
        for (const auto& d : dates) {
            const auto parsed = parse_date(d);
            if (!parsed) throw InvalidPolicy("bad date: " + d);
            p.explicit_dates.push_back(*parsed);
        }
        p.validate();
        return p;
    }
};

Timestamp required_time(const std::string& text, const char* flag) {
    if (text.empty()) throw ConfigError(fmt::format("{} is required", flag));
    const auto t = parse_timestamp(text);
    if (!t) throw ConfigError(fmt::format("cannot parse {} value '{}'", flag, text));
    return *t;
}

// Archive-named files directly under dir (recursively when deep), in name order.
std::map<CaptureFileName, fs::path> list_captures(const fs::path& dir, Timestamp from, Timestamp to,
                                                  bool deep) {
    std::map<CaptureFileName, fs::path> found;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return found;
    auto consider = [&](const fs::directory_entry& entry) {
        if (!entry.is_regular_file()) return;
        const auto name = try_parse_capture_file_name(entry.path().filename().string());
        if (!name || name->start() < from || name->start() >= to) return;
        auto [pos, inserted] = found.emplace(*name, entry.path());
        if (!inserted && entry.path() < pos->second) pos->second = entry.path();
    };
    if (deep) {
        for (const auto& e : fs::recursive_directory_iterator(dir)) consider(e);
    } else {
        for (const auto& e : fs::directory_iterator(dir)) consider(e);
    }
    return found;
}

std::vector<fs::path> apply_sampling(const std::map<CaptureFileName, fs::path>& files,
                                     const Sampling& sampling, Timestamp from) {
    std::vector<fs::path> out;
    std::optional<SamplingPolicy> policy;
    if (sampling.requested()) policy = sampling.policy();
    for (const auto& [name, path] : files) {
        if (!policy || policy->matches(name, from)) out.push_back(path);
    }
    return out;
}

int print_run(const RunReport& report, const char* what) {
    std::size_t ok = 0, corrupted = 0, failed = 0, skipped = 0;
    for (const auto& f : report.files) {
        switch (f.status) {
        case FileStatus::Success: ++ok; break;
        case FileStatus::Corrupted: ++corrupted; break;
        case FileStatus::Failed: ++failed; break;
        case FileStatus::Skipped: ++skipped; break;
        }
        if (f.status == FileStatus::Failed) std::cerr << f.file << ": " << f.error << "\n";
    }
    fmt::print("{}: {} files, {} ok, {} corrupted, {} failed, {} skipped\n", what, report.files.size(),
               ok, corrupted, failed, skipped);
    if (report.any_failure()) return kIo;
    if (report.any_corruption()) return kCorruption;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Darknet telescope archive processing"};
    app.require_subcommand(1);

    Common common;
    Sampling sampling;
    unsigned parallel = 1;
    bool full_scan = false;
    std::string bucket_text = "month";
    std::size_t top_n = 10;
    double height_factor = kDefaultHeightFactor;
    std::size_t min_distance = kDefaultMinDistance;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Config file")->required();
        sub->add_option("--from", common.from, "Range start (YYYY-MM-DD[THH[:MM[:SS]]])");
        sub->add_option("--to", common.to, "Range end, exclusive");
    };
    auto add_sampling = [&](CLI::App* sub) {
        sub->add_option("--weekday", sampling.weekday, "Keep files on this weekday");
        sub->add_option("--hour", sampling.hour, "Keep files of this hour (0-23)");
        sub->add_option("--week-stride", sampling.week_stride, "Keep every Nth week");
        sub->add_option("--date", sampling.dates, "Keep files on these dates")->take_all();
    };

    auto* stage_cmd = app.add_subcommand("stage", "Copy archive files into the staging directory");
    add_common(stage_cmd);
    add_sampling(stage_cmd);

    auto* inventory_cmd = app.add_subcommand("inventory", "Find missing and corrupted archive files");
    add_common(inventory_cmd);
    inventory_cmd->add_flag("--full-scan", full_scan, "Decompress every file completely");

    auto* sample_cmd = app.add_subcommand("sample", "List the files a sampling policy selects");
    add_common(sample_cmd);
    add_sampling(sample_cmd);

    auto* meta_cmd = app.add_subcommand("meta", "Per-file metadata summaries and line protocol");
    auto* headers_cmd = app.add_subcommand("headers", "Per-packet header CSVs and import scripts");
    for (auto* sub : {meta_cmd, headers_cmd}) {
        add_common(sub);
        add_sampling(sub);
        sub->add_option("--parallel", parallel, "Files processed at once (default 1)")
            ->check(CLI::PositiveNumber);
    }

    auto* analyze_cmd = app.add_subcommand("analyze", "Series, peaks, rankings and classification");
    add_common(analyze_cmd);
    analyze_cmd->add_option("--bucket", bucket_text, "hour, day or month");
    analyze_cmd->add_option("--top", top_n, "Ranking length")->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--height-factor", height_factor, "Peak threshold as a multiple of the mean");
    analyze_cmd->add_option("--min-distance", min_distance, "Minimum samples between peaks");

    auto* plot_cmd = app.add_subcommand("plotdata", "Collect plot-ready CSVs");
    add_common(plot_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const auto config = load_config(common.config);

        if (*plot_cmd) {
            const auto bundle = emit_plot_data(config.output_dir);
            fmt::print("plotdata: {} files written to {}\n", bundle.written.size(),
                       (config.output_dir / "plots").string());
            for (const auto& o : bundle.omitted) fmt::print("omitted {}\n", o);
            return kOk;
        }

        const auto from = required_time(common.from, "--from");
        const auto to = required_time(common.to, "--to");
        if (to <= from) throw ConfigError("--to must be after --from");

        if (*inventory_cmd) {
            ScanOptions options;
            options.mode = full_scan ? ProbeMode::Full : ProbeMode::Fast;
            options.parallelism = config.probe_parallelism;
            const auto inventory = scan_archive(config.archive_root, from, to, options);
            const auto report = write_inventory_outputs(inventory, config.output_dir);
            std::cout << report.text;
            return report.total_missing + report.total_corrupted > 0 ? kCorruption : kOk;
        }

        if (*sample_cmd) {
            ScanOptions options;
            options.parallelism = config.probe_parallelism;
            const auto inventory = scan_archive(config.archive_root, from, to, options);
            const auto selection = select_files(inventory, sampling.policy());
            for (const auto& name : selection.selected) fmt::print("selected {}\n", name.render());
            for (const auto& name : selection.unavailable) fmt::print("unavailable {}\n", name.render());
            fmt::print("{} selected, {} unavailable\n", selection.selected.size(),
                       selection.unavailable.size());
            return selection.unavailable.empty() ? kOk : kCorruption;
        }

        if (*stage_cmd) {
            const auto files = apply_sampling(list_captures(config.archive_root, from, to, true), sampling, from);
            const auto result = stage(files, config.staging_dir);
            fmt::print("stage: {} copied, {} already staged\n", result.copied, result.skipped);
            return kOk;
        }

        if (*meta_cmd || *headers_cmd) {
            auto files = list_captures(config.staging_dir, from, to, false);
            if (files.empty()) files = list_captures(config.archive_root, from, to, true);
            RunOptions options;
            options.output_dir = config.output_dir;
            options.chunk_bytes = config.chunk_size_bytes;
            options.import_parallelism = config.import_parallelism;
            options.table_name = config.table_name;
            options.parallel = parallel;
            const auto kind = *meta_cmd ? PipelineKind::Meta : PipelineKind::Headers;
            const auto report = run_pipeline(kind, apply_sampling(files, sampling, from), options);
            return print_run(report, *meta_cmd ? "meta" : "headers");
        }

        if (*analyze_cmd) {
            AnalyzeOptions options;
            options.output_dir = config.output_dir;
            options.from = from;
            options.to = to;
            const auto bucket = parse_bucket(bucket_text);
            if (!bucket) throw ConfigError("--bucket must be hour, day or month");
            options.bucket = *bucket;
            options.height_factor = height_factor;
            options.min_distance = min_distance;
            options.top_n = top_n;
            options.timeline = config.timeline;
            options.geo_table = config.geo_table;
            const auto result = analyze(options);
            fmt::print("analyze: {} summaries, {} header files, {} outputs\n", result.summaries,
                       result.header_files, result.written.size());
            for (const auto& note : result.notes) fmt::print("note: {}\n", note);
            return kOk;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const InsufficientSpace& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ChecksumMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
