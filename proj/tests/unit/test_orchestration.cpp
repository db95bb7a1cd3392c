#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include <json.hpp>

#include "fixtures.hpp"
#include "telescope/errors.hpp"
#include "telescope/orchestration.hpp"
#include "telescope/synthetic.hpp"

using namespace telescope;
using namespace std::chrono;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> write_hours(const fs::path& dir, Timestamp start, int count, std::size_t packets) {
    fs::create_directories(dir);
    std::vector<fs::path> out;
    for (int h = 0; h < count; ++h) {
        const auto name = CaptureFileName::containing(start + hours{h});
        out.push_back(dir / name.render());
        write_synthetic_capture(out.back(), name, packets, static_cast<std::uint64_t>(h) + 1);
    }
    return out;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = fixtures::read_bytes(e.path());
    }
    return files;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(TELESCOPE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("orchestration") {

TEST_CASE("staging copies once and verifies checksums") {
    fixtures::TempDir dir("stage");
    const auto files = write_hours(dir / "archive", start_of(2024y / June / 1), 2, 20);
    const auto staging = dir / "staging";

    auto first = stage(files, staging);
    CHECK(first.copied == 2);
    CHECK(first.skipped == 0);
    REQUIRE(first.staged.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(fixtures::read_bytes(first.staged[i]) == fixtures::read_bytes(files[i]));
        CHECK(fs::exists(first.staged[i].string() + ".crc32"));
        CHECK(file_crc32(first.staged[i]) == file_crc32(files[i]));
    }

    auto second = stage(files, staging);
    CHECK(second.copied == 0);
    CHECK(second.skipped == 2);

    // Same size, different bytes.
    auto bytes = fixtures::read_bytes(first.staged[1]);
    bytes[bytes.size() / 2] ^= 0x5a;
    fixtures::write_bytes(first.staged[1], bytes);
    try {
        stage(files, staging);
        FAIL("expected a checksum mismatch");
    } catch (const ChecksumMismatch& e) {
        CHECK(e.file() == files[1].filename().string());
    }

    // A partial copy of a different size is replaced.
    fixtures::TempDir other("stage");
    fs::create_directories(other / "staging");
    fixtures::write_bytes(other / "staging" / files[0].filename().string(), "short");
    CHECK(stage(files, other / "staging").copied == 2);

    CHECK_THROWS_AS(stage({dir / "archive/absent.pcap.gz"}, staging), IoError);
}

TEST_CASE("staging refuses a selection that cannot fit") {
    fixtures::TempDir dir("stage");
    const auto huge = dir / "2024-06-01.00.pcap.gz";
    { std::ofstream touch(huge); }
    fs::resize_file(huge, fs::space(dir.path()).available + 4096);  // sparse
    CHECK_THROWS_AS(stage({huge}, dir / "staging"), InsufficientSpace);
    CHECK(fs::is_empty(dir / "staging"));
}

TEST_CASE("metadata run over three files") {
    fixtures::TempDir dir("run");
    const auto files = write_hours(dir / "in", start_of(2024y / June / 1), 3, 50);
    RunOptions options;
    options.output_dir = dir / "out";
    const auto report = run_pipeline(PipelineKind::Meta, files, options);
    REQUIRE(report.files.size() == 3);
    for (const auto& f : report.files) {
        CHECK(f.status == FileStatus::Success);
        CHECK(f.retries == 0);
    }
    CHECK(fs::exists(dir / "out/meta/2024-06-01.00.meta.csv"));
    CHECK(fs::exists(dir / "out/meta/2024-06-01.02.lp"));
    const auto lp = fixtures::read_bytes(dir / "out/meta/metadata.lp");
    CHECK(std::count(lp.begin(), lp.end(), '\n') == 3);

    const auto json = nlohmann::json::parse(fixtures::read_bytes(dir / "out/meta/run_report.json"));
    CHECK(json["pipeline"] == "meta");
    CHECK(json["files"].size() == 3);
    CHECK(json["files"][0]["file"] == "2024-06-01.00.pcap.gz");
    CHECK(json["files"][0]["corruption_kind"].is_null());

    // A repeated run finds everything done.
    const auto again = run_pipeline(PipelineKind::Meta, files, options);
    for (const auto& f : again.files) CHECK(f.status == FileStatus::Skipped);
}

TEST_CASE("header run keeps going past damaged and unreadable files") {
    fixtures::TempDir dir("run");
    auto files = write_hours(dir / "in", start_of(2024y / June / 1), 3, 300);
    damage_capture(files[1], CorruptionKind::TruncatedPacket);
    files.push_back(dir / "in/2024-06-01.07.pcap.gz");  // does not exist
    RunOptions options;
    options.output_dir = dir / "out";
    options.chunk_bytes = 4096;
    const auto report = run_pipeline(PipelineKind::Headers, files, options);
    REQUIRE(report.files.size() == 4);
    CHECK(report.files[0].status == FileStatus::Success);
    CHECK(report.files[1].status == FileStatus::Corrupted);
    CHECK(report.files[1].corruption_kind == CorruptionKind::TruncatedPacket);
    CHECK(report.files[1].rows > 0);
    CHECK(report.files[3].status == FileStatus::Failed);
    CHECK(report.files[3].retries == 1);
    CHECK_FALSE(report.files[3].error.empty());
    CHECK(report.any_corruption());
    CHECK(report.any_failure());

    const auto headers = dir / "out/headers";
    CHECK(fs::exists(headers / "import_2024-06-01.00.sql"));
    CHECK(fs::exists(headers / "2024-06-01.00.headers.csv.part001"));
    CHECK(fs::exists(headers / "schema.sql"));
    const auto manifest = fixtures::read_bytes(headers / "import_manifest.txt");
    CHECK(manifest.find("import_2024-06-01.02.sql\t2024-06-01.02.headers.csv.part000") != std::string::npos);
    const auto sql = fixtures::read_bytes(headers / "import_2024-06-01.00.sql");
    CHECK(sql.find("'" + (fs::absolute(headers) / "2024-06-01.00.headers.csv.part000").string() + "'") !=
          std::string::npos);
}

TEST_CASE("empty selection and parallel runs") {
    fixtures::TempDir dir("run");
    RunOptions options;
    options.output_dir = dir / "out";
    CHECK(run_pipeline(PipelineKind::Meta, {}, options).files.empty());

    const auto files = write_hours(dir / "in", start_of(2024y / June / 1), 6, 40);
    options.output_dir = dir / "seq";
    run_pipeline(PipelineKind::Headers, files, options);
    options.output_dir = dir / "par";
    options.parallel = 3;
    const auto report = run_pipeline(PipelineKind::Headers, files, options);
    CHECK(report.files[5].file == "2024-06-01.05.pcap.gz");
    auto seq = snapshot(dir / "seq/headers");
    auto par = snapshot(dir / "par/headers");
    seq.erase("run_report.json");
    par.erase("run_report.json");
    std::map<std::string, std::string> seq_csv, par_csv;
    for (const auto& [k, v] : seq) {
        if (k.find(".headers.csv") != std::string::npos) seq_csv[k] = v;
    }
    for (const auto& [k, v] : par) {
        if (k.find(".headers.csv") != std::string::npos) par_csv[k] = v;
    }
    CHECK(seq_csv == par_csv);
    CHECK(seq_csv.size() >= 6);
}

TEST_CASE("analysis and plot data") {
    fixtures::TempDir dir("an");
    SyntheticArchiveOptions synth;
    synth.root = dir / "archive";
    synth.start = start_of(2024y / June / 1);
    synth.hours = 72;
    synth.packets_per_file = 30;
    synth.holes = 2;
    generate_archive(synth);

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir / "archive")) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    RunOptions run;
    run.output_dir = dir / "out";
    run_pipeline(PipelineKind::Meta, files, run);
    run_pipeline(PipelineKind::Headers, files, run);

    // Nothing but headers before the analysis exists.
    auto early = emit_plot_data(dir / "out");
    CHECK(early.written.size() == 1);
    CHECK(early.omitted.size() == 10);

    AnalyzeOptions options;
    options.output_dir = dir / "out";
    options.from = synth.start;
    options.to = synth.start + hours{72};
    options.bucket = Bucket::Hour;
    options.timeline = {{2018y / January / 1, std::nullopt, 475136, "ORION"}};
    const auto result = analyze(options);
    CHECK(result.summaries == 70);
    CHECK(result.header_files == 70);
    const auto analysis = dir / "out/analysis";
    for (auto f : {"series_total_packets.csv", "series_total_packets_normalized.csv", "peaks.csv",
                   "peaks_per_year.csv", "top_ports.csv", "top_sources.csv", "heatmap_regions.csv",
                   "classification.csv"}) {
        CHECK_MESSAGE(fs::exists(analysis / f), f);
    }
    CHECK_FALSE(fs::exists(analysis / "series_avg_pkt_size_bytes_normalized.csv"));
    const auto series = fixtures::read_bytes(analysis / "series_total_packets.csv");
    CHECK(std::count(series.begin(), series.end(), '\n') == 71);
    CHECK(series.starts_with("bucket,value\n2024-06-01T00:00:00Z,"));
    CHECK(fixtures::read_bytes(analysis / "peaks_per_year.csv").starts_with("year,peaks\n2024,"));
    const auto classes = fixtures::read_bytes(analysis / "classification.csv");
    CHECK(classes.starts_with("class,count\nscan,"));

    ArchiveInventory inv;
    inv.range_start = options.from;
    inv.range_end = options.to;
    inv.per_year_missing = {{2024, 2}};
    inv.per_year_corrupted = {{2024, 0}};
    write_inventory_outputs(inv, dir / "out");

    const auto bundle = emit_plot_data(dir / "out");
    CHECK(bundle.omitted.empty());
    CHECK(bundle.written.size() == 11);
    const auto manifest = fixtures::read_bytes(dir / "out/plots/manifest.txt");
    CHECK(manifest.find("panel_E_total_packets.csv\tbucket\ttotal_packets\tpackets\tanalysis/series_total_packets.csv") !=
          std::string::npos);
    CHECK(fixtures::read_bytes(dir / "out/plots/missing_per_year.csv") == "year,missing,corrupted\n2024,2,0\n");

    const auto first = snapshot(dir / "out/plots");
    analyze(options);
    emit_plot_data(dir / "out");
    CHECK(snapshot(dir / "out/plots") == first);

    // An empty range writes nothing and says so.
    options.from = start_of(2030y / January / 1);
    options.to = start_of(2030y / February / 1);
    const auto empty = analyze(options);
    CHECK(empty.written.empty());
    CHECK(empty.notes.size() == 2);
}

TEST_CASE("atomic writes replace files whole") {
    fixtures::TempDir dir("atomic");
    write_file_atomic(dir / "a.txt", "one");
    write_file_atomic(dir / "a.txt", "two");
    CHECK(fixtures::read_bytes(dir / "a.txt") == "two");
    CHECK(snapshot(dir.path()).size() == 1);
    CHECK_THROWS_AS(write_file_atomic(dir / "missing/dir/a.txt", "x"), IoError);
}

TEST_CASE("command-line exit codes") {
    fixtures::TempDir dir("cli");
    SyntheticArchiveOptions synth;
    synth.root = dir / "archive";
    synth.start = start_of(2024y / June / 1);
    synth.hours = 6;
    synth.packets_per_file = 20;
    generate_archive(synth);
    const auto config = dir / "telescope.conf";
    fixtures::write_bytes(config,
                          "archive_root = archive\nstaging_dir = staging\noutput_dir = out\n"
                          "[address_space]\n2018-01-01, -, 475136, ORION\n");
    const auto c = "--config " + config.string();
    const std::string range = " --from 2024-06-01 --to 2024-06-01T06";

    CHECK(run_cli("") == 1);
    CHECK(run_cli("inventory" + range) == 1);
    CHECK(run_cli("inventory " + c) == 1);
    CHECK(run_cli("inventory " + c + range) == 0);
    CHECK(run_cli("sample " + c + range + " --hour 3") == 0);
    CHECK(run_cli("sample " + c + range + " --hour 25") == 1);
    CHECK(run_cli("stage " + c + range) == 0);
    CHECK(run_cli("meta " + c + range) == 0);
    CHECK(run_cli("headers " + c + range + " --parallel 2") == 0);
    CHECK(run_cli("analyze " + c + range + " --bucket hour") == 0);
    CHECK(run_cli("analyze " + c + range + " --bucket week") == 1);
    CHECK(run_cli("plotdata " + c) == 0);
    CHECK(fs::exists(dir / "out/plots/manifest.txt"));

    damage_capture(dir / "archive/2024/06/2024-06-01.04.pcap.gz", CorruptionKind::BadPcapMagic);
    CHECK(run_cli("inventory " + c + range) == 3);
    fs::remove(dir / "archive/2024/06/2024-06-01.05.pcap.gz");
    CHECK(run_cli("sample " + c + range + " --hour 5") == 3);

    fixtures::write_bytes(config, "archive_root = nowhere\nstaging_dir = staging\noutput_dir = out\n");
    CHECK(run_cli("inventory " + c + range) == 2);
    CHECK(run_cli("inventory --config " + (dir / "absent.conf").string() + range) == 1);
}

}  // TEST_SUITE
