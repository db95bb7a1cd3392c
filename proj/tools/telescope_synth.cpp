// Generates a synthetic telescope archive with a matching config and geo table.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "telescope/errors.hpp"
#include "telescope/synthetic.hpp"

namespace fs = std::filesystem;
using namespace telescope;

namespace {

constexpr const char* kGeoTable =
    "prefix,region\n"
    "61.0.0.0/8,East Asia\n"
    "91.0.0.0/8,Eastern Europe\n"
    "103.0.0.0/8,South Asia\n"
    "185.0.0.0/8,Western Europe\n"
    "45.0.0.0/8,North America\n"
    "190.0.0.0/8,South America\n"
    "41.0.0.0/8,Africa\n";

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic telescope archive generator"};
    std::string out_dir;
    std::string from = "2024-01-01";
    SyntheticArchiveOptions options;
    app.add_option("--out", out_dir, "Directory for archive/, telescope.conf and geo.csv")->required();
    app.add_option("--from", from, "First hour (YYYY-MM-DD[THH])");
    app.add_option("--hours", options.hours, "Number of hourly files");
    app.add_option("--packets", options.packets_per_file, "Typical packets per file");
    app.add_option("--seed", options.seed, "Generator seed");
    app.add_option("--holes", options.holes, "Files to leave out");
    app.add_option("--corrupted", options.corrupted, "Files to damage");
    CLI11_PARSE(app, argc, argv);

    const auto start = parse_timestamp(from);
    if (!start) {
        std::cerr << "error: cannot parse --from '" << from << "'\n";
        return 1;
    }
    try {
        const fs::path root{out_dir};
        options.root = root / "archive";
        options.start = *start;
        const auto archive = generate_archive(options);

        write_text(root / "geo.csv", kGeoTable);
        write_text(root / "telescope.conf",
                   "archive_root = archive\n"
                   "staging_dir = staging\n"
                   "output_dir = run\n"
                   "geo_table = geo.csv\n"
                   "chunk_size_bytes = 65536\n"
                   "\n"
                   "[address_space]\n"
                   "2000-01-01, 2018-01-01, 16777216, /8\n"
                   "2018-01-01, -, 475136, ORION\n");

        fmt::print("{} files written, {} holes, {} damaged\n", archive.written.size(), archive.holes.size(),
                   archive.corrupted.size());
        for (const auto& name : archive.holes) fmt::print("hole {}\n", name.render());
        for (const auto& [name, kind] : archive.corrupted) {
            fmt::print("damaged {} {}\n", name.render(), to_string(kind));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
