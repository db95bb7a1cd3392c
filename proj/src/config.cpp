#include "telescope/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "telescope/errors.hpp"

namespace telescope {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key, int line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("line " + std::to_string(line_no) + ": '" + std::string(key) +
                          "' expects an integer, got '" + std::string(text) + "'");
    }
    return value;
}

std::filesystem::path resolve(std::string_view value, const std::filesystem::path& base) {
    std::filesystem::path p{std::string(value)};
    if (p.is_relative() && !base.empty()) return base / p;
    return p;
}

AddressSpaceEpoch parse_epoch_row(std::string_view row, int line_no) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        auto comma = row.find(',', pos);
        cells.push_back(trim(row.substr(pos, comma == std::string_view::npos ? row.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (cells.size() != 4) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": address_space rows need start, end, dark_address_count, label");
    }
    AddressSpaceEpoch epoch;
    auto start = parse_date(cells[0]);
    if (!start) throw ConfigError("line " + std::to_string(line_no) + ": bad start date");
    epoch.start = *start;
    if (!cells[1].empty() && cells[1] != "-") {
        auto end = parse_date(cells[1]);
        if (!end) throw ConfigError("line " + std::to_string(line_no) + ": bad end date");
        epoch.end = *end;
    }
    epoch.dark_address_count = parse_number<std::uint64_t>(cells[2], "dark_address_count", line_no);
    epoch.label = std::string(cells[3]);
    return epoch;
}

}  // namespace

Config parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    Config config;
    bool in_table = false;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line != "[address_space]") {
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section " +
                                  std::string(line));
            }
            in_table = true;
            continue;
        }
        if (in_table) {
            config.timeline.push_back(parse_epoch_row(line, line_no));
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key == "archive_root") {
            config.archive_root = resolve(value, base_dir);
        } else if (key == "staging_dir") {
            config.staging_dir = resolve(value, base_dir);
        } else if (key == "output_dir") {
            config.output_dir = resolve(value, base_dir);
        } else if (key == "geo_table") {
            config.geo_table = resolve(value, base_dir);
        } else if (key == "chunk_size_bytes") {
            config.chunk_size_bytes = parse_number<std::uint64_t>(value, key, line_no);
            if (config.chunk_size_bytes == 0) throw ConfigError("chunk_size_bytes must be > 0");
        } else if (key == "import_parallelism") {
            config.import_parallelism = parse_number<unsigned>(value, key, line_no);
            if (config.import_parallelism == 0) throw ConfigError("import_parallelism must be > 0");
        } else if (key == "probe_parallelism") {
            config.probe_parallelism = parse_number<unsigned>(value, key, line_no);
            if (config.probe_parallelism == 0) throw ConfigError("probe_parallelism must be > 0");
        } else if (key == "table_name") {
            config.table_name = std::string(value);
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                              std::string(key) + "'");
        }
    }
    validate_timeline(config.timeline);
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

}  // namespace telescope
