#include "telescope/header_pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include <fmt/format.h>

#include "telescope/errors.hpp"

namespace telescope {

namespace {

std::vector<std::string_view> split_cells(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = text.find(',', pos);
        out.push_back(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::optional<std::uint16_t> parse_port(std::string_view text) {
    if (text.empty()) return std::nullopt;
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value > 65535) {
        throw Error("bad port '" + std::string(text) + "'");
    }
    return static_cast<std::uint16_t>(value);
}

std::optional<Ipv4Address> parse_ip_cell(std::string_view text) {
    if (text.empty()) return std::nullopt;
    auto ip = Ipv4Address::parse(text);
    if (!ip) throw Error("bad IPv4 address '" + std::string(text) + "'");
    return ip;
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void append_header_row(std::string& out, const PacketRecord& r) {
    fmt::format_to(std::back_inserter(out), "{},{},", to_micros(r.timestamp), to_string(r.type));
    if (r.src_ip) out += r.src_ip->to_string();
    out += ',';
    if (r.dst_ip) out += r.dst_ip->to_string();
    out += ',';
    if (r.src_port) fmt::format_to(std::back_inserter(out), "{}", *r.src_port);
    out += ',';
    if (r.dst_port) fmt::format_to(std::back_inserter(out), "{}", *r.dst_port);
    out += ',';
    out += render_tcp_flags(r.tcp_flags);
}

std::string header_row(const PacketRecord& record) {
    std::string out;
    append_header_row(out, record);
    return out;
}

PacketRecord parse_header_row(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto cells = split_cells(line);
    if (cells.size() != 7) {
        throw Error("header row needs 7 columns, got " + std::to_string(cells.size()));
    }
    PacketRecord r;
    std::int64_t micros = 0;
    auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), micros);
    if (cells[0].empty() || ec != std::errc{} || ptr != cells[0].data() + cells[0].size()) {
        throw Error("bad timestamp_micro '" + std::string(cells[0]) + "'");
    }
    r.timestamp = timestamp_from_micros(micros);
    auto type = parse_packet_type(cells[1]);
    if (!type) throw Error("bad packet_type '" + std::string(cells[1]) + "'");
    r.type = *type;
    r.src_ip = parse_ip_cell(cells[2]);
    r.dst_ip = parse_ip_cell(cells[3]);
    r.src_port = parse_port(cells[4]);
    r.dst_port = parse_port(cells[5]);
    auto flags = parse_tcp_flags(cells[6]);
    if (!flags) throw Error("bad tcp_parsed_flags '" + std::string(cells[6]) + "'");
    r.tcp_flags = *flags;
    return r;
}

ExtractionStats extract_headers(const std::filesystem::path& path, const RowSink& sink) {
    parse_capture_file_name(path.filename().string());
    auto stream = CaptureStream::open(path);
    const auto link_type = stream.header() ? stream.header()->link_type : kLinkTypeEthernet;
    ExtractionStats stats;
    while (auto packet = stream.next()) {
        const auto record = parse_headers(*packet, link_type);
        ++stats.per_type[static_cast<std::size_t>(record.type)];
        ++stats.rows;
        sink(record);
    }
    stats.corruption = stream.corruption();
    return stats;
}

ExtractionStats extract_headers_to_csv(const std::filesystem::path& capture,
                                       const std::filesystem::path& csv) {
    FilePtr out{std::fopen(csv.c_str(), "wb")};
    if (!out) throw IoError("cannot create " + csv.string());
    std::string buffer{kHeaderCsvHeader};
    buffer += '\n';
    auto drain = [&] {
        if (std::fwrite(buffer.data(), 1, buffer.size(), out.get()) != buffer.size()) {
            throw IoError("write failed for " + csv.string());
        }
        buffer.clear();
    };
    auto stats = extract_headers(capture, [&](const PacketRecord& record) {
        append_header_row(buffer, record);
        buffer += '\n';
        if (buffer.size() >= (1u << 20)) drain();
    });
    drain();
    if (std::fclose(out.release()) != 0) throw IoError("close failed for " + csv.string());
    return stats;
}

std::vector<std::filesystem::path> split_csv(const std::filesystem::path& path,
                                             std::uint64_t chunk_limit) {
    namespace fs = std::filesystem;
    const auto base = path.filename().string() + ".part";
    const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > base.size() && name.starts_with(base) &&
            name.find_first_not_of("0123456789", base.size()) == std::string::npos) {
            fs::remove(entry.path());
        }
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());

    std::vector<fs::path> chunks;
    std::ofstream out;
    std::uint64_t chunk_bytes = 0;
    std::string line;
    while (std::getline(in, line)) {
        const bool has_newline = !in.eof();
        const std::uint64_t length = line.size() + (has_newline ? 1 : 0);
        if (length > chunk_limit) {
            throw LineTooLong(fmt::format("{}: line of {} bytes exceeds chunk limit {}", path.string(),
                                          length, chunk_limit));
        }
        if (!out.is_open() || chunk_bytes + length > chunk_limit) {
            if (out.is_open()) out.close();
            chunks.push_back(dir / fmt::format("{}{:03d}", base, chunks.size()));
            out.open(chunks.back(), std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot create " + chunks.back().string());
            chunk_bytes = 0;
        }
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        if (has_newline) out.put('\n');
        chunk_bytes += length;
        if (!out) throw IoError("write failed for " + chunks.back().string());
    }
    if (in.bad()) throw IoError("read failed for " + path.string());
    return chunks;
}

std::string sql_string_literal(std::string_view text) {
    std::string out = "'";
    for (char c : text) {
        if (c == '\\' || c == '\'') out += '\\';
        out += c;
    }
    out += '\'';
    return out;
}

std::vector<std::string> emit_bulk_load(const std::vector<std::filesystem::path>& chunks,
                                        std::string_view table, bool first_chunk_has_header) {
    std::vector<std::string> statements;
    statements.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const bool skip_header = first_chunk_has_header && i == 0;
        statements.push_back(fmt::format(
            "LOAD DATA LOCAL INFILE {}\n"
            "INTO TABLE `{}`\n"
            "FIELDS TERMINATED BY ',' ENCLOSED BY '\\''\n"
            "{}"
            "(@micro_epoch, packet_type, @src_ip, @dst_ip, @src_port, @dst_port, tcp_parsed_flags)\n"
            "SET timestamp_micro = FROM_UNIXTIME(@micro_epoch / 1000000),\n"
            "    src_ip = NULLIF(@src_ip, ''), dst_ip = NULLIF(@dst_ip, ''),\n"
            "    src_port = NULLIF(@src_port, ''), dst_port = NULLIF(@dst_port, '');",
            sql_string_literal(chunks[i].string()), table, skip_header ? "IGNORE 1 LINES\n" : ""));
    }
    return statements;
}

std::string schema_sql(std::string_view table) {
    return fmt::format(
        "CREATE TABLE IF NOT EXISTS `{0}` (\n"
        "  timestamp_micro DATETIME(6) NOT NULL,\n"
        "  packet_type VARCHAR(8) NOT NULL,\n"
        "  src_ip VARCHAR(15) NULL,\n"
        "  dst_ip VARCHAR(15) NULL,\n"
        "  src_port SMALLINT UNSIGNED NULL,\n"
        "  dst_port SMALLINT UNSIGNED NULL,\n"
        "  tcp_parsed_flags VARCHAR(32) NOT NULL DEFAULT ''\n"
        ");\n"
        "CREATE INDEX IF NOT EXISTS idx_{0}_time ON `{0}` (timestamp_micro);\n"
        "CREATE INDEX IF NOT EXISTS idx_{0}_dst_port ON `{0}` (dst_port);\n"
        "CREATE INDEX IF NOT EXISTS idx_{0}_src_ip ON `{0}` (src_ip);\n",
        table);
}

std::vector<std::vector<std::size_t>> plan_import_waves(std::size_t statements, unsigned parallelism) {
    const std::size_t width = parallelism == 0 ? 1 : parallelism;
    std::vector<std::vector<std::size_t>> waves;
    for (std::size_t i = 0; i < statements; ++i) {
        if (i % width == 0) waves.emplace_back();
        waves.back().push_back(i);
    }
    return waves;
}

std::string render_import_manifest(
    const std::vector<std::pair<std::filesystem::path, std::vector<std::filesystem::path>>>& scripts,
    unsigned parallelism) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [script, chunks] : scripts) {
        for (const auto& chunk : chunks) {
            entries.emplace_back(script.filename().string(), chunk.filename().string());
        }
    }
    const auto waves = plan_import_waves(entries.size(), parallelism);
    std::string out = fmt::format("# statements={} parallelism={} waves={}\n", entries.size(),
                                  parallelism, waves.size());
    out += "wave\tstatement\tscript\tchunk\n";
    for (std::size_t w = 0; w < waves.size(); ++w) {
        for (auto index : waves[w]) {
            fmt::format_to(std::back_inserter(out), "{}\t{}\t{}\t{}\n", w + 1, index,
                           entries[index].first, entries[index].second);
        }
    }
    return out;
}

}  // namespace telescope
