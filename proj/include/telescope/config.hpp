#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "telescope/core_model.hpp"

namespace telescope {

inline constexpr std::uint64_t kDefaultChunkBytes = 5ull * 1024 * 1024;
inline constexpr unsigned kDefaultImportParallelism = 10;

/// Toolkit configuration. The file is `key = value` lines followed by an
/// `[address_space]` table of `start, end, dark_address_count, label` rows
/// (end exclusive; `-` for an open epoch). Relative paths resolve against
/// the directory holding the config file.
struct Config {
    std::filesystem::path archive_root;
    std::filesystem::path staging_dir;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> geo_table;
    std::uint64_t chunk_size_bytes = kDefaultChunkBytes;
    unsigned import_parallelism = kDefaultImportParallelism;
    unsigned probe_parallelism = 4;
    std::string table_name = "pcap_drill";
    std::vector<AddressSpaceEpoch> timeline;
};

/// Throws ConfigError on unknown keys, bad values or an invalid timeline.
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

}  // namespace telescope
