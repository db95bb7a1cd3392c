#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "telescope/core_model.hpp"
#include "telescope/pcap_io.hpp"

namespace telescope {

/// Deterministic generator of desk-scale telescope archives.
struct SyntheticArchiveOptions {
    std::filesystem::path root;
    Timestamp start;          // hour-aligned
    std::size_t hours = 24;
    std::size_t packets_per_file = 200;
    std::uint64_t seed = 1;
    std::size_t holes = 0;      // files left out, chosen by the seed
    std::size_t corrupted = 0;  // files damaged, cycling through every corruption kind
};

struct SyntheticArchive {
    std::vector<CaptureFileName> written;  // includes the damaged files
    std::vector<CaptureFileName> holes;
    std::vector<std::pair<CaptureFileName, CorruptionKind>> corrupted;
};

/// Files go to `<root>/<year>/<month>/`. Re-running with the same options
/// rewrites identical bytes.
SyntheticArchive generate_archive(const SyntheticArchiveOptions& options);

/// One hour of mixed darknet traffic (SYN scans, backscatter, UDP, ICMP,
/// a little non-IPv4 noise). Returns the packet count written.
std::uint64_t write_synthetic_capture(const std::filesystem::path& path, const CaptureFileName& name,
                                      std::size_t packets, std::uint64_t seed);

/// Damages an existing capture so that both probe modes report `kind`.
/// TRUNCATED_PACKET damage is only visible to a full scan.
void damage_capture(const std::filesystem::path& path, CorruptionKind kind);

}  // namespace telescope
