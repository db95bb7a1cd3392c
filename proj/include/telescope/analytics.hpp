#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "telescope/core_model.hpp"

namespace telescope {

enum class Bucket { Hour, Day, Month };

Timestamp bucket_start(Timestamp t, Bucket bucket);
std::optional<Bucket> parse_bucket(std::string_view text);
std::string_view to_string(Bucket bucket);

// The six longitudinal measurements, in panel order.
inline constexpr std::array<std::string_view, 6> kMeasurements = {
    "avg_pkt_rate_Mpps", "avg_pkt_size_bytes", "traffic_rate_Mbps",
    "total_traffic_GB",  "total_packets",      "compressed_size_GB"};

/// Buckets summaries by their file's nominal hour and derives the six
/// measurements. Buckets without files produce no sample.
std::map<std::string, TimeSeries> aggregate(std::span<const CaptureSummary> summaries, Bucket bucket);

struct TrafficPeak {
    std::size_t index = 0;  // position among present samples
    Timestamp bucket_start;
    double value = 0.0;
    double threshold = 0.0;

    friend bool operator==(const TrafficPeak&, const TrafficPeak&) = default;
};

inline constexpr double kDefaultHeightFactor = 1.05;
inline constexpr std::size_t kDefaultMinDistance = 5;

/// Local maxima (flat tops resolve to their middle, rounding down) whose
/// value reaches height_factor times the series mean, thinned greedily from
/// the highest so no two kept peaks are closer than min_distance samples.
/// Equal heights prefer the lower index. Result is ordered by index.
/// Throws DegenerateSeries for fewer than 3 samples.
std::vector<TrafficPeak> find_peaks(const TimeSeries& series,
                                    double height_factor = kDefaultHeightFactor,
                                    std::size_t min_distance = kDefaultMinDistance);

/// Same, over bare values; bucket_start is left at the epoch.
std::vector<TrafficPeak> find_peaks(std::span<const double> values,
                                    double height_factor = kDefaultHeightFactor,
                                    std::size_t min_distance = kDefaultMinDistance);

/// Peaks per calendar year summed over every series. Every year in
/// [first_year, last_year] is present; series with fewer than 3 samples add nothing.
std::map<int, std::uint64_t> peaks_per_year(const std::map<std::string, TimeSeries>& series_set,
                                            int first_year, int last_year,
                                            double height_factor = kDefaultHeightFactor,
                                            std::size_t min_distance = kDefaultMinDistance);

struct PortRanking {
    std::uint16_t port = 0;
    std::uint64_t total = 0;
    std::map<Timestamp, std::uint64_t> per_bucket;

    friend bool operator==(const PortRanking&, const PortRanking&) = default;
};

/// Streaming destination-port counter over TCP and UDP records.
class PortTally {
public:
    explicit PortTally(Bucket bucket = Bucket::Month) : bucket_(bucket) {}

    void add(const PacketRecord& record);
    std::uint64_t rows() const { return rows_; }
    /// Highest totals first, ties by lower port. Throws std::invalid_argument for n == 0.
    std::vector<PortRanking> top(std::size_t n) const;

private:
    Bucket bucket_;
    std::uint64_t rows_ = 0;
    std::unordered_map<std::uint16_t, std::map<Timestamp, std::uint64_t>> counts_;
};

std::vector<PortRanking> top_ports(std::span<const PacketRecord> rows, std::size_t n,
                                   Bucket bucket = Bucket::Month);

/// Static prefix -> region table with longest-prefix lookup.
class GeoTable {
public:
    static constexpr std::string_view kUnknownRegion = "unknown";

    /// `prefix,region` lines; a `prefix,region` header line and '#' comments are skipped.
    /// Throws Error on malformed lines.
    static GeoTable parse_csv(std::string_view text);
    static GeoTable load(const std::filesystem::path& path);

    /// Throws Error for prefix lengths above 32.
    void add(Ipv4Address network, int prefix_length, std::string region);
    std::string_view region_for(Ipv4Address ip) const;
    bool empty() const { return size_ == 0; }

private:
    std::array<std::unordered_map<std::uint32_t, std::string>, 33> by_length_;
    std::size_t size_ = 0;
};

struct SourceRanking {
    Ipv4Address ip;
    std::uint64_t count = 0;
    std::optional<std::string> region;

    friend bool operator==(const SourceRanking&, const SourceRanking&) = default;
};

struct TopSources {
    std::vector<SourceRanking> ranking;
    std::map<std::string, std::uint64_t> regions;  // only filled when a GeoTable is supplied
};

class SourceTally {
public:
    void add(const PacketRecord& record);
    std::uint64_t rows() const { return rows_; }
    /// Highest counts first, ties by lower address. Throws std::invalid_argument for n == 0.
    TopSources top(std::size_t n, const GeoTable* geo = nullptr) const;

private:
    std::uint64_t rows_ = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> counts_;
};

TopSources top_sources(std::span<const PacketRecord> rows, std::size_t n,
                       const GeoTable* geo = nullptr);

enum class TrafficClass { Scan, Backscatter, Other };

std::string_view to_string(TrafficClass cls);

/// SYN without ACK is a scan; SYN+ACK or RST (victim responses) is
/// backscatter; everything else is other. The scan rule is tested first.
TrafficClass classify(const PacketRecord& record);

struct ClassifiedCounts {
    std::uint64_t scan = 0;
    std::uint64_t backscatter = 0;
    std::uint64_t other = 0;

    void add(TrafficClass cls);
    std::uint64_t total() const { return scan + backscatter + other; }
};

/// Divides each sample by the dark-address count of the epoch holding its
/// bucket start. Throws NotNormalizable for intensive measurements and
/// UncoveredTimestamp when the timeline misses a bucket.
TimeSeries normalize(const TimeSeries& series, std::span<const AddressSpaceEpoch> timeline);

}  // namespace telescope
