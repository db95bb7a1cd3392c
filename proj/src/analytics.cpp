#include "telescope/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "telescope/errors.hpp"

namespace telescope {

namespace chr = std::chrono;

Timestamp bucket_start(Timestamp t, Bucket bucket) {
    switch (bucket) {
    case Bucket::Hour: return chr::floor<chr::hours>(t);
    case Bucket::Day: return chr::floor<chr::days>(t);
    case Bucket::Month: break;
    }
    const auto d = date_of(t);
    return start_of(d.year() / d.month() / chr::day{1});
}

std::optional<Bucket> parse_bucket(std::string_view text) {
    if (text == "hour") return Bucket::Hour;
    if (text == "day") return Bucket::Day;
    if (text == "month") return Bucket::Month;
    return std::nullopt;
}

std::string_view to_string(Bucket bucket) {
    switch (bucket) {
    case Bucket::Hour: return "hour";
    case Bucket::Day: return "day";
    case Bucket::Month: break;
    }
    return "month";
}

std::map<std::string, TimeSeries> aggregate(std::span<const CaptureSummary> summaries, Bucket bucket) {
    struct Acc {
        std::uint64_t files = 0;
        double pkt_rate_sum = 0.0;
        double bit_rate_sum = 0.0;
        std::uint64_t data = 0;
        std::uint64_t packets = 0;
        std::uint64_t compressed = 0;
    };
    std::map<Timestamp, Acc> buckets;
    for (const auto& s : summaries) {
        auto& acc = buckets[bucket_start(s.file_name.start(), bucket)];
        ++acc.files;
        acc.pkt_rate_sum += s.avg_pkt_rate_pps;
        acc.bit_rate_sum += s.data_bit_rate;
        acc.data += s.data_size_bytes;
        acc.packets += s.num_packets;
        acc.compressed += s.file_size_bytes;
    }

    std::map<std::string, TimeSeries> out;
    auto& rate = out[std::string(kMeasurements[0])] = TimeSeries(std::string(kMeasurements[0]), "Mpps", true);
    auto& size = out[std::string(kMeasurements[1])] = TimeSeries(std::string(kMeasurements[1]), "bytes", false);
    auto& mbps = out[std::string(kMeasurements[2])] = TimeSeries(std::string(kMeasurements[2]), "Mbps", true);
    auto& traffic = out[std::string(kMeasurements[3])] = TimeSeries(std::string(kMeasurements[3]), "GB", true);
    auto& packets = out[std::string(kMeasurements[4])] = TimeSeries(std::string(kMeasurements[4]), "packets", true);
    auto& compressed = out[std::string(kMeasurements[5])] = TimeSeries(std::string(kMeasurements[5]), "GB", true);

    for (const auto& [start, acc] : buckets) {
        const auto files = static_cast<double>(acc.files);
        rate.append(start, acc.pkt_rate_sum / files / 1e6);
        size.append(start, acc.packets == 0 ? 0.0
                                            : static_cast<double>(acc.data) /
                                                  static_cast<double>(acc.packets));
        mbps.append(start, acc.bit_rate_sum / files / 1e6);
        traffic.append(start, static_cast<double>(acc.data) / 1e9);
        packets.append(start, static_cast<double>(acc.packets));
        compressed.append(start, static_cast<double>(acc.compressed) / 1e9);
    }
    return out;
}

std::vector<TrafficPeak> find_peaks(std::span<const double> x, double height_factor,
                                    std::size_t min_distance) {
    const std::size_t n = x.size();
    if (n < 3) throw DegenerateSeries("peak detection needs at least 3 samples");

    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double threshold = height_factor * mean;

    std::vector<std::size_t> candidates;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i - 1] < x[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
            if (x[ahead] < x[i]) {
                const std::size_t mid = (i + ahead - 1) / 2;
                if (x[mid] >= threshold) candidates.push_back(mid);
                i = ahead;
            }
        }
        ++i;
    }

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[candidates[a]] > x[candidates[b]];
    });
    std::vector<bool> keep(candidates.size(), true);
    for (auto j : order) {
        if (!keep[j]) continue;
        for (std::size_t k = j; k-- > 0 && candidates[j] - candidates[k] < min_distance;) keep[k] = false;
        for (std::size_t k = j + 1; k < candidates.size() && candidates[k] - candidates[j] < min_distance; ++k) {
            keep[k] = false;
        }
    }

    std::vector<TrafficPeak> peaks;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (keep[j]) peaks.push_back({candidates[j], Timestamp{}, x[candidates[j]], threshold});
    }
    return peaks;
}

std::vector<TrafficPeak> find_peaks(const TimeSeries& series, double height_factor,
                                    std::size_t min_distance) {
    std::vector<double> values;
    values.reserve(series.size());
    for (const auto& s : series.samples()) values.push_back(s.value);
    auto peaks = find_peaks(values, height_factor, min_distance);
    for (auto& p : peaks) p.bucket_start = series.samples()[p.index].bucket_start;
    return peaks;
}

std::map<int, std::uint64_t> peaks_per_year(const std::map<std::string, TimeSeries>& series_set,
                                            int first_year, int last_year, double height_factor,
                                            std::size_t min_distance) {
    std::map<int, std::uint64_t> counts;
    for (int y = first_year; y <= last_year; ++y) counts[y] = 0;
    for (const auto& [name, series] : series_set) {
        if (series.size() < 3) continue;
        for (const auto& peak : find_peaks(series, height_factor, min_distance)) {
            const int year = static_cast<int>(date_of(peak.bucket_start).year());
            if (year >= first_year && year <= last_year) ++counts[year];
        }
    }
    return counts;
}

void PortTally::add(const PacketRecord& record) {
    ++rows_;
    if (!record.dst_port) return;
    ++counts_[*record.dst_port][bucket_start(record.timestamp, bucket_)];
}

std::vector<PortRanking> PortTally::top(std::size_t n) const {
    if (n == 0) throw std::invalid_argument("top-N needs n >= 1");
    std::vector<PortRanking> all;
    all.reserve(counts_.size());
    for (const auto& [port, buckets] : counts_) {
        PortRanking r{port, 0, buckets};
        for (const auto& [b, c] : buckets) r.total += c;
        all.push_back(std::move(r));
    }
    std::sort(all.begin(), all.end(), [](const PortRanking& a, const PortRanking& b) {
        return a.total != b.total ? a.total > b.total : a.port < b.port;
    });
    if (all.size() > n) all.resize(n);
    return all;
}

std::vector<PortRanking> top_ports(std::span<const PacketRecord> rows, std::size_t n, Bucket bucket) {
    PortTally tally(bucket);
    for (const auto& r : rows) tally.add(r);
    return tally.top(n);
}

GeoTable GeoTable::parse_csv(std::string_view text) {
    GeoTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#' || line == "prefix,region") continue;
        const auto comma = line.find(',');
        const auto slash = line.find('/');
        if (comma == std::string::npos || slash == std::string::npos || slash > comma) {
            throw Error("geo table line " + std::to_string(line_no) + ": expected a.b.c.d/len,region");
        }
        auto ip = Ipv4Address::parse(std::string_view(line).substr(0, slash));
        int length = -1;
        auto len_text = std::string_view(line).substr(slash + 1, comma - slash - 1);
        auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
        if (!ip || ec != std::errc{} || ptr != len_text.data() + len_text.size()) {
            throw Error("geo table line " + std::to_string(line_no) + ": bad prefix");
        }
        table.add(*ip, length, line.substr(comma + 1));
    }
    return table;
}

GeoTable GeoTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read geo table " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_csv(text.str());
}

namespace {
std::uint32_t prefix_mask(int length) {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
}
}  // namespace

void GeoTable::add(Ipv4Address network, int prefix_length, std::string region) {
    if (prefix_length < 0 || prefix_length > 32) throw Error("prefix length must be 0-32");
    auto& slot = by_length_[static_cast<std::size_t>(prefix_length)];
    if (slot.insert_or_assign(network.value & prefix_mask(prefix_length), std::move(region)).second) {
        ++size_;
    }
}

std::string_view GeoTable::region_for(Ipv4Address ip) const {
    for (int length = 32; length >= 0; --length) {
        const auto& slot = by_length_[static_cast<std::size_t>(length)];
        if (slot.empty()) continue;
        if (auto it = slot.find(ip.value & prefix_mask(length)); it != slot.end()) return it->second;
    }
    return kUnknownRegion;
}

void SourceTally::add(const PacketRecord& record) {
    ++rows_;
    if (record.src_ip) ++counts_[record.src_ip->value];
}

TopSources SourceTally::top(std::size_t n, const GeoTable* geo) const {
    if (n == 0) throw std::invalid_argument("top-N needs n >= 1");
    std::vector<SourceRanking> all;
    all.reserve(counts_.size());
    for (const auto& [ip, count] : counts_) all.push_back({Ipv4Address{ip}, count, std::nullopt});
    const auto limit = std::min(n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(limit), all.end(),
                      [](const SourceRanking& a, const SourceRanking& b) {
                          return a.count != b.count ? a.count > b.count : a.ip < b.ip;
                      });
    all.resize(limit);

    TopSources result;
    if (geo != nullptr) {
        for (auto& r : all) {
            r.region = std::string(geo->region_for(r.ip));
            result.regions[*r.region] += r.count;
        }
    }
    result.ranking = std::move(all);
    return result;
}

TopSources top_sources(std::span<const PacketRecord> rows, std::size_t n, const GeoTable* geo) {
    SourceTally tally;
    for (const auto& r : rows) tally.add(r);
    return tally.top(n, geo);
}

std::string_view to_string(TrafficClass cls) {
    switch (cls) {
    case TrafficClass::Scan: return "scan";
    case TrafficClass::Backscatter: return "backscatter";
    case TrafficClass::Other: break;
    }
    return "other";
}

TrafficClass classify(const PacketRecord& record) {
    if (record.type != PacketType::Tcp) return TrafficClass::Other;
    const auto& f = record.tcp_flags;
    if (f.has(TcpFlag::Syn) && !f.has(TcpFlag::Ack)) return TrafficClass::Scan;
    if ((f.has(TcpFlag::Syn) && f.has(TcpFlag::Ack)) || f.has(TcpFlag::Rst)) {
        return TrafficClass::Backscatter;
    }
    return TrafficClass::Other;
}

void ClassifiedCounts::add(TrafficClass cls) {
    switch (cls) {
    case TrafficClass::Scan: ++scan; break;
    case TrafficClass::Backscatter: ++backscatter; break;
    case TrafficClass::Other: ++other; break;
    }
}

TimeSeries normalize(const TimeSeries& series, std::span<const AddressSpaceEpoch> timeline) {
    if (!series.scales_with_address_space()) {
        throw NotNormalizable("measurement '" + series.measurement() +
                              "' does not scale with address space");
    }
    TimeSeries out(series.measurement(), series.unit() + " per dark address", true);
    for (const auto& s : series.samples()) {
        out.append(s.bucket_start,
                   s.value / static_cast<double>(dark_address_count_for(timeline, s.bucket_start)));
    }
    return out;
}

}  // namespace telescope
