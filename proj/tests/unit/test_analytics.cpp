#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "telescope/analytics.hpp"
#include "telescope/errors.hpp"

using namespace telescope;
using namespace std::chrono;
using fixtures::ip;

namespace {

CaptureSummary file(std::string_view name, std::uint64_t data, std::uint64_t packets, double pps = 0,
                    double bps = 0, std::uint64_t compressed = 0) {
    CaptureSummary s;
    s.file_name = parse_capture_file_name(name);
    s.data_size_bytes = data;
    s.num_packets = packets;
    s.avg_pkt_rate_pps = pps;
    s.data_bit_rate = bps;
    s.file_size_bytes = compressed;
    return s;
}

std::vector<std::size_t> indices(const std::vector<TrafficPeak>& peaks) {
    std::vector<std::size_t> out;
    for (const auto& p : peaks) out.push_back(p.index);
    return out;
}

PacketRecord tcp(std::string_view src, std::uint16_t dport, TcpFlagSet flags = {TcpFlag::Syn},
                 Timestamp t = start_of(2024y / June / 1)) {
    PacketRecord r;
    r.timestamp = t;
    r.type = PacketType::Tcp;
    r.src_ip = ip(src);
    r.dst_ip = ip("44.0.0.1");
    r.src_port = 40000;
    r.dst_port = dport;
    r.tcp_flags = flags;
    return r;
}

TimeSeries monthly(std::string name, int first_year, const std::vector<double>& values) {
    TimeSeries s(std::move(name), "packets", true);
    auto m = year{first_year} / January;
    for (double v : values) {
        s.append(start_of(m / 1), v);
        m += months{1};
    }
    return s;
}

}  // namespace

TEST_SUITE("analytics") {

TEST_CASE("two files in one day sum to a millionth of a gigabyte") {
    const std::vector<CaptureSummary> day = {file("2024-06-01.03.pcap.gz", 180, 3, 2.0, 100.0, 50),
                                             file("2024-06-01.17.pcap.gz", 820, 7, 4.0, 300.0, 70)};
    const auto series = aggregate(day, Bucket::Day);
    REQUIRE(series.size() == 6);
    const auto& traffic = series.at("total_traffic_GB").samples();
    REQUIRE(traffic.size() == 1);
    CHECK(traffic[0].bucket_start == start_of(2024y / June / 1));
    CHECK(traffic[0].value == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(series.at("total_packets").samples()[0].value == 10.0);
    CHECK(series.at("avg_pkt_size_bytes").samples()[0].value == 100.0);
    CHECK(series.at("avg_pkt_rate_Mpps").samples()[0].value == doctest::Approx(3e-6));
    CHECK(series.at("traffic_rate_Mbps").samples()[0].value == doctest::Approx(2e-4));
    CHECK(series.at("compressed_size_GB").samples()[0].value == doctest::Approx(1.2e-7));
    CHECK_FALSE(series.at("avg_pkt_size_bytes").scales_with_address_space());
    CHECK(series.at("total_packets").scales_with_address_space());
}

TEST_CASE("empty buckets are gaps and totals are conserved") {
    std::mt19937_64 rng(5);
    std::vector<CaptureSummary> files;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;
    for (int d : {1, 2, 5, 9}) {
        for (int h = 0; h < 24; h += 7) {
            auto s = file(CaptureFileName{2024y / June / d, h}.render(), rng() % 100000, rng() % 1000);
            bytes += s.data_size_bytes;
            packets += s.num_packets;
            files.push_back(s);
        }
    }
    files.push_back(file("2024-06-09.23.pcap.gz", 0, 0));  // empty capture
    for (auto bucket : {Bucket::Hour, Bucket::Day, Bucket::Month}) {
        const auto series = aggregate(files, bucket);
        double total_packets = 0;
        for (const auto& s : series.at("total_packets").samples()) total_packets += s.value;
        CHECK(total_packets == static_cast<double>(packets));
        double gb = 0;
        for (const auto& s : series.at("total_traffic_GB").samples()) gb += s.value;
        CHECK(gb == doctest::Approx(static_cast<double>(bytes) / 1e9).epsilon(1e-12));
    }
    const auto daily = aggregate(files, Bucket::Day);
    CHECK(daily.at("total_packets").size() == 4);
    CHECK(daily.at("total_packets").samples()[2].bucket_start == start_of(2024y / June / 5));
    const auto hourly = aggregate(files, Bucket::Hour);
    CHECK(hourly.at("avg_pkt_size_bytes").samples().back().value == 0.0);
    CHECK(aggregate({}, Bucket::Day).at("total_packets").empty());
}

TEST_CASE("bucket boundaries") {
    const auto t = start_of(2024y / February / 29) + hours{13} + minutes{5};
    CHECK(bucket_start(t, Bucket::Hour) == start_of(2024y / February / 29) + hours{13});
    CHECK(bucket_start(t, Bucket::Day) == start_of(2024y / February / 29));
    CHECK(bucket_start(t, Bucket::Month) == start_of(2024y / February / 1));
    CHECK(parse_bucket("month") == Bucket::Month);
    CHECK_FALSE(parse_bucket("week").has_value());
    CHECK(to_string(Bucket::Hour) == "hour");
}

TEST_CASE("worked peak examples") {
    const std::vector<double> a = {1, 3, 1, 1, 5, 1};
    CHECK(indices(find_peaks(std::span<const double>(a), 1.05, 5)) == std::vector<std::size_t>{4});
    const std::vector<double> b = {0, 10, 0, 0, 0, 0, 0, 9, 0};
    const auto pb = find_peaks(std::span<const double>(b), 1.05, 5);
    CHECK(indices(pb) == std::vector<std::size_t>{1, 7});
    CHECK(pb[0].value == 10.0);
    CHECK(pb[0].threshold == doctest::Approx(1.05 * 19.0 / 9.0));
}

TEST_CASE("peak edge cases") {
    const std::vector<double> rising = {1, 2, 3, 4, 5, 6};
    CHECK(find_peaks(std::span<const double>(rising)).empty());
    const std::vector<double> flat = {2, 2, 2, 2};
    CHECK(find_peaks(std::span<const double>(flat)).empty());
    const std::vector<double> two = {1, 2};
    CHECK_THROWS_AS(find_peaks(std::span<const double>(two)), DegenerateSeries);

    const std::vector<double> even_top = {0, 2, 2, 0};
    CHECK(indices(find_peaks(std::span<const double>(even_top), 1.0, 1)) == std::vector<std::size_t>{1});
    const std::vector<double> wide_top = {0, 2, 2, 2, 2, 0};
    CHECK(indices(find_peaks(std::span<const double>(wide_top), 1.0, 1)) == std::vector<std::size_t>{2});
    const std::vector<double> edge_top = {0, 2, 2};
    CHECK(find_peaks(std::span<const double>(edge_top), 0.0, 1).empty());

    const std::vector<double> twins = {0, 5, 0, 5, 0};
    CHECK(indices(find_peaks(std::span<const double>(twins), 1.0, 3)) == std::vector<std::size_t>{1});
    CHECK(indices(find_peaks(std::span<const double>(twins), 1.0, 2)) == std::vector<std::size_t>{1, 3});

    // A suppressed peak does not suppress its own neighbours.
    const std::vector<double> chain = {0, 5, 0, 6, 0, 5, 0};
    CHECK(indices(find_peaks(std::span<const double>(chain), 1.0, 3)) == std::vector<std::size_t>{3});
    const std::vector<double> chain2 = {0, 7, 0, 6, 0, 5, 0};
    CHECK(indices(find_peaks(std::span<const double>(chain2), 1.0, 3)) == std::vector<std::size_t>{1, 5});
}

TEST_CASE("peaks agree with the exhaustive oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = 3 + rng() % 30;
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(rng() % 8);
        const double h = 0.5 + static_cast<double>(rng() % 10) / 10.0;
        const std::size_t d = 1 + rng() % 6;
        CHECK(indices(find_peaks(std::span<const double>(v), h, d)) == oracle::peaks(v, h, d));
    }
}

TEST_CASE("peaks on a time series carry bucket starts") {
    const auto s = monthly("x", 2010, {1, 3, 1, 1, 5, 1});
    const auto peaks = find_peaks(s);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].bucket_start == start_of(2010y / May / 1));
}

TEST_CASE("peaks per year") {
    std::vector<double> v(36, 1.0);
    v[2] = 9;   // 2009-03
    v[10] = 9;  // 2009-11
    v[20] = 9;  // 2010-09
    std::map<std::string, TimeSeries> set;
    set["a"] = monthly("a", 2009, v);
    auto counts = peaks_per_year(set, 2008, 2012);
    CHECK(counts == std::map<int, std::uint64_t>{{2008, 0}, {2009, 2}, {2010, 1}, {2011, 0}, {2012, 0}});

    set["b"] = monthly("b", 2009, v);
    set["short"] = monthly("short", 2009, {1, 9});
    counts = peaks_per_year(set, 2009, 2011);
    CHECK(counts.at(2009) == 4);
    CHECK(counts.at(2010) == 2);
    CHECK(counts.at(2011) == 0);
}

TEST_CASE("top ports") {
    std::vector<PacketRecord> rows;
    for (int i = 0; i < 40; ++i) rows.push_back(tcp("1.1.1.1", 23));
    for (int i = 0; i < 10; ++i) rows.push_back(tcp("1.1.1.1", 80));
    for (int i = 0; i < 5; ++i) rows.push_back(tcp("1.1.1.1", 22));
    PacketRecord icmp;
    icmp.type = PacketType::Icmp;
    for (int i = 0; i < 100; ++i) rows.push_back(icmp);

    const auto top = top_ports(rows, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].port == 23);
    CHECK(top[0].total == 40);
    CHECK(top[1].port == 80);
    CHECK(top[0].per_bucket.at(start_of(2024y / June / 1)) == 40);
    CHECK(top_ports(rows, 10).size() == 3);
    CHECK_THROWS_AS(top_ports(rows, 0), std::invalid_argument);

    // Equal totals rank the lower port first.
    const std::vector<PacketRecord> tie = {tcp("1.1.1.1", 445), tcp("1.1.1.1", 139)};
    CHECK(top_ports(tie, 1)[0].port == 139);

    PortTally monthly_tally;
    monthly_tally.add(tcp("1.1.1.1", 23, {TcpFlag::Syn}, start_of(2024y / May / 31)));
    monthly_tally.add(tcp("1.1.1.1", 23, {TcpFlag::Syn}, start_of(2024y / June / 2)));
    monthly_tally.add(icmp);
    CHECK(monthly_tally.rows() == 3);
    CHECK(monthly_tally.top(1)[0].per_bucket.size() == 2);
}

TEST_CASE("top sources and the region rollup") {
    std::vector<PacketRecord> rows;
    for (int i = 0; i < 100; ++i) rows.push_back(tcp("61.2.3.4", 23));
    for (int i = 0; i < 50; ++i) rows.push_back(tcp("91.0.0.9", 23));
    for (int i = 0; i < 10; ++i) rows.push_back(tcp("8.8.8.8", 23));
    for (int i = 0; i < 10; ++i) rows.push_back(tcp("7.7.7.7", 23));
    PacketRecord arp;
    rows.push_back(arp);

    const auto plain = top_sources(rows, 3);
    REQUIRE(plain.ranking.size() == 3);
    CHECK(plain.ranking[0].ip == ip("61.2.3.4"));
    CHECK(plain.ranking[0].count == 100);
    CHECK(plain.ranking[2].ip == ip("7.7.7.7"));
    CHECK_FALSE(plain.ranking[0].region.has_value());
    CHECK(plain.regions.empty());

    const auto geo = GeoTable::parse_csv("prefix,region\n# comment\n61.0.0.0/8,Asia\n91.0.0.0/8,Europe\n");
    const auto located = top_sources(rows, 4, &geo);
    CHECK(located.ranking[1].region == "Europe");
    CHECK(located.regions == std::map<std::string, std::uint64_t>{{"Asia", 100}, {"Europe", 50}, {"unknown", 20}});
    CHECK_THROWS_AS(top_sources(rows, 0), std::invalid_argument);
}

TEST_CASE("geo table lookups") {
    auto geo = GeoTable::parse_csv("10.0.0.0/8,A\r\n10.1.0.0/16,B\n0.0.0.0/0,World\n");
    CHECK(geo.region_for(ip("10.1.2.3")) == "B");
    CHECK(geo.region_for(ip("10.2.0.0")) == "A");
    CHECK(geo.region_for(ip("11.0.0.1")) == "World");
    CHECK(GeoTable{}.region_for(ip("10.0.0.1")) == "unknown");
    CHECK(GeoTable{}.empty());
    CHECK_THROWS_AS(GeoTable::parse_csv("10.0.0.0,A\n"), Error);
    CHECK_THROWS_AS(GeoTable::parse_csv("10.0.0.0/x,A\n"), Error);
    CHECK_THROWS_AS(GeoTable::parse_csv("10.0.0.0/33,A\n"), Error);
    CHECK_THROWS_AS(GeoTable::load("/nonexistent/geo.csv"), IoError);
}

TEST_CASE("classification") {
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Syn})) == TrafficClass::Scan);
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Syn, TcpFlag::Ack})) == TrafficClass::Backscatter);
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Rst})) == TrafficClass::Backscatter);
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Rst, TcpFlag::Ack})) == TrafficClass::Backscatter);
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Syn, TcpFlag::Rst})) == TrafficClass::Scan);
    CHECK(classify(tcp("1.1.1.1", 80, {TcpFlag::Ack})) == TrafficClass::Other);
    CHECK(classify(tcp("1.1.1.1", 80, TcpFlagSet{})) == TrafficClass::Other);
    PacketRecord udp;
    udp.type = PacketType::Udp;
    CHECK(classify(udp) == TrafficClass::Other);

    ClassifiedCounts counts;
    for (int bits = 0; bits < 256; ++bits) {
        const TcpFlagSet f(static_cast<std::uint8_t>(bits));
        const bool syn = f.has(TcpFlag::Syn);
        const bool ack = f.has(TcpFlag::Ack);
        const bool rst = f.has(TcpFlag::Rst);
        const auto want = syn && !ack ? TrafficClass::Scan
                          : (syn && ack) || rst ? TrafficClass::Backscatter
                                                : TrafficClass::Other;
        const auto got = classify(tcp("1.1.1.1", 80, f));
        CHECK(got == want);
        counts.add(got);
    }
    CHECK(counts.total() == 256);
    CHECK(counts.scan == 64);
    CHECK(to_string(TrafficClass::Backscatter) == "backscatter");
}

TEST_CASE("normalization across the address-space change") {
    const std::vector<AddressSpaceEpoch> timeline = {
        {2000y / January / 1, 2018y / January / 1, 16777216, "/8"},
        {2018y / January / 1, std::nullopt, 475136, "ORION"},
    };
    TimeSeries raw("total_packets", "packets", true);
    raw.append(start_of(2017y / December / 1), 1e9);
    raw.append(start_of(2018y / January / 1), 1e9);
    const auto n = normalize(raw, timeline);
    REQUIRE(n.size() == 2);
    CHECK(n.unit() == "packets per dark address");
    CHECK(n.samples()[0].value == doctest::Approx(1e9 / 16777216.0));
    CHECK(n.samples()[1].value / n.samples()[0].value == doctest::Approx(16777216.0 / 475136.0));
    CHECK(16777216.0 / 475136.0 == doctest::Approx(35.31).epsilon(1e-3));

    TimeSeries size("avg_pkt_size_bytes", "bytes", false);
    size.append(start_of(2017y / December / 1), 60);
    CHECK_THROWS_AS(normalize(size, timeline), NotNormalizable);

    TimeSeries early("total_packets", "packets", true);
    early.append(start_of(1999y / December / 1), 1);
    CHECK_THROWS_AS(normalize(early, timeline), UncoveredTimestamp);
}

}  // TEST_SUITE
