#include "telescope/archive_inventory.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "telescope/errors.hpp"

namespace telescope {

namespace chr = std::chrono;

namespace {

int year_of(const CaptureFileName& name) {
    return static_cast<int>(name.date.year());
}

int year_of(Timestamp t) {
    return static_cast<int>(date_of(t).year());
}

bool hour_aligned(Timestamp t) {
    return chr::floor<chr::hours>(t) == t;
}

}  // namespace

std::uint64_t ArchiveInventory::expected_hours() const {
    if (range_end <= range_start) return 0;
    return static_cast<std::uint64_t>(chr::duration_cast<chr::hours>(range_end - range_start).count());
}

bool ArchiveInventory::is_corrupted(const CaptureFileName& name) const {
    const auto rendered = name.render();
    return std::any_of(corrupted.begin(), corrupted.end(),
                       [&](const CorruptionReport& r) { return r.file_name == rendered; });
}

std::vector<CaptureFileName> expected_files(Timestamp start, Timestamp end) {
    if (!hour_aligned(start) || !hour_aligned(end) || end < start) {
        throw std::invalid_argument("inventory range must be hour-aligned with start <= end");
    }
    std::vector<CaptureFileName> names;
    names.reserve(static_cast<std::size_t>(chr::duration_cast<chr::hours>(end - start).count()));
    for (auto t = start; t < end; t += chr::hours{1}) names.push_back(CaptureFileName::containing(t));
    return names;
}

ArchiveInventory scan_archive(const std::filesystem::path& root, Timestamp start, Timestamp end,
                              const ScanOptions& options) {
    namespace fs = std::filesystem;
    const auto expected = expected_files(start, end);

    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError("archive root is not a directory: " + root.string());

    ArchiveInventory inv;
    inv.range_start = start;
    inv.range_end = end;

    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw IoError("cannot read archive root " + root.string() + ": " + ec.message());
    for (const fs::recursive_directory_iterator last; it != last; it.increment(ec)) {
        if (ec) throw IoError("error walking " + root.string() + ": " + ec.message());
        if (!it->is_regular_file(ec)) continue;
        const auto name = try_parse_capture_file_name(it->path().filename().string());
        if (!name || name->start() < start || name->start() >= end) continue;
        auto [pos, inserted] = inv.present.emplace(*name, it->path());
        // Duplicate names in several directories: keep the lexicographically first path.
        if (!inserted && it->path() < pos->second) pos->second = it->path();
    }

    for (const auto& name : expected) {
        if (!inv.present.contains(name)) inv.missing.push_back(name);
    }

    std::vector<std::pair<CaptureFileName, fs::path>> files(inv.present.begin(), inv.present.end());
    std::vector<std::optional<CorruptionReport>> reports(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            const auto& path = files[i].second;
            try {
                reports[i] = options.mode == ProbeMode::Full ? full_scan_capture(path)
                                                             : probe_capture(path);
            } catch (const IoError&) {
                reports[i] = CorruptionReport{path.filename().string(),
                                              CorruptionKind::TruncatedGzip, std::nullopt, 0};
            }
        }
    };
    const unsigned workers =
        std::max(1u, std::min<unsigned>(options.parallelism, static_cast<unsigned>(files.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!reports[i]) continue;
        reports[i]->file_name = files[i].first.render();
        inv.corrupted.push_back(*reports[i]);
    }

    if (start < end) {
        for (int y = year_of(start); y <= year_of(end - chr::microseconds{1}); ++y) {
            inv.per_year_missing[y] = 0;
            inv.per_year_corrupted[y] = 0;
        }
    }
    for (const auto& name : inv.missing) ++inv.per_year_missing[year_of(name)];
    for (const auto& report : inv.corrupted) {
        ++inv.per_year_corrupted[year_of(parse_capture_file_name(report.file_name))];
    }
    return inv;
}

std::optional<chr::weekday> parse_weekday(std::string_view text) {
    static constexpr std::string_view kNames[] = {"sunday",   "monday", "tuesday", "wednesday",
                                                  "thursday", "friday", "saturday"};
    std::string lower;
    for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (unsigned i = 0; i < 7; ++i) {
        if (lower == kNames[i] || (lower.size() == 3 && kNames[i].starts_with(lower))) {
            return chr::weekday{i};
        }
    }
    return std::nullopt;
}

void SamplingPolicy::validate() const {
    if (!weekday && !hour && explicit_dates.empty()) {
        throw InvalidPolicy("sampling policy needs a weekday, an hour or explicit dates");
    }
    if (hour && (*hour < 0 || *hour > 23)) throw InvalidPolicy("sampling hour must be 0-23");
    if (weekday && !weekday->ok()) throw InvalidPolicy("invalid weekday");
    if (week_stride == 0) throw InvalidPolicy("week stride must be >= 1");
}

bool SamplingPolicy::matches(const CaptureFileName& name, Timestamp range_start) const {
    const chr::sys_days day{name.date};
    if (weekday && chr::weekday{day} != *weekday) return false;
    if (hour && name.hour != *hour) return false;
    if (!explicit_dates.empty() &&
        std::find(explicit_dates.begin(), explicit_dates.end(), name.date) == explicit_dates.end()) {
        return false;
    }
    if (week_stride > 1) {
        const auto first_day = chr::floor<chr::days>(range_start);
        // ISO weeks start on Monday.
        const auto first_monday = first_day - (chr::weekday{first_day} - chr::Monday);
        const auto week_index = (day - first_monday).count() / 7;
        if (week_index % week_stride != 0) return false;
    }
    return true;
}

Selection select_files(const ArchiveInventory& inventory, const SamplingPolicy& policy) {
    policy.validate();
    Selection selection;
    for (const auto& name : expected_files(inventory.range_start, inventory.range_end)) {
        if (!policy.matches(name, inventory.range_start)) continue;
        if (inventory.present.contains(name)) {
            selection.selected.push_back(name);
        } else {
            selection.unavailable.push_back(name);
        }
    }
    return selection;
}

std::optional<OutageGap> longest_gap(const std::vector<CaptureFileName>& missing) {
    std::optional<OutageGap> best;
    std::size_t i = 0;
    while (i < missing.size()) {
        std::size_t j = i + 1;
        while (j < missing.size() && missing[j].start() - missing[j - 1].start() == chr::hours{1}) ++j;
        const std::uint64_t run = j - i;
        if (!best || run > best->hours) best = OutageGap{missing[i], run};
        i = j;
    }
    return best;
}

OutageReport outage_report(const ArchiveInventory& inv) {
    OutageReport report;
    report.expected = inv.expected_hours();
    report.total_missing = inv.missing.size();
    report.total_corrupted = inv.corrupted.size();
    for (const auto& [year, count] : inv.per_year_missing) report.per_year[year].missing = count;
    for (const auto& [year, count] : inv.per_year_corrupted) report.per_year[year].corrupted = count;
    report.longest_gap = longest_gap(inv.missing);
    for (const auto& c : inv.corrupted) ++report.kinds[c.kind];

    auto out = std::back_inserter(report.text);
    fmt::format_to(out, "Archive outage report {} .. {}\n", format_timestamp(inv.range_start),
                   format_timestamp(inv.range_end));
    fmt::format_to(out, "expected files:  {}\n", report.expected);
    fmt::format_to(out, "present files:   {}\n", inv.present.size());
    fmt::format_to(out, "missing files:   {}\n", report.total_missing);
    fmt::format_to(out, "corrupted files: {}\n", report.total_corrupted);
    if (report.longest_gap) {
        const auto& gap = *report.longest_gap;
        fmt::format_to(out, "longest gap:     {} hours from {} to {}\n", gap.hours,
                       format_timestamp(gap.first.start()),
                       format_timestamp(gap.first.start() + chr::hours{gap.hours}));
    } else {
        fmt::format_to(out, "longest gap:     none\n");
    }
    fmt::format_to(out, "\n{:<6} {:>10} {:>8} {:>10}\n", "year", "missing", "share", "corrupted");
    for (const auto& [year, counts] : report.per_year) {
        const double share = report.total_missing == 0
                                 ? 0.0
                                 : 100.0 * static_cast<double>(counts.missing) /
                                       static_cast<double>(report.total_missing);
        fmt::format_to(out, "{:<6} {:>10} {:>7.1f}% {:>10}\n", year, counts.missing, share,
                       counts.corrupted);
    }
    if (!report.kinds.empty()) {
        fmt::format_to(out, "\ncorruption kinds:\n");
        for (const auto& [kind, count] : report.kinds) {
            fmt::format_to(out, "  {:<17} {}\n", to_string(kind), count);
        }
    }

    report.per_year_csv = "year,missing,corrupted\n";
    for (const auto& [year, counts] : report.per_year) {
        fmt::format_to(std::back_inserter(report.per_year_csv), "{},{},{}\n", year, counts.missing,
                       counts.corrupted);
    }
    return report;
}

}  // namespace telescope
