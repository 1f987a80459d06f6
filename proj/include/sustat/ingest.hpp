#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "sustat/errors.hpp"

namespace sustat {

// Calendar timestamp with minute-or-better resolution. No time zones; the
// date fields are all the session logic ever looks at.
struct Timestamp {
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;
    bool has_time = false;   // false for pure dates (daily data)

    // Sortable encoding, unique per calendar second.
    std::int64_t key() const noexcept {
        return (((((static_cast<std::int64_t>(year) * 100 + month) * 100 + day) * 100 + hour) * 100 + minute) *
                    100 +
                second);
    }
    std::int64_t date_key() const noexcept {
        return (static_cast<std::int64_t>(year) * 100 + month) * 100 + day;
    }
    auto operator<=>(const Timestamp& o) const noexcept { return key() <=> o.key(); }
    bool operator==(const Timestamp& o) const noexcept { return key() == o.key(); }

    std::string to_string() const {
        char buf[32];
        if (has_time)
            std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour, minute, second);
        else
            std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }
};

struct PriceRecord {
    Timestamp timestamp;
    double price = 0.0;        // strictly positive
    std::int64_t session_id = 0;
};

enum class Resolution { daily, intraday };

struct PriceSeries {
    std::vector<PriceRecord> records;
    Resolution resolution = Resolution::daily;
    std::string source_label;

    std::size_t size() const noexcept { return records.size(); }
};

struct IngestConfig {
    std::optional<Resolution> resolution;   // detected from timestamps when unset
    std::string source_label;
};

namespace ingest_detail {

inline bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline bool valid_date(int y, int m, int d) {
    static constexpr int days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (y < 1 || m < 1 || m > 12 || d < 1) return false;
    int dm = days[m - 1];
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) dm = 29;
    return d <= dm;
}

// ISO-8601: YYYY-MM-DD with optional [T or space]HH:MM[:SS].
inline bool parse_timestamp(std::string_view s, Timestamp& ts) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
    if (!parse_int(s.substr(0, 4), ts.year) || !parse_int(s.substr(5, 2), ts.month) ||
        !parse_int(s.substr(8, 2), ts.day))
        return false;
    if (!valid_date(ts.year, ts.month, ts.day)) return false;
    ts.hour = ts.minute = ts.second = 0;
    ts.has_time = false;
    if (s.size() == 10) return true;
    if (s[10] != 'T' && s[10] != ' ') return false;
    if (s.size() < 16 || s[13] != ':') return false;
    if (!parse_int(s.substr(11, 2), ts.hour) || !parse_int(s.substr(14, 2), ts.minute)) return false;
    if (s.size() > 16) {
        if (s[16] != ':' || s.size() < 19) return false;
        if (!parse_int(s.substr(17, 2), ts.second)) return false;
        if (s.size() != 19) return false;
    }
    if (ts.hour > 23 || ts.minute > 59 || ts.second > 59) return false;
    ts.has_time = true;
    return true;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

// Reads a whole file, transparently inflating when the name ends in .gz.
inline std::string read_file(const std::string& path) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile gf = gzopen(path.c_str(), "rb");
        if (!gf) throw IoError("cannot open " + path);
        std::string out;
        char buf[1 << 16];
        int n;
        while ((n = gzread(gf, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
        const bool bad = n < 0;
        gzclose(gf);
        if (bad) throw IoError("gzip read error in " + path);
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

}  // namespace ingest_detail

// Relabels sessions in place: intraday data start a new session on every
// calendar-date change; daily data get one session per record (session =
// date), so daily returns are never dropped at boundaries. Idempotent.
inline PriceSeries assign_sessions(PriceSeries series) {
    if (series.records.empty()) return series;
    if (series.resolution == Resolution::daily) {
        for (std::size_t i = 0; i < series.records.size(); ++i)
            series.records[i].session_id = static_cast<std::int64_t>(i);
        return series;
    }
    std::int64_t session = 0;
    std::int64_t prev_date = series.records.front().timestamp.date_key();
    for (auto& rec : series.records) {
        const std::int64_t date = rec.timestamp.date_key();
        if (date != prev_date) {
            ++session;
            prev_date = date;
        }
        rec.session_id = session;
    }
    return series;
}

// Loads `timestamp,price[,session]` CSV (optionally gzip-compressed). Rows
// are sorted by timestamp; duplicates, non-positive prices and malformed
// rows are hard errors. A header row is detected by its unparseable fields.
inline PriceSeries load_csv(const std::string& path, const IngestConfig& config = {}) {
    using namespace ingest_detail;
    const std::string content = read_file(path);

    PriceSeries series;
    series.source_label = config.source_label.empty() ? path : config.source_label;

    bool saw_session_column = false;
    bool any_time_of_day = false;
    bool header_candidate = true;   // only the first non-empty line may be a header
    std::size_t line_no = 0;
    std::size_t row_index = 0;   // data rows only
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line(content.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;

        const auto fields = split_csv(line);
        PriceRecord rec;
        const bool ts_ok = fields.size() >= 2 && parse_timestamp(fields[0], rec.timestamp);
        double price = 0.0;
        const bool price_ok = fields.size() >= 2 && parse_double(fields[1], price);
        if (!ts_ok || !price_ok) {
            if (header_candidate) {
                header_candidate = false;
                continue;   // header row
            }
            throw ParseError("malformed row '" + std::string(line) + "'", line_no);
        }
        header_candidate = false;
        if (fields.size() > 3) throw ParseError("too many columns", line_no);
        if (price <= 0.0)
            throw NonPositivePriceError("non-positive price " + std::string(fields[1]), row_index);
        rec.price = price;
        if (fields.size() == 3) {
            int session = 0;
            if (!parse_int(fields[2], session)) throw ParseError("bad session field", line_no);
            rec.session_id = session;
            saw_session_column = true;
        }
        any_time_of_day = any_time_of_day || rec.timestamp.has_time;
        series.records.push_back(rec);
        ++row_index;
    }

    if (series.records.empty()) throw EmptyInputError("no data rows in " + path);

    std::stable_sort(series.records.begin(), series.records.end(),
                     [](const PriceRecord& a, const PriceRecord& b) { return a.timestamp < b.timestamp; });
    for (std::size_t i = 1; i < series.records.size(); ++i) {
        if (series.records[i].timestamp == series.records[i - 1].timestamp)
            throw DuplicateTimestampError("duplicate timestamp " + series.records[i].timestamp.to_string());
    }

    series.resolution =
        config.resolution.value_or(any_time_of_day ? Resolution::intraday : Resolution::daily);

    if (saw_session_column) {
        for (std::size_t i = 1; i < series.records.size(); ++i) {
            if (series.records[i].session_id < series.records[i - 1].session_id)
                throw ParseError("session ids must be non-decreasing", i + 1);
        }
        return series;
    }
    return assign_sessions(std::move(series));
}

}  // namespace sustat
