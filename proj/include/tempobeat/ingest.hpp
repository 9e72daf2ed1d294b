#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tempobeat/core.hpp"
#include "tempobeat/error.hpp"
#include "tempobeat/io.hpp"
#include "tempobeat/time.hpp"

namespace tempobeat {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class GapPolicy { Error, Zero, Interpolate };

inline std::optional<GapPolicy> parse_gap_policy(std::string_view s) {
    if (s == "error") return GapPolicy::Error;
    if (s == "zero") return GapPolicy::Zero;
    if (s == "interpolate") return GapPolicy::Interpolate;
    return std::nullopt;
}

inline std::string_view to_string(GapPolicy p) {
    switch (p) {
    case GapPolicy::Error: return "error";
    case GapPolicy::Zero: return "zero";
    case GapPolicy::Interpolate: return "interpolate";
    }
    return "error";
}

struct IngestConfig {
    /// Label only: stamps are wall-clock hours of this zone, no conversion.
    std::string timezone = "Europe/Stockholm";
    std::vector<std::string> stations{"malmo", "stockholm"};
    GapPolicy fill_gaps = GapPolicy::Error;
    int weather_max_gap = 3;
    double anomaly_k = 2.0;
};

/// `key = value` lines; `#` starts a comment. Recognised keys: timezone,
/// stations (comma separated), fill_gaps, weather_max_gap, anomaly_k.
inline IngestConfig parse_config(std::istream& in, IngestConfig base = {}) {
    for (const auto& line : io::read_lines(in)) {
        std::string_view text = line.text;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = io::trim(text);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::ParseError, "expected 'key = value'", line.number);
        }
        const auto key = io::trim(text.substr(0, eq));
        const auto value = io::trim(text.substr(eq + 1));
        if (key == "timezone") {
            base.timezone = std::string(value);
        } else if (key == "stations") {
            base.stations.clear();
            for (auto s : io::split(value)) {
                s = io::trim(s);
                if (!s.empty()) {
                    base.stations.emplace_back(s);
                }
            }
        } else if (key == "fill_gaps") {
            const auto p = parse_gap_policy(value);
            if (!p) {
                throw Error(ErrorKind::ParseError, "fill_gaps must be error|zero|interpolate", line.number);
            }
            base.fill_gaps = *p;
        } else if (key == "weather_max_gap") {
            base.weather_max_gap = static_cast<int>(io::parse_double(value, line.number, "weather_max_gap"));
        } else if (key == "anomaly_k") {
            base.anomaly_k = io::parse_double(value, line.number, "anomaly_k");
        } else {
            throw Error(ErrorKind::ParseError, "unknown config key '" + std::string(key) + "'", line.number);
        }
    }
    return base;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class EventCategory : int { SecularHoliday = 0, ReligiousHoliday, Sports, TvMedia, WeatherTransport };

inline constexpr std::size_t kEventCategoryCount = 5;
inline constexpr std::array<std::string_view, kEventCategoryCount> kEventCategoryNames{
    "secular_holiday", "religious_holiday", "sports", "tv_media", "weather_transport"};

inline std::string_view to_string(EventCategory c) { return kEventCategoryNames[static_cast<int>(c)]; }

inline std::optional<EventCategory> parse_event_category(std::string_view s) {
    for (std::size_t i = 0; i < kEventCategoryCount; ++i) {
        if (kEventCategoryNames[i] == s) {
            return static_cast<EventCategory>(i);
        }
    }
    return std::nullopt;
}

struct WeatherRow {
    HourStamp stamp;
    std::string station;
    double air_temp_c = 0.0;
    double precip_mm = 0.0;
};

/// Contiguous hourly series for one station.
struct StationSeries {
    HourStamp start;
    std::vector<double> air_temp_c;
    std::vector<double> precip_mm;

    [[nodiscard]] std::size_t size() const { return air_temp_c.size(); }
    [[nodiscard]] HourStamp end() const { return start + static_cast<std::int64_t>(size()); }
};

struct FillRecord {
    std::string station;
    HourStamp stamp;
};

struct WeatherData {
    std::vector<std::string> stations;
    std::map<std::string, StationSeries> series;
    std::vector<FillRecord> fills;
};

/// Half-open span [start, end). All-day events cover whole dates.
struct EventRow {
    HourStamp start;
    HourStamp end;
    EventCategory category = EventCategory::SecularHoliday;
    bool all_day = false;
};

struct HourGrid {
    HourStamp start;
    std::size_t size = 0;

    [[nodiscard]] HourStamp at(std::size_t i) const { return start + static_cast<std::int64_t>(i); }
    [[nodiscard]] HourStamp end() const { return start + static_cast<std::int64_t>(size); }
    bool operator==(const HourGrid&) const = default;
};

/// Column-major per-hour predictors: event dummies first, then weather.
struct CovariateTable {
    HourGrid grid;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }
    [[nodiscard]] const std::vector<double>& column(std::string_view name) const {
        const auto i = index_of(name);
        if (!i) {
            throw Error(ErrorKind::UnknownColumn, "no covariate column '" + std::string(name) + "'");
        }
        return columns[*i];
    }
    bool operator==(const CovariateTable&) const = default;
};

struct AnalysisDataset {
    HourGrid grid;
    std::vector<double> values;
    /// empty when the observation file carried no row_count column
    std::vector<double> row_counts;
    StandardizedSeries y;
    std::vector<CalendarKey> keys;
    CovariateTable covariates;
    std::vector<HourStamp> filled_hours;
    std::string timezone;

    [[nodiscard]] std::size_t size() const { return grid.size; }
    [[nodiscard]] std::vector<HourlyObservation> observations() const {
        std::vector<HourlyObservation> out(grid.size);
        for (std::size_t i = 0; i < grid.size; ++i) {
            out[i].stamp = grid.at(i);
            out[i].value = values[i];
            if (!row_counts.empty()) {
                out[i].row_count = row_counts[i];
            }
        }
        return out;
    }
};

inline std::vector<std::string> event_column_names() {
    return {kEventCategoryNames.begin(), kEventCategoryNames.end()};
}

/// Weather column names, grouped by variable then station (8 per station).
inline std::vector<std::string> weather_column_names(const std::vector<std::string>& stations) {
    static constexpr std::array<std::string_view, 8> stems{
        "temp_{}", "precip_{}", "precip_{}_sq", "temp_{}_sq",
        "d_precip_{}", "d_temp_{}", "d_precip_{}_sq", "d_temp_{}_sq"};
    std::vector<std::string> out;
    for (auto stem : stems) {
        for (const auto& st : stations) {
            std::string name(stem);
            name.replace(name.find("{}"), 2, st);
            out.push_back(std::move(name));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

namespace detail {

inline void expect_header(const std::vector<io::Line>& lines, std::initializer_list<std::string_view> required,
                          std::initializer_list<std::string_view> optional_tail, std::string_view what,
                          std::size_t* columns_out) {
    if (lines.empty()) {
        throw Error(ErrorKind::ParseError, std::string(what) + " file is empty", 1);
    }
    const auto fields = io::split(lines.front().text);
    std::vector<std::string_view> want(required);
    bool ok = fields.size() >= want.size() && fields.size() <= want.size() + optional_tail.size();
    for (std::size_t i = 0; ok && i < fields.size(); ++i) {
        const auto expected = i < want.size() ? want[i] : *(optional_tail.begin() + (i - want.size()));
        ok = io::trim(fields[i]) == expected;
    }
    if (!ok) {
        std::string expect;
        for (auto w : required) {
            expect += (expect.empty() ? "" : ",") + std::string(w);
        }
        throw Error(ErrorKind::ParseError, std::string(what) + " header must be '" + expect + "'",
                    lines.front().number);
    }
    *columns_out = fields.size();
}

} // namespace detail

/// `timestamp,size_bytes[,row_count]`; result sorted by stamp.
inline std::vector<HourlyObservation> parse_observations(std::istream& in) {
    const auto lines = io::read_lines(in);
    std::size_t ncol = 0;
    detail::expect_header(lines, {"timestamp", "size_bytes"}, {"row_count"}, "observations", &ncol);
    std::vector<HourlyObservation> out;
    std::vector<std::size_t> line_of;
    out.reserve(lines.size());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& line = lines[i];
        const auto f = io::split(line.text);
        if (f.size() != ncol) {
            throw Error(ErrorKind::ParseError, "expected " + std::to_string(ncol) + " fields", line.number);
        }
        HourlyObservation obs;
        obs.stamp = parse_hour_stamp(io::trim(f[0]), line.number);
        obs.value = io::parse_double(io::trim(f[1]), line.number, "size_bytes");
        if (obs.value < 0.0) {
            throw Error(ErrorKind::ParseError, "size_bytes must be non-negative", line.number);
        }
        if (ncol == 3) {
            const double rc = io::parse_double(io::trim(f[2]), line.number, "row_count");
            if (rc < 0.0) {
                throw Error(ErrorKind::ParseError, "row_count must be non-negative", line.number);
            }
            obs.row_count = rc;
        }
        out.push_back(obs);
        line_of.push_back(line.number);
    }
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out[a].stamp < out[b].stamp; });
    std::vector<HourlyObservation> sorted;
    sorted.reserve(out.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0 && out[order[k]].stamp == out[order[k - 1]].stamp) {
            throw Error(ErrorKind::DuplicateStamp,
                        "timestamp " + out[order[k]].stamp.to_string() + " appears more than once",
                        std::max(line_of[order[k]], line_of[order[k - 1]]));
        }
        sorted.push_back(out[order[k]]);
    }
    return sorted;
}

/// `timestamp,station,air_temp_c,precip_mm`. Gaps of up to `max_gap` hours
/// inside a station's range are linearly interpolated and reported.
inline WeatherData parse_weather(std::istream& in, const std::vector<std::string>& stations, int max_gap = 3) {
    const auto lines = io::read_lines(in);
    std::size_t ncol = 0;
    detail::expect_header(lines, {"timestamp", "station", "air_temp_c", "precip_mm"}, {}, "weather", &ncol);
    struct Raw {
        HourStamp stamp;
        double temp;
        double precip;
        std::size_t line;
    };
    std::map<std::string, std::vector<Raw>> rows;
    for (const auto& st : stations) {
        rows[st];
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& line = lines[i];
        const auto f = io::split(line.text);
        if (f.size() != 4) {
            throw Error(ErrorKind::ParseError, "expected 4 fields", line.number);
        }
        const std::string station(io::trim(f[1]));
        auto it = rows.find(station);
        if (it == rows.end()) {
            throw Error(ErrorKind::UnknownStation, "station '" + station + "' is not configured", line.number);
        }
        Raw r{parse_hour_stamp(io::trim(f[0]), line.number),
              io::parse_double(io::trim(f[2]), line.number, "air_temp_c"),
              io::parse_double(io::trim(f[3]), line.number, "precip_mm"), line.number};
        if (r.temp < -60.0 || r.temp > 60.0) {
            throw Error(ErrorKind::ParseError, "air_temp_c outside [-60, 60]", line.number);
        }
        if (r.precip < 0.0) {
            throw Error(ErrorKind::ParseError, "precip_mm must be non-negative", line.number);
        }
        it->second.push_back(r);
    }
    WeatherData out;
    out.stations = stations;
    for (const auto& st : stations) {
        auto& raw = rows[st];
        if (raw.empty()) {
            throw Error(ErrorKind::UnknownStation, "configured station '" + st + "' has no weather rows");
        }
        std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.stamp < b.stamp; });
        StationSeries s;
        s.start = raw.front().stamp;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (k > 0) {
                const auto step = raw[k].stamp - raw[k - 1].stamp;
                if (step == 0) {
                    throw Error(ErrorKind::DuplicateStamp,
                                "station '" + st + "' has two rows for " + raw[k].stamp.to_string(), raw[k].line);
                }
                const auto missing = step - 1;
                if (missing > max_gap) {
                    throw Error(ErrorKind::GapTooLarge,
                                "station '" + st + "' misses " + std::to_string(missing) + " hours after " +
                                    raw[k - 1].stamp.to_string(),
                                raw[k].line);
                }
                for (std::int64_t g = 1; g <= missing; ++g) {
                    const double t = static_cast<double>(g) / static_cast<double>(step);
                    s.air_temp_c.push_back(raw[k - 1].temp + t * (raw[k].temp - raw[k - 1].temp));
                    s.precip_mm.push_back(raw[k - 1].precip + t * (raw[k].precip - raw[k - 1].precip));
                    out.fills.push_back(FillRecord{st, raw[k - 1].stamp + g});
                }
            }
            s.air_temp_c.push_back(raw[k].temp);
            s.precip_mm.push_back(raw[k].precip);
        }
        out.series.emplace(st, std::move(s));
    }
    return out;
}

/// `start,end,category,all_day`. All-day rows take dates (end optional and
/// inclusive); span rows take hour stamps with end exclusive.
inline std::vector<EventRow> parse_events(std::istream& in) {
    const auto lines = io::read_lines(in);
    std::size_t ncol = 0;
    detail::expect_header(lines, {"start", "end", "category", "all_day"}, {}, "events", &ncol);
    std::vector<EventRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& line = lines[i];
        const auto f = io::split(line.text);
        if (f.size() != 4) {
            throw Error(ErrorKind::ParseError, "expected 4 fields", line.number);
        }
        const auto cat_text = io::trim(f[2]);
        const auto cat = parse_event_category(cat_text);
        if (!cat) {
            throw Error(ErrorKind::UnknownCategory, "unknown event category '" + std::string(cat_text) + "'",
                        line.number);
        }
        const auto flag = io::trim(f[3]);
        bool all_day = false;
        if (flag == "true" || flag == "1") {
            all_day = true;
        } else if (flag != "false" && flag != "0") {
            throw Error(ErrorKind::ParseError, "all_day must be true or false", line.number);
        }
        EventRow ev;
        ev.category = *cat;
        ev.all_day = all_day;
        const auto start_text = io::trim(f[0]);
        const auto end_text = io::trim(f[1]);
        if (all_day) {
            const CivilDate first = parse_date(start_text.substr(0, std::min<std::size_t>(10, start_text.size())),
                                               line.number);
            CivilDate last = first;
            if (!end_text.empty()) {
                last = parse_date(end_text.substr(0, std::min<std::size_t>(10, end_text.size())), line.number);
            }
            if (last < first) {
                throw Error(ErrorKind::InvertedSpan, "event ends before it starts", line.number);
            }
            ev.start = HourStamp::from_civil(first, 0);
            ev.end = HourStamp::from_civil(CivilDate{last.days + 1}, 0);
        } else {
            if (end_text.empty()) {
                throw Error(ErrorKind::ParseError, "span events need an end stamp", line.number);
            }
            ev.start = parse_hour_stamp(start_text, line.number);
            ev.end = parse_hour_stamp(end_text, line.number);
            if (!(ev.start < ev.end)) {
                throw Error(ErrorKind::InvertedSpan, "event end must be after its start", line.number);
            }
        }
        out.push_back(ev);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Covariates and dataset assembly
// ---------------------------------------------------------------------------

inline CovariateTable engineer_covariates(const std::optional<WeatherData>& weather,
                                          const std::vector<EventRow>& events, HourGrid grid) {
    CovariateTable table;
    table.grid = grid;
    table.names = event_column_names();
    table.columns.assign(kEventCategoryCount, std::vector<double>(grid.size, 0.0));
    for (const auto& ev : events) {
        auto& col = table.columns[static_cast<int>(ev.category)];
        const auto lo = std::max<std::int64_t>(ev.start - grid.start, 0);
        const auto hi = std::min<std::int64_t>(ev.end - grid.start, static_cast<std::int64_t>(grid.size));
        for (auto i = lo; i < hi; ++i) {
            col[static_cast<std::size_t>(i)] = 1.0;
        }
    }
    if (!weather) {
        return table;
    }
    const auto& stations = weather->stations;
    std::map<std::string, std::array<std::vector<double>, 8>> per_station;
    for (const auto& st : stations) {
        const auto it = weather->series.find(st);
        if (it == weather->series.end()) {
            throw Error(ErrorKind::CoverageGap, "no weather series for station '" + st + "'");
        }
        const StationSeries& s = it->second;
        if (grid.start < s.start || s.end() < grid.end()) {
            throw Error(ErrorKind::CoverageGap, "weather for '" + st + "' covers " + s.start.to_string() + " .. " +
                                                    (s.end() + -1).to_string() + " but the grid needs " +
                                                    grid.start.to_string() + " .. " +
                                                    (grid.end() + -1).to_string());
        }
        const auto offset = static_cast<std::size_t>(grid.start - s.start);
        std::array<std::vector<double>, 8> cols;
        for (auto& c : cols) {
            c.assign(grid.size, 0.0);
        }
        for (std::size_t i = 0; i < grid.size; ++i) {
            const double t = s.air_temp_c[offset + i];
            const double p = s.precip_mm[offset + i];
            const double dt = i == 0 ? 0.0 : t - s.air_temp_c[offset + i - 1];
            const double dp = i == 0 ? 0.0 : p - s.precip_mm[offset + i - 1];
            cols[0][i] = t;
            cols[1][i] = p;
            cols[2][i] = p * p;
            cols[3][i] = t * t;
            cols[4][i] = dp;
            cols[5][i] = dt;
            cols[6][i] = dp * dp;
            cols[7][i] = dt * dt;
        }
        per_station.emplace(st, std::move(cols));
    }
    const auto names = weather_column_names(stations);
    std::size_t k = 0;
    for (std::size_t v = 0; v < 8; ++v) {
        for (const auto& st : stations) {
            table.names.push_back(names[k++]);
            table.columns.push_back(per_station[st][v]);
        }
    }
    return table;
}

/// Joins observations, weather and events on a contiguous hourly grid.
inline AnalysisDataset assemble_dataset(const std::vector<HourlyObservation>& obs,
                                        const std::optional<WeatherData>& weather,
                                        const std::vector<EventRow>& events, const IngestConfig& config) {
    if (obs.empty()) {
        throw Error(ErrorKind::EmptySeries, "observation file has no rows");
    }
    for (std::size_t i = 1; i < obs.size(); ++i) {
        if (!(obs[i - 1].stamp < obs[i].stamp)) {
            throw Error(ErrorKind::DuplicateStamp, "observations must be strictly increasing at " +
                                                       obs[i].stamp.to_string());
        }
    }
    AnalysisDataset ds;
    ds.timezone = config.timezone;
    ds.grid = HourGrid{obs.front().stamp, static_cast<std::size_t>(obs.back().stamp - obs.front().stamp + 1)};
    const bool with_counts = std::all_of(obs.begin(), obs.end(), [](const auto& o) { return o.row_count.has_value(); });
    ds.values.assign(ds.grid.size, 0.0);
    if (with_counts) {
        ds.row_counts.assign(ds.grid.size, 0.0);
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < ds.grid.size; ++i) {
        const HourStamp stamp = ds.grid.at(i);
        if (obs[k].stamp == stamp) {
            ds.values[i] = obs[k].value;
            if (with_counts) {
                ds.row_counts[i] = *obs[k].row_count;
            }
            ++k;
            continue;
        }
        if (config.fill_gaps == GapPolicy::Error) {
            throw Error(ErrorKind::ObservationGap, "observation missing for " + stamp.to_string());
        }
        ds.filled_hours.push_back(stamp);
        if (config.fill_gaps == GapPolicy::Interpolate) {
            const auto& before = obs[k - 1];
            const auto& after = obs[k];
            const double t = static_cast<double>(stamp - before.stamp) / static_cast<double>(after.stamp - before.stamp);
            ds.values[i] = before.value + t * (after.value - before.value);
            if (with_counts) {
                ds.row_counts[i] = *before.row_count + t * (*after.row_count - *before.row_count);
            }
        }
    }
    std::vector<HourlyObservation> full(ds.grid.size);
    for (std::size_t i = 0; i < ds.grid.size; ++i) {
        full[i].stamp = ds.grid.at(i);
        full[i].value = ds.values[i];
    }
    ds.y = standardize(full);
    ds.keys.reserve(ds.grid.size);
    for (std::size_t i = 0; i < ds.grid.size; ++i) {
        ds.keys.push_back(calendar_key(ds.grid.at(i)));
    }
    ds.covariates = engineer_covariates(weather, events, ds.grid);
    return ds;
}

/// Checks the covariate invariants (0/1 dummies, exact squares, zero first
/// difference at the grid start). Throws ParseError naming the first failure.
inline void validate_covariates(const CovariateTable& t) {
    for (std::size_t c = 0; c < t.names.size(); ++c) {
        const auto& name = t.names[c];
        const auto& col = t.columns[c];
        if (col.size() != t.grid.size) {
            throw Error(ErrorKind::ParseError, "column '" + name + "' has the wrong length");
        }
        if (parse_event_category(name)) {
            for (double v : col) {
                if (v != 0.0 && v != 1.0) {
                    throw Error(ErrorKind::ParseError, "dummy column '" + name + "' is not 0/1");
                }
            }
        }
        if (name.size() > 3 && name.ends_with("_sq")) {
            std::string base = name.substr(0, name.size() - 3);
            const auto b = t.index_of(base);
            if (!b) {
                throw Error(ErrorKind::ParseError, "squared column '" + name + "' has no base column");
            }
            for (std::size_t i = 0; i < col.size(); ++i) {
                const double x = t.columns[*b][i];
                if (col[i] != x * x) {
                    throw Error(ErrorKind::ParseError, "column '" + name + "' is not the square of '" + base + "'");
                }
            }
        }
        if (name.rfind("d_", 0) == 0 && !name.ends_with("_sq") && !col.empty() && col.front() != 0.0) {
            throw Error(ErrorKind::ParseError, "difference column '" + name + "' must start at 0");
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical bundle (dataset.csv + meta.json)
// ---------------------------------------------------------------------------

inline constexpr std::string_view kBundleFormat = "tempobeat-bundle";
inline constexpr int kBundleVersion = 1;

inline std::string dataset_csv(const AnalysisDataset& ds) {
    std::string out = "timestamp,value,z";
    const bool with_counts = !ds.row_counts.empty();
    if (with_counts) {
        out += ",row_count";
    }
    for (const auto& name : ds.covariates.names) {
        out += "," + name;
    }
    out += "\n";
    for (std::size_t i = 0; i < ds.grid.size; ++i) {
        out += ds.grid.at(i).to_string();
        out += "," + io::format_double(ds.values[i]);
        out += "," + io::format_double(ds.y.z[i]);
        if (with_counts) {
            out += "," + io::format_double(ds.row_counts[i]);
        }
        for (const auto& col : ds.covariates.columns) {
            out += "," + io::format_double(col[i]);
        }
        out += "\n";
    }
    return out;
}

inline nlohmann::json dataset_meta(const AnalysisDataset& ds) {
    nlohmann::json filled = nlohmann::json::array();
    for (const auto& s : ds.filled_hours) {
        filled.push_back(s.to_string());
    }
    return nlohmann::json{{"format", kBundleFormat},
                          {"version", kBundleVersion},
                          {"timezone", ds.timezone},
                          {"grid_start", ds.grid.start.to_string()},
                          {"rows", ds.grid.size},
                          {"mean", ds.y.mean},
                          {"sd", ds.y.sd},
                          {"columns", ds.covariates.names},
                          {"filled_hours", filled}};
}

inline void write_bundle(const AnalysisDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::write_file((dir / "dataset.csv").string(), dataset_csv(ds));
    io::write_file((dir / "meta.json").string(), dataset_meta(ds).dump(2) + "\n");
}

inline AnalysisDataset read_bundle(const std::filesystem::path& dir) {
    const auto meta_text = io::read_file((dir / "meta.json").string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("meta.json: ") + e.what());
    }
    if (meta.value("format", "") != kBundleFormat || meta.value("version", 0) != kBundleVersion) {
        throw Error(ErrorKind::ParseError, "meta.json is not a version-1 dataset bundle");
    }
    AnalysisDataset ds;
    ds.timezone = meta.at("timezone").get<std::string>();
    ds.y.mean = meta.at("mean").get<double>();
    ds.y.sd = meta.at("sd").get<double>();
    for (const auto& s : meta.at("filled_hours")) {
        ds.filled_hours.push_back(parse_hour_stamp(s.get<std::string>()));
    }
    const auto names = meta.at("columns").get<std::vector<std::string>>();

    std::istringstream in(io::read_file((dir / "dataset.csv").string()));
    const auto lines = io::read_lines(in);
    if (lines.empty()) {
        throw Error(ErrorKind::ParseError, "dataset.csv is empty");
    }
    const auto header = io::split(lines.front().text);
    const bool with_counts = header.size() > 3 && header[3] == "row_count";
    const std::size_t first_cov = with_counts ? 4 : 3;
    if (header.size() != first_cov + names.size() || header[0] != "timestamp" || header[1] != "value" ||
        header[2] != "z") {
        throw Error(ErrorKind::ParseError, "dataset.csv header does not match meta.json", lines.front().number);
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (header[first_cov + c] != names[c]) {
            throw Error(ErrorKind::ParseError, "dataset.csv column order does not match meta.json",
                        lines.front().number);
        }
    }
    const std::size_t n = lines.size() - 1;
    ds.covariates.names = names;
    ds.covariates.columns.assign(names.size(), std::vector<double>(n));
    ds.values.resize(n);
    ds.y.z.resize(n);
    ds.y.stamps.resize(n);
    if (with_counts) {
        ds.row_counts.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& line = lines[i + 1];
        const auto f = io::split(line.text);
        if (f.size() != header.size()) {
            throw Error(ErrorKind::ParseError, "wrong number of fields", line.number);
        }
        const HourStamp stamp = parse_hour_stamp(f[0], line.number);
        if (i == 0) {
            ds.grid.start = stamp;
        } else if (stamp - ds.y.stamps[i - 1] != 1) {
            throw Error(ErrorKind::ObservationGap, "observation missing for " + (ds.y.stamps[i - 1] + 1).to_string(),
                        line.number);
        }
        ds.y.stamps[i] = stamp;
        ds.values[i] = io::parse_double(f[1], line.number, "value");
        ds.y.z[i] = io::parse_double(f[2], line.number, "z");
        if (with_counts) {
            ds.row_counts[i] = io::parse_double(f[3], line.number, "row_count");
        }
        for (std::size_t c = 0; c < names.size(); ++c) {
            ds.covariates.columns[c][i] = io::parse_double(f[first_cov + c], line.number, names[c]);
        }
    }
    ds.grid.size = n;
    ds.covariates.grid = ds.grid;
    ds.keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.keys.push_back(calendar_key(ds.grid.at(i)));
    }
    validate_covariates(ds.covariates);
    return ds;
}

} // namespace tempobeat
