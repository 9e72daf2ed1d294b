#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tempobeat/error.hpp"
#include "tempobeat/io.hpp"
#include "tempobeat/time.hpp"

namespace tempobeat {

/// sqrt(sum (y - yhat)^2 / n)
inline double rmsd(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) {
        throw Error(ErrorKind::LengthMismatch, "observed and predicted differ in length");
    }
    if (observed.empty()) {
        throw Error(ErrorKind::EmptyInput, "rmsd of an empty series");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - predicted[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(observed.size()));
}

enum class RmsdAxis { Weekday, Hour, WeekdayHour };

inline std::string_view to_string(RmsdAxis a) {
    switch (a) {
    case RmsdAxis::Weekday: return "weekday";
    case RmsdAxis::Hour: return "hour";
    case RmsdAxis::WeekdayHour: return "grid";
    }
    return "grid";
}

/// One cell of a decomposition. `rmsd` is absent when no row fell in it.
struct RmsdCell {
    int weekday = -1;
    int hour = -1;
    std::optional<double> rmsd;
    std::size_t count = 0;
};

/// Per-cell RMSD along one axis. For the weekday axis the units are days
/// (daily means of observed and predicted); otherwise hourly rows.
struct RmsdSlice {
    RmsdAxis axis = RmsdAxis::Hour;
    std::vector<RmsdCell> cells;
    std::size_t n = 0;
    double overall = 0.0;
};

inline RmsdSlice decompose(std::span<const double> observed, std::span<const double> predicted,
                           std::span<const CalendarKey> keys, RmsdAxis axis) {
    if (observed.size() != predicted.size()) {
        throw Error(ErrorKind::LengthMismatch, "observed and predicted differ in length");
    }
    if (keys.size() != observed.size()) {
        throw Error(ErrorKind::MissingKeys, "every row needs a calendar key");
    }
    if (observed.empty()) {
        throw Error(ErrorKind::EmptyInput, "nothing to decompose");
    }
    RmsdSlice out;
    out.axis = axis;
    std::vector<double> ss;
    double total = 0.0;

    auto finish = [&](std::vector<RmsdCell> cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].count > 0) {
                cells[c].rmsd = std::sqrt(ss[c] / static_cast<double>(cells[c].count));
            }
        }
        out.cells = std::move(cells);
        out.overall = std::sqrt(total / static_cast<double>(out.n));
    };

    if (axis == RmsdAxis::Weekday) {
        struct Day {
            double obs = 0.0;
            double pred = 0.0;
            int rows = 0;
            Weekday weekday = Weekday::Mon;
        };
        std::map<std::int64_t, Day> days;
        for (std::size_t i = 0; i < observed.size(); ++i) {
            auto& d = days[keys[i].date.days];
            d.obs += observed[i];
            d.pred += predicted[i];
            d.rows += 1;
            d.weekday = keys[i].weekday;
        }
        std::vector<RmsdCell> cells(7);
        ss.assign(7, 0.0);
        for (int w = 0; w < 7; ++w) cells[static_cast<std::size_t>(w)].weekday = w;
        for (const auto& [day, d] : days) {
            const double diff = (d.obs - d.pred) / d.rows;
            const auto w = static_cast<std::size_t>(d.weekday);
            ss[w] += diff * diff;
            cells[w].count += 1;
            total += diff * diff;
            ++out.n;
        }
        finish(std::move(cells));
        return out;
    }

    const std::size_t ncell = axis == RmsdAxis::Hour ? 24 : 168;
    std::vector<RmsdCell> cells(ncell);
    ss.assign(ncell, 0.0);
    for (std::size_t c = 0; c < ncell; ++c) {
        if (axis == RmsdAxis::Hour) {
            cells[c].hour = static_cast<int>(c);
        } else {
            cells[c].weekday = static_cast<int>(c / 24);
            cells[c].hour = static_cast<int>(c % 24);
        }
    }
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double diff = observed[i] - predicted[i];
        const auto c = axis == RmsdAxis::Hour
                           ? static_cast<std::size_t>(keys[i].hour_of_day)
                           : static_cast<std::size_t>(static_cast<int>(keys[i].weekday) * 24 + keys[i].hour_of_day);
        ss[c] += diff * diff;
        cells[c].count += 1;
        total += diff * diff;
        ++out.n;
    }
    finish(std::move(cells));
    return out;
}

struct RmsdReport {
    std::string model_tag;
    double overall = 0.0;
    std::size_t n = 0;
    RmsdSlice by_weekday;
    RmsdSlice by_hour;
    RmsdSlice by_weekday_hour;
};

inline RmsdReport rmsd_report(std::string model_tag, std::span<const double> observed,
                              std::span<const double> predicted, std::span<const CalendarKey> keys) {
    RmsdReport r;
    r.model_tag = std::move(model_tag);
    r.overall = rmsd(observed, predicted);
    r.n = observed.size();
    r.by_weekday = decompose(observed, predicted, keys, RmsdAxis::Weekday);
    r.by_hour = decompose(observed, predicted, keys, RmsdAxis::Hour);
    r.by_weekday_hour = decompose(observed, predicted, keys, RmsdAxis::WeekdayHour);
    return r;
}

struct RankedSlot {
    Weekday weekday = Weekday::Mon;
    int hour = 0;
    double rmsd = 0.0;
    std::size_t count = 0;
};

struct Recommendation {
    std::vector<std::string> models;
    std::vector<RankedSlot> ranked;
    Weekday best_weekday = Weekday::Mon;
    int best_hour = 0;
};

namespace detail {

/// Index of the smallest mean-over-reports value along one axis; earliest wins ties.
inline std::size_t axis_argmin(std::span<const RmsdReport> reports, const RmsdSlice RmsdReport::*slice,
                               std::size_t ncell) {
    std::size_t best = ncell;
    double best_score = 0.0;
    for (std::size_t c = 0; c < ncell; ++c) {
        double sum = 0.0;
        int used = 0;
        for (const auto& r : reports) {
            const auto& cell = (r.*slice).cells[c];
            if (cell.rmsd) {
                sum += *cell.rmsd;
                ++used;
            }
        }
        if (used == 0) continue;
        const double score = sum / used;
        if (best == ncell || score < best_score) {
            best = c;
            best_score = score;
        }
    }
    return best == ncell ? 0 : best;
}

} // namespace detail

/// Ranks weekday-hour slots by the mean RMSD over the supplied models,
/// ignoring cells observed fewer than `min_count` times in a model.
inline Recommendation recommend(std::span<const RmsdReport> reports, std::size_t min_count = 4) {
    if (reports.empty()) {
        throw Error(ErrorKind::EmptyInput, "recommend needs at least one RMSD report");
    }
    if (min_count < 1) {
        throw Error(ErrorKind::InvalidConfig, "min_count must be at least 1");
    }
    Recommendation out;
    for (const auto& r : reports) out.models.push_back(r.model_tag);
    for (std::size_t c = 0; c < 168; ++c) {
        double sum = 0.0;
        int used = 0;
        std::size_t count = 0;
        for (const auto& r : reports) {
            const auto& cell = r.by_weekday_hour.cells.at(c);
            if (!cell.rmsd || cell.count < min_count) continue;
            sum += *cell.rmsd;
            count = used == 0 ? cell.count : std::min(count, cell.count);
            ++used;
        }
        if (used == 0) continue;
        out.ranked.push_back(RankedSlot{static_cast<Weekday>(c / 24), static_cast<int>(c % 24), sum / used, count});
    }
    if (out.ranked.empty()) {
        throw Error(ErrorKind::NoEligibleCells, "no weekday-hour cell has at least " + std::to_string(min_count) + " rows");
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const RankedSlot& a, const RankedSlot& b) {
        if (a.rmsd != b.rmsd) return a.rmsd < b.rmsd;
        if (a.weekday != b.weekday) return a.weekday < b.weekday;
        return a.hour < b.hour;
    });
    out.best_weekday = static_cast<Weekday>(detail::axis_argmin(reports, &RmsdReport::by_weekday, 7));
    out.best_hour = static_cast<int>(detail::axis_argmin(reports, &RmsdReport::by_hour, 24));
    return out;
}

inline std::string rmsd_csv(const RmsdSlice& s) {
    std::string out;
    switch (s.axis) {
    case RmsdAxis::Weekday: out = "weekday,rmsd,count\n"; break;
    case RmsdAxis::Hour: out = "hour,rmsd,count\n"; break;
    case RmsdAxis::WeekdayHour: out = "weekday,hour,rmsd,count\n"; break;
    }
    for (const auto& c : s.cells) {
        if (c.weekday >= 0) {
            out += std::string(to_string(static_cast<Weekday>(c.weekday))) + ",";
        }
        if (c.hour >= 0) {
            out += std::to_string(c.hour) + ",";
        }
        out += (c.rmsd ? io::format_double(*c.rmsd) : std::string()) + "," + std::to_string(c.count) + "\n";
    }
    return out;
}

/// Parses a CSV written by rmsd_csv back into a slice (overall/n not stored).
inline RmsdSlice parse_rmsd_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    const auto lines = io::read_lines(in);
    if (lines.empty()) throw Error(ErrorKind::ParseError, "empty RMSD table");
    RmsdSlice s;
    const auto& header = lines.front().text;
    if (header == "weekday,rmsd,count") {
        s.axis = RmsdAxis::Weekday;
    } else if (header == "hour,rmsd,count") {
        s.axis = RmsdAxis::Hour;
    } else if (header == "weekday,hour,rmsd,count") {
        s.axis = RmsdAxis::WeekdayHour;
    } else {
        throw Error(ErrorKind::ParseError, "unrecognised RMSD table header", lines.front().number);
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = io::split(lines[i].text);
        const std::size_t want = s.axis == RmsdAxis::WeekdayHour ? 4 : 3;
        if (f.size() != want) {
            throw Error(ErrorKind::ParseError, "expected " + std::to_string(want) + " fields", lines[i].number);
        }
        RmsdCell c;
        std::size_t k = 0;
        if (s.axis != RmsdAxis::Hour) {
            const auto w = parse_weekday(f[k++]);
            if (!w) throw Error(ErrorKind::ParseError, "bad weekday", lines[i].number);
            c.weekday = static_cast<int>(*w);
        }
        if (s.axis != RmsdAxis::Weekday) {
            c.hour = static_cast<int>(io::parse_double(f[k++], lines[i].number, "hour"));
        }
        if (!f[k].empty()) c.rmsd = io::parse_double(f[k], lines[i].number, "rmsd");
        ++k;
        c.count = static_cast<std::size_t>(io::parse_double(f[k], lines[i].number, "count"));
        s.n += c.count;
        s.cells.push_back(c);
    }
    return s;
}

} // namespace tempobeat
