#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tempobeat/core.hpp"
#include "tempobeat/error.hpp"
#include "tempobeat/io.hpp"
#include "tempobeat/time.hpp"

namespace tempobeat {

enum class LagUnit { Hour, Day };

inline std::string_view to_string(LagUnit u) { return u == LagUnit::Hour ? "hour" : "day"; }

struct AcfSeries {
    LagUnit lag_unit = LagUnit::Hour;
    int lag_step = 1;
    std::vector<int> lags;
    std::vector<double> r;
};

/**
 * Lag-h autocorrelation with the truncated cross-product sum in the
 * numerator and all N squared deviations in the denominator:
 *
 *   r_h = sum_{t<N-h} (y_t - m)(y_{t+h} - m) / sum_t (y_t - m)^2
 *
 * The full-N denominator bounds |r_h| by 1 for every lag.
 */
inline double acf_at_lag(std::span<const double> y, std::size_t h) {
    const std::size_t n = y.size();
    if (h >= n) {
        throw Error(ErrorKind::LagOutOfRange,
                    "lag " + std::to_string(h) + " needs more than " + std::to_string(n) + " points");
    }
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double den = 0.0;
    for (double v : y) {
        den += (v - mean) * (v - mean);
    }
    if (!(den > 0.0)) {
        throw Error(ErrorKind::DegenerateSeries, "autocorrelation of a constant series");
    }
    if (h == 0) {
        return 1.0;
    }
    double num = 0.0;
    for (std::size_t t = 0; t + h < n; ++t) {
        num += (y[t] - mean) * (y[t + h] - mean);
    }
    return num / den;
}

/// r at lags step, 2*step, ... up to max_lag (inclusive).
inline AcfSeries correlogram(std::span<const double> y, LagUnit unit, int lag_step, int max_lag) {
    if (lag_step < 1) {
        throw Error(ErrorKind::InvalidConfig, "lag step must be at least 1");
    }
    if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= y.size()) {
        throw Error(ErrorKind::LagOutOfRange,
                    "horizon " + std::to_string(max_lag) + " needs more than " + std::to_string(y.size()) + " points");
    }
    AcfSeries out;
    out.lag_unit = unit;
    out.lag_step = lag_step;
    for (int h = lag_step; h <= max_lag; h += lag_step) {
        out.lags.push_back(h);
        out.r.push_back(acf_at_lag(y, static_cast<std::size_t>(h)));
    }
    return out;
}

/// The four standard correlogram configurations: hourly lags over one day,
/// same-hour lags over ~2/3 of a month, daily lags over a month and
/// same-weekday lags over ~7 months.
struct CorrelogramPreset {
    std::string_view name;
    LagUnit unit;
    int step;
    int horizon;
};

inline constexpr int kDefaultHourHorizon = 480;
inline constexpr int kDefaultWeekHorizon = 210;

inline std::vector<CorrelogramPreset> correlogram_presets(int hour_horizon = kDefaultHourHorizon,
                                                          int week_horizon = kDefaultWeekHorizon) {
    return {{"hour-step1", LagUnit::Hour, 1, 24},
            {"hour-step24", LagUnit::Hour, 24, hour_horizon},
            {"day-step1", LagUnit::Day, 1, 30},
            {"day-step7", LagUnit::Day, 7, week_horizon}};
}

struct DailySeries {
    std::vector<CivilDate> dates;
    std::vector<double> totals;
    std::vector<double> z;
    double mean = 0.0;
    double sd = 1.0;
    /// dates dropped because fewer than 24 hours were present
    std::vector<CivilDate> trimmed;
};

/// Daily totals over complete (24-hour) dates, standardized across days.
inline DailySeries aggregate_daily(std::span<const HourlyObservation> obs) {
    std::map<std::int64_t, std::pair<double, int>> acc;
    for (const auto& o : obs) {
        auto& slot = acc[o.stamp.date().days];
        slot.first += o.value;
        slot.second += 1;
    }
    DailySeries out;
    for (const auto& [day, slot] : acc) {
        if (slot.second == 24) {
            out.dates.push_back(CivilDate{day});
            out.totals.push_back(slot.first);
        } else {
            out.trimmed.push_back(CivilDate{day});
        }
    }
    if (out.totals.size() < 2) {
        throw Error(ErrorKind::InsufficientDays, "need at least two complete days, found " +
                                                     std::to_string(out.totals.size()));
    }
    Moments m;
    out.z = zscores(out.totals, &m);
    out.mean = m.mean;
    out.sd = m.sd;
    return out;
}

inline std::string acf_csv(const AcfSeries& s) {
    std::string out = "lag,r\n";
    for (std::size_t i = 0; i < s.lags.size(); ++i) {
        out += std::to_string(s.lags[i]) + "," + io::format_double(s.r[i]) + "\n";
    }
    return out;
}

} // namespace tempobeat
