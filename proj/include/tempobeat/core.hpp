#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tempobeat/error.hpp"
#include "tempobeat/time.hpp"

namespace tempobeat {

/// One hour of activity: the hour file's byte size (or a row count).
struct HourlyObservation {
    HourStamp stamp;
    double value = 0.0;
    std::optional<double> row_count;

    [[nodiscard]] CalendarKey key() const { return calendar_key(stamp); }
};

/// z-scores of a series together with the population mean/sd used.
struct StandardizedSeries {
    std::vector<HourStamp> stamps;
    std::vector<double> z;
    double mean = 0.0;
    double sd = 1.0;

    [[nodiscard]] std::size_t size() const { return z.size(); }

    /// z * sd + mean for every entry.
    [[nodiscard]] std::vector<double> original_values() const {
        std::vector<double> out(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            out[i] = z[i] * sd + mean;
        }
        return out;
    }
};

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

/// Population (divide-by-N) mean and standard deviation, two-pass.
inline Moments population_moments(std::span<const double> values) {
    if (values.empty()) {
        throw Error(ErrorKind::EmptySeries, "series has no observations");
    }
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / n;
    double ss = 0.0;
    double comp = 0.0;
    for (double v : values) {
        const double d = v - mean;
        ss += d * d;
        comp += d;
    }
    // corrected two-pass: removes the rounding error left in `mean`
    ss -= comp * comp / n;
    return Moments{mean + comp / n, std::sqrt(std::max(ss, 0.0) / n)};
}

/// z-scores of raw values; throws DegenerateSeries when all values are equal.
inline std::vector<double> zscores(std::span<const double> values, Moments* moments_out = nullptr) {
    if (values.empty()) {
        throw Error(ErrorKind::EmptySeries, "series has no observations");
    }
    const bool constant = std::all_of(values.begin(), values.end(),
                                      [first = values.front()](double v) { return v == first; });
    const Moments m = population_moments(values);
    if (constant || !(m.sd > 0.0)) {
        throw Error(ErrorKind::DegenerateSeries, "series has zero variance");
    }
    std::vector<double> z(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        z[i] = (values[i] - m.mean) / m.sd;
    }
    if (moments_out != nullptr) {
        *moments_out = m;
    }
    return z;
}

inline StandardizedSeries standardize(std::span<const HourlyObservation> series) {
    std::vector<double> values;
    values.reserve(series.size());
    StandardizedSeries out;
    out.stamps.reserve(series.size());
    for (const auto& obs : series) {
        values.push_back(obs.value);
        out.stamps.push_back(obs.stamp);
    }
    Moments m;
    out.z = zscores(values, &m);
    out.mean = m.mean;
    out.sd = m.sd;
    return out;
}

struct Anomaly {
    HourStamp stamp;
    double z = 0.0;

    bool operator==(const Anomaly&) const = default;
};

/// Observations with |z| > k, largest |z| first (earlier stamp on ties).
inline std::vector<Anomaly> flag_anomalies(const StandardizedSeries& series, double k = 2.0) {
    if (!(k > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "anomaly threshold k must be positive");
    }
    std::vector<Anomaly> out;
    for (std::size_t i = 0; i < series.z.size(); ++i) {
        if (std::abs(series.z[i]) > k) {
            out.push_back(Anomaly{series.stamps[i], series.z[i]});
        }
    }
    std::sort(out.begin(), out.end(), [](const Anomaly& a, const Anomaly& b) {
        const double aa = std::abs(a.z);
        const double bb = std::abs(b.z);
        if (aa != bb) {
            return aa > bb;
        }
        return a.stamp < b.stamp;
    });
    return out;
}

/// R^2 of the least-squares line counts -> sizes.
inline double proxy_r2(std::span<const double> sizes, std::span<const double> counts) {
    if (sizes.size() != counts.size() || sizes.size() < 3) {
        throw Error(ErrorKind::LengthMismatch, "proxy_r2 needs two series of equal length >= 3");
    }
    const Moments ms = population_moments(sizes);
    const Moments mc = population_moments(counts);
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [f = v.front()](double x) { return x == f; });
    };
    if (constant(sizes) || constant(counts) || !(ms.sd > 0.0) || !(mc.sd > 0.0)) {
        throw Error(ErrorKind::DegenerateSeries, "proxy_r2 input is constant");
    }
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double dx = counts[i] - mc.mean;
        const double dy = sizes[i] - ms.mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    const double r2 = (sxy * sxy) / (sxx * syy);
    return std::clamp(r2, 0.0, 1.0);
}

/// Fixed-width z histogram over [lo, hi) with under/overflow bins.
struct Histogram {
    double lo = -4.0;
    double width = 0.25;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;

    [[nodiscard]] std::size_t total() const {
        std::size_t t = underflow + overflow;
        for (auto c : counts) {
            t += c;
        }
        return t;
    }
    [[nodiscard]] double bin_lo(std::size_t i) const { return lo + width * static_cast<double>(i); }
};

struct ProfileBundle {
    std::array<double, 24> by_hour{};
    std::array<std::size_t, 24> hour_counts{};
    std::array<double, 7> by_weekday{};
    std::array<std::size_t, 7> weekday_counts{};
    /// index = weekday * 24 + hour
    std::array<double, 168> week{};
    std::array<std::size_t, 168> week_counts{};
    Histogram histogram;
};

inline constexpr double kHistogramLo = -4.0;
inline constexpr double kHistogramHi = 4.0;
inline constexpr double kHistogramWidth = 0.25;

/// Mean z per hour, weekday and weekday-hour plus a z histogram. Cells
/// without rows are NaN.
inline ProfileBundle summary_profiles(const StandardizedSeries& series) {
    if (series.stamps.empty()) {
        throw Error(ErrorKind::EmptySeries, "series has no observations");
    }
    if (series.stamps.back() - series.stamps.front() + 1 < 168) {
        throw Error(ErrorKind::InsufficientSpan, "summary profiles need at least one full week");
    }
    ProfileBundle p;
    std::array<double, 24> hs{};
    std::array<double, 7> ws{};
    std::array<double, 168> gs{};
    const auto nbins = static_cast<std::size_t>(std::lround((kHistogramHi - kHistogramLo) / kHistogramWidth));
    p.histogram.lo = kHistogramLo;
    p.histogram.width = kHistogramWidth;
    p.histogram.counts.assign(nbins, 0);
    for (std::size_t i = 0; i < series.z.size(); ++i) {
        const CalendarKey key = calendar_key(series.stamps[i]);
        const int w = static_cast<int>(key.weekday);
        const double z = series.z[i];
        hs[key.hour_of_day] += z;
        ++p.hour_counts[key.hour_of_day];
        ws[w] += z;
        ++p.weekday_counts[w];
        gs[w * 24 + key.hour_of_day] += z;
        ++p.week_counts[w * 24 + key.hour_of_day];
        if (z < kHistogramLo) {
            ++p.histogram.underflow;
        } else if (z >= kHistogramHi) {
            ++p.histogram.overflow;
        } else {
            auto bin = static_cast<std::size_t>(std::floor((z - kHistogramLo) / kHistogramWidth));
            p.histogram.counts[std::min(bin, nbins - 1)] += 1;
        }
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t h = 0; h < 24; ++h) {
        p.by_hour[h] = p.hour_counts[h] ? hs[h] / static_cast<double>(p.hour_counts[h]) : nan;
    }
    for (std::size_t w = 0; w < 7; ++w) {
        p.by_weekday[w] = p.weekday_counts[w] ? ws[w] / static_cast<double>(p.weekday_counts[w]) : nan;
    }
    for (std::size_t c = 0; c < 168; ++c) {
        p.week[c] = p.week_counts[c] ? gs[c] / static_cast<double>(p.week_counts[c]) : nan;
    }
    return p;
}

} // namespace tempobeat
