#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tempobeat/core.hpp"
#include "tempobeat/error.hpp"
#include "tempobeat/ingest.hpp"
#include "tempobeat/io.hpp"
#include "tempobeat/stats.hpp"
#include "tempobeat/time.hpp"

namespace tempobeat::synth {

inline constexpr std::string_view kPrngName = "splitmix64";
inline constexpr int kPrngVersion = 1;

/**
 * SplitMix64 (Steele, Lea & Flood 2014). Normals use the Marsaglia polar
 * method so that the sequence does not depend on the standard library's
 * distribution implementations.
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Independent stream `stream` derived from a user seed.
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream) {
        SplitMix64 a(seed);
        SplitMix64 b(stream ^ 0xd1b54a32d192ed03ULL);
        return SplitMix64(a.next() ^ b.next());
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection keeps the draw unbiased
        const std::uint64_t limit = (~std::uint64_t{0} - n + 1) % n;
        std::uint64_t x = next();
        while (x < limit) x = next();
        return x % n;
    }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        return u * m;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

private:
    std::uint64_t state_;
    std::optional<double> spare_;
};

/// How group intercepts are drawn.
enum class DrawMode {
    /// independent N(0, sigma2) draws
    IidNormal,
    /// permuted normal scores rescaled so the realized population variance
    /// of each factor equals sigma2 exactly
    NormalScores,
};

inline std::string_view to_string(DrawMode m) { return m == DrawMode::IidNormal ? "iid_normal" : "normal_scores"; }

struct Spike {
    HourStamp stamp;
    double size = 0.0;
};

struct SynthConfig {
    CivilDate first = CivilDate::from_ymd(2018, 1, 1);
    CivilDate last = CivilDate::from_ymd(2018, 1, 28);
    double sigma2_hour = 0.0;
    double sigma2_day = 0.0;
    double sigma2_month_year = 0.0;
    double sigma2_residual = 1.0;
    DrawMode draws = DrawMode::IidNormal;
    double intercept = 0.0;

    std::vector<EventRow> events;
    /// additive effect per event category, in latent units
    std::array<double, kEventCategoryCount> event_effects{};
    /// extra noise sd on hours covered by any event
    double event_noise_sd = 0.0;

    /// empty: no weather covariates are generated
    std::vector<std::string> stations{"malmo", "stockholm"};
    /// latent-unit coefficient per engineered weather column
    std::map<std::string, double> weather_effects;

    std::array<double, 7> weekday_noise_multipliers{1, 1, 1, 1, 1, 1, 1};
    std::array<double, 24> hour_noise_multipliers = [] {
        std::array<double, 24> a{};
        a.fill(1.0);
        return a;
    }();
    /// deterministic weekday offsets (Monday first)
    std::array<double, 7> weekday_effects{};
    /// amplitude of a one-year cosine, peaking on 1 January
    double annual_amplitude = 0.0;
    std::vector<Spike> spikes;

    /// observed sizes are bytes_per_row * rows + bytes_offset, with
    /// rows = rows_base + rows_per_unit * latent
    double bytes_per_row = 250.0;
    double bytes_offset = 1e4;
    double rows_base = 1e7;
    double rows_per_unit = 1.25e6;

    std::uint64_t seed = 1;
    std::string timezone = "Europe/Stockholm";
};

struct GroupTruth {
    std::string factor;
    std::vector<std::string> labels;
    std::vector<double> values;
};

struct GroundTruth {
    std::array<double, 4> sigma2{};
    std::array<double, 4> shares{};
    std::vector<GroupTruth> intercepts;
    std::vector<std::string> coefficient_names;
    /// latent units
    std::vector<double> coefficients;
    /// divided by the population sd of the latent series, i.e. on the scale
    /// of a model fitted to the standardized sizes
    std::vector<double> coefficients_z;
    double latent_mean = 0.0;
    double latent_sd = 1.0;
    std::uint64_t seed = 0;

    [[nodiscard]] double coefficient_z(std::string_view name) const {
        for (std::size_t i = 0; i < coefficient_names.size(); ++i) {
            if (coefficient_names[i] == name) return coefficients_z[i];
        }
        throw Error(ErrorKind::UnknownColumn, "no true coefficient '" + std::string(name) + "'");
    }
};

inline constexpr std::array<std::string_view, 4> kComponentNames{"hour", "day", "month_year", "residual"};

struct SynthResult {
    AnalysisDataset dataset;
    GroundTruth truth;
    std::vector<double> latent;
    std::vector<HourlyObservation> observations;
    std::optional<WeatherData> weather;
    std::vector<EventRow> events;
    IngestConfig ingest;
};

namespace detail {

enum Stream : std::uint64_t { kHour = 1, kDay, kMonthYear, kResidual, kEventNoise, kWeather, kProxy, kEvents };

inline std::vector<double> draw_intercepts(SplitMix64& rng, std::size_t groups, double sigma2, DrawMode mode) {
    std::vector<double> out(groups, 0.0);
    if (groups == 0 || sigma2 == 0.0) return out;
    const double sd = std::sqrt(sigma2);
    if (mode == DrawMode::IidNormal || groups == 1) {
        for (auto& v : out) v = sd * rng.normal();
        return out;
    }
    const double g = static_cast<double>(groups);
    for (std::size_t i = 0; i < groups; ++i) {
        out[i] = stats::normal_quantile((static_cast<double>(i) + 0.5) / g);
    }
    const auto m = population_moments(out);
    for (auto& v : out) v = (v - m.mean) / m.sd * sd;
    rng.shuffle(out);
    return out;
}

inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

/// Hourly temperature and precipitation: seasonal and daily cycles plus AR(1) noise.
inline WeatherData make_weather(const SynthConfig& cfg, HourGrid grid) {
    WeatherData w;
    w.stations = cfg.stations;
    auto rng = SplitMix64::stream(cfg.seed, kWeather);
    for (std::size_t k = 0; k < cfg.stations.size(); ++k) {
        StationSeries s;
        s.start = grid.start;
        s.air_temp_c.resize(grid.size);
        s.precip_mm.resize(grid.size);
        double ar_t = 1.9 * rng.normal();
        double ar_p = rng.normal();
        for (std::size_t i = 0; i < grid.size; ++i) {
            const auto stamp = grid.at(i);
            const auto date = stamp.date();
            const double doy = static_cast<double>(date.days - CivilDate::from_ymd(date.year(), 1, 1).days);
            const double hour = stamp.hour_of_day();
            ar_t = 0.95 * ar_t + 0.6 * rng.normal();
            ar_p = 0.9 * ar_p + std::sqrt(1.0 - 0.81) * rng.normal();
            const double temp = 7.0 - 1.5 * static_cast<double>(k) - 9.0 * std::cos(2.0 * std::numbers::pi * (doy - 20.0) / 365.25) +
                                3.0 * std::cos(2.0 * std::numbers::pi * (hour - 15.0) / 24.0) + ar_t;
            s.air_temp_c[i] = round1(std::clamp(temp, -60.0, 60.0));
            s.precip_mm[i] = ar_p > 1.3 ? round1((ar_p - 1.3) * 2.5) : 0.0;
        }
        w.series.emplace(cfg.stations[k], std::move(s));
    }
    return w;
}

inline void validate(const SynthConfig& c) {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (c.last < c.first) fail("span ends before it starts");
    for (double s : {c.sigma2_hour, c.sigma2_day, c.sigma2_month_year, c.sigma2_residual}) {
        if (!(s >= 0.0) || !std::isfinite(s)) fail("variances must be finite and non-negative");
    }
    if (c.sigma2_hour + c.sigma2_day + c.sigma2_month_year + c.sigma2_residual <= 0.0) {
        fail("at least one variance must be positive");
    }
    for (double m : c.weekday_noise_multipliers) {
        if (!(m > 0.0) || !std::isfinite(m)) fail("weekday noise multipliers must be positive");
    }
    for (double m : c.hour_noise_multipliers) {
        if (!(m > 0.0) || !std::isfinite(m)) fail("hour noise multipliers must be positive");
    }
    if (!(c.event_noise_sd >= 0.0)) fail("event_noise_sd must be non-negative");
    if (!(c.bytes_per_row > 0.0) || !(c.rows_per_unit > 0.0)) fail("proxy scale factors must be positive");
    const auto names = weather_column_names(c.stations);
    for (const auto& [name, beta] : c.weather_effects) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            fail("weather effect for unknown column '" + name + "'");
        }
    }
}

} // namespace detail

/// Generates one hourly dataset and the truth it was generated from.
inline SynthResult generate(const SynthConfig& cfg) {
    detail::validate(cfg);
    SynthResult out;
    out.events = cfg.events;
    const HourGrid grid{HourStamp::from_civil(cfg.first, 0),
                        static_cast<std::size_t>((cfg.last.days - cfg.first.days + 1) * 24)};
    if (!cfg.stations.empty()) {
        out.weather = detail::make_weather(cfg, grid);
    }
    const CovariateTable cov = engineer_covariates(out.weather, out.events, grid);

    std::vector<CalendarKey> keys(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) keys[i] = calendar_key(grid.at(i));

    // groups in chronological order
    std::vector<CivilDate> dates;
    std::vector<MonthYear> months;
    for (const auto& k : keys) {
        if (dates.empty() || !(dates.back() == k.date)) dates.push_back(k.date);
        if (months.empty() || !(months.back() == k.month_year)) months.push_back(k.month_year);
    }
    auto rng_hour = SplitMix64::stream(cfg.seed, detail::kHour);
    auto rng_day = SplitMix64::stream(cfg.seed, detail::kDay);
    auto rng_my = SplitMix64::stream(cfg.seed, detail::kMonthYear);
    const auto hour_fx = detail::draw_intercepts(rng_hour, 24, cfg.sigma2_hour, cfg.draws);
    const auto day_fx = detail::draw_intercepts(rng_day, dates.size(), cfg.sigma2_day, cfg.draws);
    const auto my_fx = detail::draw_intercepts(rng_my, months.size(), cfg.sigma2_month_year, cfg.draws);

    GroundTruth& t = out.truth;
    t.seed = cfg.seed;
    t.sigma2 = {cfg.sigma2_hour, cfg.sigma2_day, cfg.sigma2_month_year, cfg.sigma2_residual};
    const double total = t.sigma2[0] + t.sigma2[1] + t.sigma2[2] + t.sigma2[3];
    for (std::size_t i = 0; i < 4; ++i) t.shares[i] = t.sigma2[i] / total;
    {
        GroupTruth h{"hour", {}, hour_fx};
        char buf[4];
        for (int i = 0; i < 24; ++i) {
            std::snprintf(buf, sizeof buf, "%02d", i);
            h.labels.emplace_back(buf);
        }
        GroupTruth d{"day", {}, day_fx};
        for (const auto& date : dates) d.labels.push_back(date.to_string());
        GroupTruth m{"month_year", {}, my_fx};
        for (const auto& my : months) m.labels.push_back(my.to_string());
        t.intercepts = {std::move(h), std::move(d), std::move(m)};
    }

    t.coefficient_names.push_back("constant");
    t.coefficients.push_back(cfg.intercept);
    for (std::size_t c = 0; c < cov.names.size(); ++c) {
        t.coefficient_names.push_back(cov.names[c]);
        if (c < kEventCategoryCount) {
            t.coefficients.push_back(cfg.event_effects[c]);
        } else {
            const auto it = cfg.weather_effects.find(cov.names[c]);
            t.coefficients.push_back(it == cfg.weather_effects.end() ? 0.0 : it->second);
        }
    }

    auto rng_resid = SplitMix64::stream(cfg.seed, detail::kResidual);
    auto rng_event = SplitMix64::stream(cfg.seed, detail::kEventNoise);
    const double sd_e = std::sqrt(cfg.sigma2_residual);
    std::map<std::int64_t, double> spikes;
    for (const auto& s : cfg.spikes) spikes[s.stamp.hours] += s.size;

    out.latent.assign(grid.size, 0.0);
    std::size_t day_idx = 0;
    std::size_t my_idx = 0;
    for (std::size_t i = 0; i < grid.size; ++i) {
        const auto& k = keys[i];
        if (!(dates[day_idx] == k.date)) ++day_idx;
        if (!(months[my_idx] == k.month_year)) ++my_idx;
        double y = cfg.intercept;
        bool event_hour = false;
        for (std::size_t c = 0; c < cov.names.size(); ++c) {
            const double x = cov.columns[c][i];
            y += t.coefficients[c + 1] * x;
            if (c < kEventCategoryCount && x != 0.0) event_hour = true;
        }
        y += hour_fx[static_cast<std::size_t>(k.hour_of_day)] + day_fx[day_idx] + my_fx[my_idx];
        y += cfg.weekday_effects[static_cast<std::size_t>(k.weekday)];
        if (cfg.annual_amplitude != 0.0) {
            const auto year_start = CivilDate::from_ymd(k.date.year(), 1, 1);
            const double doy = static_cast<double>(k.date.days - year_start.days);
            y += cfg.annual_amplitude * std::cos(2.0 * std::numbers::pi * doy / 365.25);
        }
        // always consume the draws so that multipliers do not shift the stream
        const double e = rng_resid.normal();
        const double ev = rng_event.normal();
        y += sd_e * e * cfg.weekday_noise_multipliers[static_cast<std::size_t>(k.weekday)] *
             cfg.hour_noise_multipliers[static_cast<std::size_t>(k.hour_of_day)];
        if (event_hour) y += cfg.event_noise_sd * ev;
        if (const auto it = spikes.find(grid.at(i).hours); it != spikes.end()) y += it->second;
        out.latent[i] = y;
    }
    const auto lm = population_moments(out.latent);
    t.latent_mean = lm.mean;
    t.latent_sd = lm.sd;
    for (double b : t.coefficients) t.coefficients_z.push_back(lm.sd > 0.0 ? b / lm.sd : 0.0);

    out.observations.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double rows = std::max(0.0, std::round(cfg.rows_base + cfg.rows_per_unit * out.latent[i]));
        out.observations[i].stamp = grid.at(i);
        out.observations[i].row_count = rows;
        out.observations[i].value = std::round(cfg.bytes_per_row * rows + cfg.bytes_offset);
    }
    out.ingest.timezone = cfg.timezone;
    out.ingest.stations = cfg.stations;
    out.dataset = assemble_dataset(out.observations, out.weather, out.events, out.ingest);
    return out;
}

/// The dataset and its ground truth.
inline std::pair<AnalysisDataset, GroundTruth> generate_series(const SynthConfig& cfg) {
    auto r = generate(cfg);
    return {std::move(r.dataset), std::move(r.truth)};
}

struct ProxyPair {
    std::vector<double> sizes;
    std::vector<double> counts;
};

/// Row counts of a generated series and file sizes derived from them with
/// multiplicative noise of relative sd `noise_rel`.
inline ProxyPair generate_proxy_pair(const SynthConfig& cfg, double noise_rel) {
    if (!(noise_rel >= 0.0) || !std::isfinite(noise_rel)) {
        throw Error(ErrorKind::InvalidConfig, "noise_rel must be finite and non-negative");
    }
    const auto r = generate(cfg);
    auto rng = SplitMix64::stream(cfg.seed, detail::kProxy);
    ProxyPair p;
    p.counts = r.dataset.row_counts;
    p.sizes.resize(p.counts.size());
    for (std::size_t i = 0; i < p.counts.size(); ++i) {
        const double exact = cfg.bytes_per_row * p.counts[i] + cfg.bytes_offset;
        p.sizes[i] = std::max(0.0, exact * (1.0 + noise_rel * rng.normal()));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Event calendars
// ---------------------------------------------------------------------------

/// Easter Sunday (anonymous Gregorian algorithm).
inline CivilDate easter_sunday(int year) {
    const int a = year % 19;
    const int b = year / 100;
    const int c = year % 100;
    const int d = b / 4;
    const int e = b % 4;
    const int f = (b + 8) / 25;
    const int g = (b - f + 1) / 3;
    const int h = (19 * a + b - d - g + 15) % 30;
    const int i = c / 4;
    const int k = c % 4;
    const int l = (32 + 2 * e + 2 * i - h - k) % 7;
    const int m = (a + 11 * h + 22 * l) / 451;
    const int month = (h + l - 7 * m + 114) / 31;
    const int day = (h + l - 7 * m + 114) % 31 + 1;
    return CivilDate::from_ymd(year, month, day);
}

namespace detail {

/// First date on or after `from` falling on weekday `w`.
inline CivilDate next_weekday(CivilDate from, Weekday w) {
    while (from.weekday() != w) from.days += 1;
    return from;
}

inline EventRow all_day(CivilDate d, EventCategory c) {
    return EventRow{HourStamp::from_civil(d, 0), HourStamp::from_civil(CivilDate{d.days + 1}, 0), c, true};
}

} // namespace detail

/// Swedish public holidays in [first, last], split into religious and secular.
inline std::vector<EventRow> swedish_holidays(CivilDate first, CivilDate last) {
    std::vector<EventRow> out;
    using C = EventCategory;
    for (int y = first.year(); y <= last.year(); ++y) {
        const auto easter = easter_sunday(y);
        const std::vector<std::pair<CivilDate, C>> days{
            {CivilDate::from_ymd(y, 1, 1), C::SecularHoliday},
            {CivilDate::from_ymd(y, 1, 6), C::ReligiousHoliday},
            {CivilDate{easter.days - 2}, C::ReligiousHoliday},
            {easter, C::ReligiousHoliday},
            {CivilDate{easter.days + 1}, C::ReligiousHoliday},
            {CivilDate::from_ymd(y, 5, 1), C::SecularHoliday},
            {CivilDate{easter.days + 39}, C::ReligiousHoliday},
            {CivilDate{easter.days + 49}, C::ReligiousHoliday},
            {CivilDate::from_ymd(y, 6, 6), C::SecularHoliday},
            {detail::next_weekday(CivilDate::from_ymd(y, 6, 19), Weekday::Fri), C::SecularHoliday},
            {detail::next_weekday(CivilDate::from_ymd(y, 10, 31), Weekday::Sat), C::ReligiousHoliday},
            {CivilDate::from_ymd(y, 12, 24), C::SecularHoliday},
            {CivilDate::from_ymd(y, 12, 25), C::ReligiousHoliday},
            {CivilDate::from_ymd(y, 12, 26), C::ReligiousHoliday},
            {CivilDate::from_ymd(y, 12, 31), C::SecularHoliday},
        };
        for (const auto& [d, c] : days) {
            if (!(d < first) && !(last < d)) out.push_back(detail::all_day(d, c));
        }
    }
    std::sort(out.begin(), out.end(), [](const EventRow& a, const EventRow& b) { return a.start < b.start; });
    return out;
}

/// Holidays plus seeded short spans for sports, TV and transport disruptions.
inline std::vector<EventRow> standard_event_calendar(CivilDate first, CivilDate last, std::uint64_t seed) {
    auto out = swedish_holidays(first, last);
    auto rng = SplitMix64::stream(seed, detail::kEvents);
    auto span = [](CivilDate d, int from, int hours, EventCategory c) {
        const auto s = HourStamp::from_civil(d, from);
        return EventRow{s, s + hours, c, false};
    };
    for (auto d = first; !(last < d); d.days += 1) {
        const auto w = d.weekday();
        const double u_sport = rng.uniform();
        const double u_tv = rng.uniform();
        const double u_transport = rng.uniform();
        const auto start_hour = static_cast<int>(6 + rng.below(12));
        const auto length = static_cast<int>(4 + rng.below(9));
        if ((w == Weekday::Sat || w == Weekday::Sun) ? u_sport < 0.5 : (w == Weekday::Wed && u_sport < 0.3)) {
            out.push_back(span(d, w == Weekday::Wed ? 19 : 15, 2, EventCategory::Sports));
        }
        if ((w == Weekday::Fri || w == Weekday::Sat) && u_tv < 0.4) {
            out.push_back(span(d, 20, 2, EventCategory::TvMedia));
        }
        if (u_transport < 0.02) {
            out.push_back(span(d, start_hour, length, EventCategory::WeatherTransport));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const EventRow& a, const EventRow& b) { return a.start < b.start; });
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string observations_csv(const std::vector<HourlyObservation>& obs) {
    std::string out = "timestamp,size_bytes,row_count\n";
    for (const auto& o : obs) {
        out += o.stamp.to_string() + "," + std::to_string(static_cast<std::int64_t>(o.value)) + "," +
               std::to_string(static_cast<std::int64_t>(o.row_count.value_or(0.0))) + "\n";
    }
    return out;
}

inline std::string weather_csv(const WeatherData& w) {
    std::string out = "timestamp,station,air_temp_c,precip_mm\n";
    const auto& first = w.series.at(w.stations.front());
    for (std::size_t i = 0; i < first.size(); ++i) {
        for (const auto& st : w.stations) {
            const auto& s = w.series.at(st);
            out += (s.start + static_cast<std::int64_t>(i)).to_string() + "," + st + "," +
                   io::format_double(s.air_temp_c[i]) + "," + io::format_double(s.precip_mm[i]) + "\n";
        }
    }
    return out;
}

inline std::string events_csv(const std::vector<EventRow>& events) {
    std::string out = "start,end,category,all_day\n";
    for (const auto& e : events) {
        if (e.all_day) {
            out += e.start.date().to_string() + "," + CivilDate{e.end.date().days - 1}.to_string() + "," +
                   std::string(to_string(e.category)) + ",true\n";
        } else {
            out += e.start.to_string() + "," + e.end.to_string() + "," + std::string(to_string(e.category)) +
                   ",false\n";
        }
    }
    return out;
}

inline nlohmann::json truth_json(const GroundTruth& t, const SynthConfig& cfg) {
    nlohmann::json comps = nlohmann::json::array();
    for (std::size_t i = 0; i < 4; ++i) {
        comps.push_back({{"name", kComponentNames[i]}, {"sigma2", t.sigma2[i]}, {"share", t.shares[i]}});
    }
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& g : t.intercepts) {
        nlohmann::json m = nlohmann::json::object();
        for (std::size_t i = 0; i < g.labels.size(); ++i) m[g.labels[i]] = g.values[i];
        groups[g.factor] = m;
    }
    nlohmann::json coefs = nlohmann::json::array();
    for (std::size_t i = 0; i < t.coefficient_names.size(); ++i) {
        coefs.push_back({{"name", t.coefficient_names[i]}, {"latent", t.coefficients[i]}, {"z", t.coefficients_z[i]}});
    }
    return nlohmann::json{
        {"generator", {{"prng", kPrngName}, {"prng_version", kPrngVersion}, {"seed", t.seed}}},
        {"span", {cfg.first.to_string(), cfg.last.to_string()}},
        {"draws", to_string(cfg.draws)},
        {"components", comps},
        {"intercepts", groups},
        {"coefficients", coefs},
        {"latent_mean", t.latent_mean},
        {"latent_sd", t.latent_sd},
        {"weekday_noise_multipliers", cfg.weekday_noise_multipliers},
        {"hour_noise_multipliers", cfg.hour_noise_multipliers},
        {"weekday_effects", cfg.weekday_effects},
        {"annual_amplitude", cfg.annual_amplitude},
        {"event_noise_sd", cfg.event_noise_sd},
    };
}

/// Writes observations.csv, weather.csv (when generated), events.csv and truth.json.
inline std::vector<std::filesystem::path> write_synth(const SynthResult& r, const SynthConfig& cfg,
                                                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files{dir / "observations.csv"};
    io::write_file(files.back().string(), observations_csv(r.observations));
    if (r.weather) {
        files.push_back(dir / "weather.csv");
        io::write_file(files.back().string(), weather_csv(*r.weather));
    }
    files.push_back(dir / "events.csv");
    io::write_file(files.back().string(), events_csv(r.events));
    files.push_back(dir / "truth.json");
    io::write_file(files.back().string(), truth_json(r.truth, cfg).dump(2) + "\n");
    return files;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Seventeen months of hourly data with the variance shares of the
/// reference empty model (hour 0.8357, day 0.0433, month-year 0.0782,
/// residual 0.0390).
inline SynthConfig table1_config(std::uint64_t seed) {
    SynthConfig c;
    c.first = CivilDate::from_ymd(2018, 1, 1);
    c.last = CivilDate::from_ymd(2019, 5, 31);
    c.sigma2_hour = 0.8357;
    c.sigma2_day = 0.0433;
    c.sigma2_month_year = 0.0782;
    c.sigma2_residual = 0.0390;
    c.draws = DrawMode::NormalScores;
    c.stations.clear();
    c.seed = seed;
    return c;
}

/// Table-1 variances with the standard event calendar, holiday effects and
/// weather, for exercising the full and restricted models.
inline SynthConfig event_laden_config(std::uint64_t seed, CivilDate first, CivilDate last) {
    SynthConfig c = table1_config(seed);
    c.first = first;
    c.last = last;
    c.stations = {"malmo", "stockholm"};
    c.events = standard_event_calendar(first, last, seed);
    c.event_effects[static_cast<int>(EventCategory::SecularHoliday)] = -0.1220;
    c.event_effects[static_cast<int>(EventCategory::ReligiousHoliday)] = -0.1616;
    c.event_effects[static_cast<int>(EventCategory::Sports)] = 0.25;
    c.event_effects[static_cast<int>(EventCategory::TvMedia)] = 0.15;
    c.event_effects[static_cast<int>(EventCategory::WeatherTransport)] = -0.2;
    c.event_noise_sd = 0.15;
    c.weather_effects = {{"temp_malmo", -0.004}, {"precip_stockholm", 0.02}};
    return c;
}

/// Event-laden data in which Thursday and 11:00 carry the least noise and
/// Monday the most, so the quietest slot is Thursday 11:00.
inline SynthConfig reference_config(std::uint64_t seed) {
    SynthConfig c = event_laden_config(seed, CivilDate::from_ymd(2018, 1, 1), CivilDate::from_ymd(2019, 5, 31));
    c.weekday_noise_multipliers = {1.4, 1.0, 1.0, 0.6, 1.0, 0.9, 1.1};
    c.hour_noise_multipliers[11] = 0.6;
    return c;
}

/// Two years with a weekday pattern, a yearly cycle and little day-level
/// noise: weekly and annual periodicity for correlograms.
inline SynthConfig weekly_config(std::uint64_t seed) {
    SynthConfig c;
    c.first = CivilDate::from_ymd(2018, 1, 1);
    c.last = CivilDate::from_ymd(2019, 12, 31);
    c.sigma2_hour = 0.5;
    c.sigma2_day = 0.0096;
    c.sigma2_month_year = 0.0;
    c.sigma2_residual = 0.0096;
    c.stations.clear();
    // mean zero, population sd 0.5
    const std::array<double, 7> pattern{0.3, 0.35, 0.4, 0.45, 0.2, -0.7, -1.0};
    const auto m = population_moments(pattern);
    for (std::size_t i = 0; i < 7; ++i) c.weekday_effects[i] = (pattern[i] - m.mean) / m.sd * 0.5;
    c.annual_amplitude = 1.0;
    c.seed = seed;
    return c;
}

} // namespace tempobeat::synth
