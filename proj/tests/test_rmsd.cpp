#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include "tempobeat/rmsd.hpp"
#include "tempobeat/svg.hpp"

using namespace tempobeat;
using Catch::Approx;

namespace {

std::vector<CalendarKey> hourly_keys(std::size_t n) {
    std::vector<CalendarKey> keys;
    const auto t0 = HourStamp::from_civil(CivilDate::from_ymd(2018, 1, 1), 0);
    for (std::size_t i = 0; i < n; ++i) keys.push_back(calendar_key(t0 + static_cast<std::int64_t>(i)));
    return keys;
}

std::vector<double> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

/// A report whose grid cell (w, h) has RMSD grid[w][h] and the given count.
RmsdReport grid_report(const std::string& tag, const std::function<double(int, int)>& value, std::size_t count = 10) {
    RmsdReport r;
    r.model_tag = tag;
    r.by_weekday.axis = RmsdAxis::Weekday;
    r.by_hour.axis = RmsdAxis::Hour;
    r.by_weekday_hour.axis = RmsdAxis::WeekdayHour;
    for (int w = 0; w < 7; ++w) r.by_weekday.cells.push_back({w, -1, value(w, 0), count});
    for (int h = 0; h < 24; ++h) r.by_hour.cells.push_back({-1, h, value(0, h), count});
    for (int w = 0; w < 7; ++w) {
        for (int h = 0; h < 24; ++h) r.by_weekday_hour.cells.push_back({w, h, value(w, h), count});
    }
    return r;
}

double weekday_gap(std::size_t n, unsigned seed) {
    const auto obs = noise(n, seed);
    const std::vector<double> pred(n, 0.0);
    const auto s = decompose(obs, pred, hourly_keys(n), RmsdAxis::Weekday);
    double lo = 1e9, hi = 0.0;
    for (const auto& c : s.cells) {
        lo = std::min(lo, *c.rmsd);
        hi = std::max(hi, *c.rmsd);
    }
    return hi - lo;
}

} // namespace

TEST_CASE("rmsd worked examples") {
    const std::vector<double> a{1.5, -2.0, 7.0};
    CHECK(rmsd(a, a) == 0.0);
    CHECK(rmsd(std::vector<double>{1, -1}, std::vector<double>{0, 0}) == 1.0);
    CHECK(rmsd(std::vector<double>{3, 4}, std::vector<double>{0, 0}) == Approx(3.5355339059327378).epsilon(1e-15));
    CHECK_THROWS_AS(rmsd(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(rmsd(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("constant deviation gives the same RMSD in every cell") {
    const std::size_t n = 24 * 21;
    const std::vector<double> obs(n, 2.5), pred(n, 2.0);
    const auto keys = hourly_keys(n);
    for (auto axis : {RmsdAxis::Weekday, RmsdAxis::Hour, RmsdAxis::WeekdayHour}) {
        const auto s = decompose(obs, pred, keys, axis);
        for (const auto& c : s.cells) CHECK(*c.rmsd == Approx(0.5).margin(1e-15));
        CHECK(s.overall == Approx(0.5).margin(1e-15));
    }
}

TEST_CASE("Monday-only deviations stay on Monday") {
    const std::size_t n = 24 * 28;
    const auto keys = hourly_keys(n);
    std::vector<double> obs(n, 0.0);
    const std::vector<double> pred(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (keys[i].weekday == Weekday::Mon) obs[i] = 1.0;
    }
    const auto s = decompose(obs, pred, keys, RmsdAxis::Weekday);
    CHECK(*s.cells[0].rmsd == 1.0);
    for (int w = 1; w < 7; ++w) CHECK(*s.cells[static_cast<std::size_t>(w)].rmsd == 0.0);
    CHECK(s.cells[0].count == 4);
}

TEST_CASE("weekday axis averages each day before squaring") {
    const std::size_t n = 48;
    const auto keys = hourly_keys(n);
    std::vector<double> obs(n), pred(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) obs[i] = i % 2 == 0 ? 1.0 : -1.0;
    const auto s = decompose(obs, pred, keys, RmsdAxis::Weekday);
    CHECK(*s.cells[0].rmsd == 0.0);
    CHECK(s.n == 2);
    // hour axis sees the raw rows
    const auto h = decompose(obs, pred, keys, RmsdAxis::Hour);
    CHECK(*h.cells[0].rmsd == 1.0);
}

TEST_CASE("absent cells are empty, not zero") {
    const std::size_t n = 24 * 3;
    const auto obs = noise(n, 1);
    const std::vector<double> pred(n, 0.0);
    const auto s = decompose(obs, pred, hourly_keys(n), RmsdAxis::WeekdayHour);
    for (const auto& c : s.cells) {
        if (c.weekday <= 2) {
            CHECK(c.rmsd.has_value());
        } else {
            CHECK_FALSE(c.rmsd.has_value());
            CHECK(c.count == 0);
        }
    }
    CHECK(rmsd_csv(s).find("Sun,23,,0\n") != std::string::npos);
}

TEST_CASE("cell RMSDs combine to the overall RMSD") {
    const std::size_t n = 24 * 50 + 7;
    const auto obs = noise(n, 2);
    const auto pred = noise(n, 3);
    const auto keys = hourly_keys(n);
    for (auto axis : {RmsdAxis::Weekday, RmsdAxis::Hour, RmsdAxis::WeekdayHour}) {
        const auto s = decompose(obs, pred, keys, axis);
        double weighted = 0.0;
        std::size_t count = 0;
        for (const auto& c : s.cells) {
            if (c.rmsd) weighted += static_cast<double>(c.count) * *c.rmsd * *c.rmsd;
            count += c.count;
        }
        CHECK(count == s.n);
        CHECK(std::abs(weighted - static_cast<double>(s.n) * s.overall * s.overall) <= 1e-9 * weighted);
    }
    CHECK(decompose(obs, pred, keys, RmsdAxis::Hour).overall == Approx(rmsd(obs, pred)).epsilon(1e-14));
}

TEST_CASE("decomposition input errors") {
    const std::vector<double> a{1, 2}, b{1, 2};
    CHECK_THROWS_AS(decompose(a, b, hourly_keys(1), RmsdAxis::Hour), Error);
    CHECK_THROWS_AS(decompose(a, std::vector<double>{1}, hourly_keys(2), RmsdAxis::Hour), Error);
    try {
        decompose(a, b, hourly_keys(3), RmsdAxis::Hour);
        FAIL("key mismatch accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingKeys);
    }
}

TEST_CASE("extra Monday noise makes Monday the worst weekday") {
    const std::size_t n = 24 * 7 * 30;
    const auto keys = hourly_keys(n);
    auto obs = noise(n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        if (keys[i].weekday == Weekday::Mon) obs[i] *= 3.0;
    }
    const std::vector<double> pred(n, 0.0);
    const auto s = decompose(obs, pred, keys, RmsdAxis::Weekday);
    for (int w = 1; w < 7; ++w) CHECK(*s.cells[0].rmsd > *s.cells[static_cast<std::size_t>(w)].rmsd);
}

TEST_CASE("weekday spread shrinks with more data") {
    for (unsigned seed = 1; seed <= 3; ++seed) CHECK(weekday_gap(50000, seed) < weekday_gap(5000, seed));
}

TEST_CASE("recommend picks the unique minimum") {
    const auto r = grid_report("m", [](int w, int h) { return w == 3 && h == 11 ? 0.05 : 0.1 + 0.001 * (w + h); });
    const auto rec = recommend(std::vector<RmsdReport>{r});
    CHECK(rec.ranked.front().weekday == Weekday::Thu);
    CHECK(rec.ranked.front().hour == 11);
    CHECK(rec.ranked.size() == 168);
    CHECK(rec.best_weekday == Weekday::Mon);
    CHECK(rec.best_hour == 0);
}

TEST_CASE("ties go to the earlier weekday, then the earlier hour") {
    const auto r = grid_report("m", [](int w, int h) {
        return (w == 4 && h == 2) || (w == 2 && h == 9) || (w == 2 && h == 5) ? 0.01 : 0.2;
    });
    const auto rec = recommend(std::vector<RmsdReport>{r});
    CHECK(rec.ranked[0].weekday == Weekday::Wed);
    CHECK(rec.ranked[0].hour == 5);
    CHECK(rec.ranked[1].weekday == Weekday::Wed);
    CHECK(rec.ranked[1].hour == 9);
    CHECK(rec.ranked[2].weekday == Weekday::Fri);
}

TEST_CASE("ranking is invariant to a common positive scale") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 0.3);
    std::vector<double> values(168);
    for (auto& v : values) v = u(rng);
    const auto base = grid_report("a", [&](int w, int h) { return values[static_cast<std::size_t>(w * 24 + h)]; });
    const auto scaled = grid_report("a", [&](int w, int h) { return 7.5 * values[static_cast<std::size_t>(w * 24 + h)]; });
    const auto r1 = recommend(std::vector<RmsdReport>{base});
    const auto r2 = recommend(std::vector<RmsdReport>{scaled});
    for (std::size_t i = 0; i < r1.ranked.size(); ++i) {
        CHECK(r1.ranked[i].weekday == r2.ranked[i].weekday);
        CHECK(r1.ranked[i].hour == r2.ranked[i].hour);
    }
    CHECK(r1.best_weekday == r2.best_weekday);
    CHECK(r1.best_hour == r2.best_hour);
}

TEST_CASE("recommend averages models and respects the minimum count") {
    const auto a = grid_report("a", [](int w, int h) { return w == 0 && h == 0 ? 0.01 : 0.1; });
    const auto b = grid_report("b", [](int w, int h) { return w == 0 && h == 0 ? 0.5 : 0.1; });
    const auto rec = recommend(std::vector<RmsdReport>{a, b});
    CHECK(rec.models == std::vector<std::string>{"a", "b"});
    CHECK_FALSE((rec.ranked.front().weekday == Weekday::Mon && rec.ranked.front().hour == 0));
    CHECK(rec.ranked.back().rmsd == Approx(0.255));

    const auto sparse = grid_report("s", [](int, int) { return 0.1; }, 3);
    try {
        recommend(std::vector<RmsdReport>{sparse}, 4);
        FAIL("cells below min_count accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoEligibleCells);
    }
    CHECK(recommend(std::vector<RmsdReport>{sparse}, 3).ranked.size() == 168);
    CHECK_THROWS_AS(recommend(std::vector<RmsdReport>{}), Error);
}

TEST_CASE("RMSD tables round-trip through csv") {
    const std::size_t n = 24 * 10;
    const auto obs = noise(n, 5);
    const std::vector<double> pred(n, 0.1);
    const auto report = rmsd_report("empty", obs, pred, hourly_keys(n));
    for (const auto* slice : {&report.by_weekday, &report.by_hour, &report.by_weekday_hour}) {
        const auto text = rmsd_csv(*slice);
        const auto back = parse_rmsd_csv(text);
        CHECK(back.axis == slice->axis);
        CHECK(back.n == slice->n);
        CHECK(rmsd_csv(back) == text);
    }
    CHECK_THROWS_AS(parse_rmsd_csv("hour,rmsd,count\n3,0.5\n"), Error);
    CHECK_THROWS_AS(parse_rmsd_csv("nonsense\n"), Error);
}

namespace {

std::size_t occurrences(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

} // namespace

TEST_CASE("charts tag every data point") {
    const svg::Series a{"empty", {0, 1, 2, 3}, {0.2, 0.1, 0.15, 0.3}};
    const svg::Series b{"full", {0, 1, 2, 3}, {0.1, 0.2, 0.05, 0.25}};
    const auto line = svg::line_chart({a, b}, {"RMSD <by> hour", "hour", "RMSD"});
    CHECK(line.rfind("<svg", 0) == 0);
    CHECK(line.find("</svg>") != std::string::npos);
    CHECK(occurrences(line, "class=\"point\"") == 8);
    CHECK(occurrences(line, "data-x=") == 8);
    CHECK(line.find("data-y=\"0.3\"") != std::string::npos);
    CHECK(line.find("&lt;by&gt;") != std::string::npos);
    CHECK(line == svg::line_chart({a, b}, {"RMSD <by> hour", "hour", "RMSD"}));

    const auto bars = svg::bar_chart({"Mon", "Tue", "Wed", "Thu"}, {a, b}, {"by weekday", "weekday", "RMSD"});
    CHECK(occurrences(bars, "class=\"bar\"") == 8);
    CHECK(bars.find("data-x=\"Thu\"") != std::string::npos);

    std::vector<std::vector<double>> grid(2, std::vector<double>(3, 0.1));
    grid[1][2] = std::nan("");
    const auto heat = svg::heatmap({"Mon", "Tue"}, {"0", "1", "2"}, grid, {"grid", "hour", ""});
    CHECK(occurrences(heat, "class=\"cell\"") == 6);
    CHECK(occurrences(heat, "#cccccc") == 1);
}
