#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "tempobeat/ingest.hpp"

using namespace tempobeat;
using Catch::Approx;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

std::istringstream text(const std::string& s) { return std::istringstream(s); }

const HourStamp kStart = HourStamp::from_civil(CivilDate::from_ymd(2019, 6, 3), 0);

std::string observations_text(std::size_t hours, std::size_t skip = static_cast<std::size_t>(-1)) {
    std::string s = "timestamp,size_bytes,row_count\n";
    for (std::size_t i = 0; i < hours; ++i) {
        if (i == skip) continue;
        const double rows = 1000.0 + 37.0 * static_cast<double>((i * 7) % 24) + static_cast<double>(i % 5);
        s += (kStart + static_cast<std::int64_t>(i)).to_string() + "," + io::format_double(250 * rows + 1e4) + "," +
             io::format_double(rows) + "\n";
    }
    return s;
}

std::string weather_text(std::size_t hours, const std::vector<std::string>& stations) {
    std::string s = "timestamp,station,air_temp_c,precip_mm\n";
    for (const auto& st : stations) {
        for (std::size_t i = 0; i < hours; ++i) {
            const double t = 10.0 + std::sin(static_cast<double>(i) / 4.0) * 5.0 + (st == "malmo" ? 1.0 : 0.0);
            const double p = i % 11 == 0 ? 0.4 * static_cast<double>(i % 3) : 0.0;
            s += (kStart + static_cast<std::int64_t>(i)).to_string() + "," + st + "," + io::format_double(t) + "," +
                 io::format_double(p) + "\n";
        }
    }
    return s;
}

AnalysisDataset two_weeks(bool with_weather, bool with_events) {
    auto obs_in = text(observations_text(336));
    const auto obs = parse_observations(obs_in);
    std::optional<WeatherData> weather;
    IngestConfig cfg;
    if (with_weather) {
        auto w = text(weather_text(336, cfg.stations));
        weather = parse_weather(w, cfg.stations);
    }
    std::vector<EventRow> events;
    if (with_events) {
        auto e = text("start,end,category,all_day\n2019-06-06,,secular_holiday,true\n"
                      "2019-06-08T20:00,2019-06-08T23:00,sports,false\n"
                      "2019-06-10,2019-06-11,religious_holiday,true\n");
        events = parse_events(e);
    }
    return assemble_dataset(obs, weather, events, cfg);
}

} // namespace

TEST_CASE("observation parsing") {
    auto one = text("timestamp,size_bytes\n2019-05-16T11:00,123456\n");
    const auto obs = parse_observations(one);
    REQUIRE(obs.size() == 1);
    CHECK(obs[0].value == 123456.0);
    CHECK(obs[0].stamp == parse_hour_stamp("2019-05-16T11:00"));
    CHECK_FALSE(obs[0].row_count.has_value());

    auto unsorted = text("timestamp,size_bytes,row_count\n2019-05-16T12:00,2,1\n2019-05-16T11:00,1,1\n");
    const auto sorted = parse_observations(unsorted);
    CHECK(sorted[0].value == 1.0);
    CHECK(sorted[1].row_count == 1.0);

    CHECK(kind_of([] {
              auto s = text("timestamp,size_bytes\n2019-05-16T11:00,1\n2019-05-16T11:00,2\n");
              parse_observations(s);
          }) == ErrorKind::DuplicateStamp);
    CHECK(kind_of([] {
              auto s = text("timestamp,size_bytes\n2019-05-16T11:30,5\n");
              parse_observations(s);
          }) == ErrorKind::NonHourStamp);
    CHECK(kind_of([] {
              auto s = text("time,size\n2019-05-16T11:00,5\n");
              parse_observations(s);
          }) == ErrorKind::ParseError);
    CHECK(kind_of([] {
              auto s = text("timestamp,size_bytes\n2019-05-16T11:00,-5\n");
              parse_observations(s);
          }) == ErrorKind::ParseError);
    try {
        auto s = text("timestamp,size_bytes\n2019-05-16T11:00,1\n2019-05-16T12:00,abc\n");
        parse_observations(s);
        FAIL("accepted a bad number");
    } catch (const Error& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("weather parsing and gap interpolation") {
    const std::vector<std::string> stations{"malmo", "stockholm"};
    auto full = text(weather_text(48, stations));
    const auto w = parse_weather(full, stations);
    CHECK(w.series.at("malmo").size() == 48);
    CHECK(w.series.at("stockholm").size() == 48);
    CHECK(w.fills.empty());

    auto gap = text("timestamp,station,air_temp_c,precip_mm\n2019-06-03T00:00,malmo,10,0\n2019-06-03T02:00,malmo,12,1\n");
    const auto g = parse_weather(gap, {"malmo"});
    REQUIRE(g.fills.size() == 1);
    CHECK(g.fills[0].stamp == parse_hour_stamp("2019-06-03T01:00"));
    CHECK(g.series.at("malmo").air_temp_c[1] == 11.0);
    CHECK(g.series.at("malmo").precip_mm[1] == 0.5);

    CHECK(kind_of([] {
              auto s = text("timestamp,station,air_temp_c,precip_mm\n2019-06-03T00:00,malmo,10,0\n"
                            "2019-06-03T05:00,malmo,12,1\n");
              parse_weather(s, {"malmo"});
          }) == ErrorKind::GapTooLarge);
    CHECK(kind_of([] {
              auto s = text("timestamp,station,air_temp_c,precip_mm\n2019-06-03T00:00,lund,10,0\n");
              parse_weather(s, {"malmo"});
          }) == ErrorKind::UnknownStation);
    CHECK(kind_of([] {
              auto s = text("timestamp,station,air_temp_c,precip_mm\n2019-06-03T00:00,malmo,10,-1\n");
              parse_weather(s, {"malmo"});
          }) == ErrorKind::ParseError);
}

TEST_CASE("interpolated weather lies between its bracketing observations") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> temp(-20, 30), precip(0, 6);
    std::uniform_int_distribution<int> gap(0, 3);
    std::string s = "timestamp,station,air_temp_c,precip_mm\n";
    std::vector<std::pair<std::int64_t, std::array<double, 2>>> kept;
    std::int64_t h = 0;
    for (int i = 0; i < 300; ++i) {
        const std::array<double, 2> v{std::round(temp(rng) * 10) / 10, std::round(precip(rng) * 10) / 10};
        s += (kStart + h).to_string() + ",malmo," + io::format_double(v[0]) + "," + io::format_double(v[1]) + "\n";
        kept.push_back({h, v});
        h += 1 + gap(rng);
    }
    auto in = text(s);
    const auto w = parse_weather(in, {"malmo"});
    const auto& series = w.series.at("malmo");
    CHECK_FALSE(w.fills.empty());
    for (std::size_t k = 1; k < kept.size(); ++k) {
        for (auto t = kept[k - 1].first + 1; t < kept[k].first; ++t) {
            for (int c = 0; c < 2; ++c) {
                const double lo = std::min(kept[k - 1].second[c], kept[k].second[c]);
                const double hi = std::max(kept[k - 1].second[c], kept[k].second[c]);
                const double v = (c == 0 ? series.air_temp_c : series.precip_mm)[static_cast<std::size_t>(t)];
                CHECK(v >= lo - 1e-12);
                CHECK(v <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("event parsing") {
    auto in = text("start,end,category,all_day\n2019-01-01,,secular_holiday,true\n"
                   "2019-06-08T20:00,2019-06-08T23:00,sports,false\n");
    const auto ev = parse_events(in);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].all_day);
    CHECK(ev[0].start == parse_hour_stamp("2019-01-01T00:00"));
    CHECK(ev[0].end - ev[0].start == 24);
    CHECK(ev[1].category == EventCategory::Sports);
    CHECK(ev[1].end - ev[1].start == 3);

    CHECK(kind_of([] {
              auto s = text("start,end,category,all_day\n2019-01-01,,birthday,true\n");
              parse_events(s);
          }) == ErrorKind::UnknownCategory);
    CHECK(kind_of([] {
              auto s = text("start,end,category,all_day\n2019-01-01T05:00,2019-01-01T05:00,sports,false\n");
              parse_events(s);
          }) == ErrorKind::InvertedSpan);
    CHECK(kind_of([] {
              auto s = text("start,end,category,all_day\n2019-01-03,2019-01-01,sports,true\n");
              parse_events(s);
          }) == ErrorKind::InvertedSpan);
}

TEST_CASE("covariate arithmetic") {
    WeatherData w;
    w.stations = {"a"};
    w.series["a"] = StationSeries{kStart, {10, 12, 12}, {0, 0, 3}};
    const auto t = engineer_covariates(w, {}, HourGrid{kStart, 3});
    CHECK(t.names.size() == 5 + 8);
    CHECK(t.column("temp_a") == std::vector<double>{10, 12, 12});
    CHECK(t.column("temp_a_sq") == std::vector<double>{100, 144, 144});
    CHECK(t.column("d_temp_a") == std::vector<double>{0, 2, 0});
    CHECK(t.column("d_temp_a_sq") == std::vector<double>{0, 4, 0});
    CHECK(t.column("d_precip_a") == std::vector<double>{0, 0, 3});
    CHECK(t.column("d_precip_a_sq") == std::vector<double>{0, 0, 9});
    CHECK_NOTHROW(validate_covariates(t));
    CHECK(kind_of([&] { (void)t.column("humidity_a"); }) == ErrorKind::UnknownColumn);

    const auto late = engineer_covariates(w, {}, HourGrid{kStart + 1, 2});
    CHECK(late.column("d_temp_a").front() == 0.0);
    CHECK(kind_of([&] { engineer_covariates(w, {}, HourGrid{kStart, 4}); }) == ErrorKind::CoverageGap);
}

TEST_CASE("all-day holiday covers exactly its 24 grid hours") {
    auto in = text("start,end,category,all_day\n2019-06-04,,secular_holiday,true\n");
    const auto t = engineer_covariates(std::nullopt, parse_events(in), HourGrid{kStart, 72});
    const auto& col = t.column("secular_holiday");
    for (std::size_t i = 0; i < 72; ++i) CHECK(col[i] == (i >= 24 && i < 48 ? 1.0 : 0.0));
    for (auto name : {"religious_holiday", "sports", "tv_media", "weather_transport"}) {
        const auto& c = t.column(name);
        CHECK(std::accumulate(c.begin(), c.end(), 0.0) == 0.0);
    }
}

TEST_CASE("event dummies sum to the covered hours per category") {
    const auto ds = two_weeks(true, true);
    CHECK(ds.size() == 336);
    const auto& sec = ds.covariates.column("secular_holiday");
    const auto& sports = ds.covariates.column("sports");
    const auto& rel = ds.covariates.column("religious_holiday");
    CHECK(std::accumulate(sec.begin(), sec.end(), 0.0) == 24.0);
    CHECK(std::accumulate(sports.begin(), sports.end(), 0.0) == 3.0);
    CHECK(std::accumulate(rel.begin(), rel.end(), 0.0) == 48.0);
    CHECK_NOTHROW(validate_covariates(ds.covariates));
}

TEST_CASE("dataset assembly") {
    const auto ds = two_weeks(true, true);
    CHECK(ds.size() == 336);
    CHECK(ds.keys.size() == 336);
    CHECK(ds.y.size() == 336);
    CHECK(ds.covariates.names.size() == 5 + 16);
    CHECK(ds.row_counts.size() == 336);

    const auto bare = two_weeks(false, false);
    CHECK(bare.covariates.names.size() == 5);
    for (const auto& col : bare.covariates.columns) CHECK(std::accumulate(col.begin(), col.end(), 0.0) == 0.0);

    auto gap_in = text(observations_text(48, 17));
    const auto gappy = parse_observations(gap_in);
    try {
        assemble_dataset(gappy, std::nullopt, {}, IngestConfig{});
        FAIL("gap accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ObservationGap);
        CHECK(e.message().find("2019-06-03T17:00") != std::string::npos);
    }

    IngestConfig zero;
    zero.fill_gaps = GapPolicy::Zero;
    const auto z = assemble_dataset(gappy, std::nullopt, {}, zero);
    CHECK(z.values[17] == 0.0);
    CHECK(z.filled_hours == std::vector<HourStamp>{kStart + 17});

    IngestConfig interp;
    interp.fill_gaps = GapPolicy::Interpolate;
    const auto li = assemble_dataset(gappy, std::nullopt, {}, interp);
    CHECK(li.values[17] == Approx(0.5 * (li.values[16] + li.values[18])));
    CHECK(li.row_counts[17] == Approx(0.5 * (li.row_counts[16] + li.row_counts[18])));
}

TEST_CASE("config parsing") {
    auto in = text("# comment\ntimezone = UTC\nstations = lund, kiruna\nfill_gaps = zero\nanomaly_k = 2.5\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.timezone == "UTC");
    CHECK(cfg.stations == std::vector<std::string>{"lund", "kiruna"});
    CHECK(cfg.fill_gaps == GapPolicy::Zero);
    CHECK(cfg.anomaly_k == 2.5);
    CHECK(kind_of([] {
              auto s = text("colour = blue\n");
              parse_config(s);
          }) == ErrorKind::ParseError);
    CHECK(kind_of([] {
              auto s = text("fill_gaps = maybe\n");
              parse_config(s);
          }) == ErrorKind::ParseError);
}

TEST_CASE("bundle round-trip is exact") {
    const auto ds = two_weeks(true, true);
    const auto dir = std::filesystem::temp_directory_path() / "tempobeat_test_bundle";
    std::filesystem::remove_all(dir);
    write_bundle(ds, dir);
    const auto back = read_bundle(dir);
    CHECK(back.grid == ds.grid);
    CHECK(back.values == ds.values);
    CHECK(back.row_counts == ds.row_counts);
    CHECK(back.covariates == ds.covariates);
    CHECK(back.keys == ds.keys);
    CHECK(back.y.mean == ds.y.mean);
    CHECK(back.y.sd == ds.y.sd);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(std::abs(back.y.z[i] - ds.y.z[i]) <= 1e-12);
    CHECK(dataset_csv(back) == dataset_csv(ds));

    // a bundle with a missing hour names the stamp
    auto csv = io::read_file((dir / "dataset.csv").string());
    const auto line_start = csv.find("2019-06-03T05:00");
    csv.erase(line_start, csv.find('\n', line_start) - line_start + 1);
    io::write_file((dir / "dataset.csv").string(), csv);
    try {
        read_bundle(dir);
        FAIL("gap accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ObservationGap);
        CHECK(e.message().find("2019-06-03T05:00") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted squared column is rejected") {
    auto ds = two_weeks(true, false);
    auto& col = ds.covariates.columns[*ds.covariates.index_of("temp_malmo_sq")];
    col[10] += 1e-9;
    CHECK(kind_of([&] { validate_covariates(ds.covariates); }) == ErrorKind::ParseError);
}
