#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "tempobeat/mlm.hpp"
#include "tempobeat/serialize.hpp"
#include "tempobeat/synth.hpp"

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

synth::SynthConfig short_config(CivilDate first, CivilDate last, std::uint64_t seed) {
    auto c = synth::table1_config(seed);
    c.first = first;
    c.last = last;
    return c;
}

/// hour x day x month layout with the given component variances.
mlm::Design crossed(std::mt19937_64& rng, int days, double s2h, double s2d, double s2m, double s2e) {
    std::normal_distribution<double> g;
    std::vector<double> uh(24), ud(static_cast<std::size_t>(days)), um(static_cast<std::size_t>(days / 28 + 1));
    for (auto& v : uh) v = std::sqrt(s2h) * g(rng);
    for (auto& v : ud) v = std::sqrt(s2d) * g(rng);
    for (auto& v : um) v = std::sqrt(s2m) * g(rng);
    std::vector<std::string> h, d, m;
    Eigen::VectorXd y(24 * days);
    Eigen::Index i = 0;
    for (int dd = 0; dd < days; ++dd) {
        for (int hh = 0; hh < 24; ++hh) {
            h.push_back(std::to_string(hh));
            d.push_back("d" + std::to_string(dd));
            m.push_back("m" + std::to_string(dd / 28));
            y(i++) = 0.2 + uh[static_cast<std::size_t>(hh)] + ud[static_cast<std::size_t>(dd)] +
                     um[static_cast<std::size_t>(dd / 28)] + std::sqrt(s2e) * g(rng);
        }
    }
    return mlm::make_design(Eigen::MatrixXd::Ones(y.size(), 1), y,
                            {mlm::make_factor("hour", h), mlm::make_factor("day", d), mlm::make_factor("month_year", m)});
}

} // namespace

TEST_CASE("design construction") {
    const auto r = synth::generate(short_config(CivilDate::from_ymd(2019, 6, 3), CivilDate::from_ymd(2019, 6, 16), 1));
    const auto d = mlm::build_design(r.dataset, mlm::ModelSpec::empty());
    CHECK(d.n() == 336);
    CHECK(d.p() == 1);
    CHECK(d.fixed_names == std::vector<std::string>{"constant"});
    REQUIRE(d.factors.size() == 3);
    CHECK(d.factors[0].levels() == 24);
    CHECK(d.factors[1].levels() == 14);
    CHECK(d.factors[2].levels() == 1);

    mlm::ModelSpec bad{"x", {"humidity"}, mlm::Restriction::None};
    CHECK(kind_of([&] { mlm::build_design(r.dataset, bad); }) == ErrorKind::UnknownColumn);

    auto cfg = short_config(CivilDate::from_ymd(2019, 6, 3), CivilDate::from_ymd(2019, 6, 9), 1);
    cfg.events = {EventRow{HourStamp::from_civil(cfg.first, 0), HourStamp::from_civil(CivilDate{cfg.last.days + 1}, 0),
                           EventCategory::WeatherTransport, true}};
    const auto all_events = synth::generate(cfg);
    CHECK(kind_of([&] { mlm::build_design(all_events.dataset, mlm::ModelSpec::restricted()); }) ==
          ErrorKind::EmptyAfterRestriction);
}

TEST_CASE("full specification has the constant, five events and sixteen weather terms") {
    const auto r = synth::generate(
        synth::event_laden_config(3, CivilDate::from_ymd(2018, 1, 1), CivilDate::from_ymd(2018, 6, 30)));
    const auto spec = mlm::ModelSpec::full(r.dataset.covariates);
    const auto d = mlm::build_design(r.dataset, spec);
    CHECK(d.p() == 22);
    std::vector<std::string> expected{"constant"};
    for (auto c : kEventCategoryNames) expected.emplace_back(c);
    for (const auto& w : weather_column_names({"malmo", "stockholm"})) expected.push_back(w);
    CHECK(d.fixed_names == expected);
}

TEST_CASE("restriction drops every hour of each event day") {
    const auto r = synth::generate(
        synth::event_laden_config(4, CivilDate::from_ymd(2018, 3, 1), CivilDate::from_ymd(2018, 4, 30)));
    const auto d = mlm::build_design(r.dataset, mlm::ModelSpec::restricted());
    std::map<std::int64_t, int> per_day;
    for (auto row : d.rows) ++per_day[r.dataset.keys[row].date.days];
    for (const auto& [day, count] : per_day) CHECK(count == 24);
    for (auto row : d.rows) {
        for (std::size_t c = 0; c < kEventCategoryCount; ++c) CHECK(r.dataset.covariates.columns[c][row] == 0.0);
    }
    CHECK(d.n() < r.dataset.size());
}

TEST_CASE("residual-only data puts group components at the floor") {
    std::mt19937_64 rng(5);
    const auto d = crossed(rng, 210, 0.0, 0.0, 0.0, 2.0);
    REQUIRE(d.n() >= 5000);
    const auto fit = mlm::fit_ml(d);
    CHECK(fit.converged);
    CHECK(fit.components.residual().estimate == Approx(2.0).epsilon(0.05));
    int floored = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fit.components.items[i].estimate < 0.01);
        floored += fit.components.items[i].at_boundary ? 1 : 0;
    }
    CHECK(floored >= 1);
}

TEST_CASE("balanced one-way layout matches closed-form ML") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (const auto& [a, n, s2a] : std::vector<std::tuple<int, int, double>>{{6, 4, 1.5}, {10, 3, 0.4}, {15, 8, 0.2}}) {
        std::vector<std::string> labels;
        Eigen::VectorXd y(a * n);
        for (int i = 0; i < a; ++i) {
            const double u = std::sqrt(s2a) * g(rng);
            for (int k = 0; k < n; ++k) {
                labels.push_back("g" + std::to_string(i));
                y(i * n + k) = -1.0 + u + 0.7 * g(rng);
            }
        }
        const double grand = y.mean();
        double ssa = 0.0, sse = 0.0;
        for (int i = 0; i < a; ++i) {
            const double m = y.segment(i * n, n).mean();
            ssa += n * (m - grand) * (m - grand);
            sse += (y.segment(i * n, n).array() - m).square().sum();
        }
        const double s2e = sse / (a * (n - 1.0));
        const double expected_a = (ssa / a - s2e) / n;
        REQUIRE(expected_a > 0.0);
        const auto fit = mlm::fit_ml(mlm::make_design(Eigen::MatrixXd::Ones(a * n, 1), y, {mlm::make_factor("g", labels)}));
        CHECK(std::abs(fit.components.items[0].estimate - expected_a) < 1e-6);
        CHECK(std::abs(fit.components.items[1].estimate - s2e) < 1e-6);
        CHECK(fit.coefficient("constant").coef == Approx(grand).epsilon(1e-8));
    }
}

TEST_CASE("reported optimum has a vanishing deviance gradient") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 3; ++rep) {
        const auto d = crossed(rng, 60, 0.8, 0.05, 0.1, 0.04);
        const auto fit = mlm::fit_ml(d);
        CHECK(fit.converged);
        const auto g = mlm::deviance_gradient_fd(d, fit.log_variances(), 1e-5);
        CHECK(g.cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("row order does not change the fit") {
    std::mt19937_64 rng(21);
    const auto d = crossed(rng, 45, 0.6, 0.1, 0.05, 0.2);
    const auto fit = mlm::fit_ml(d);

    std::vector<std::size_t> perm(d.n());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::VectorXd y(d.y.size());
    std::array<std::vector<std::string>, 3> labels;
    for (std::size_t r = 0; r < perm.size(); ++r) {
        y(static_cast<Eigen::Index>(r)) = d.y(static_cast<Eigen::Index>(perm[r]));
        for (std::size_t f = 0; f < 3; ++f) {
            labels[f].push_back(d.factors[f].labels[static_cast<std::size_t>(d.factors[f].ids[perm[r]])]);
        }
    }
    const auto shuffled = mlm::make_design(Eigen::MatrixXd::Ones(y.size(), 1), y,
                                           {mlm::make_factor("hour", labels[0]), mlm::make_factor("day", labels[1]),
                                            mlm::make_factor("month_year", labels[2])});
    const auto fit2 = mlm::fit_ml(shuffled);
    CHECK(std::abs(fit.loglik - fit2.loglik) <= 1e-9 * std::abs(fit.loglik));
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::abs(fit.components.items[c].estimate - fit2.components.items[c].estimate) <= 1e-9);
    }
    CHECK(std::abs(fit.beta[0].coef - fit2.beta[0].coef) <= 1e-9);
}

TEST_CASE("variance shares add to one") {
    std::mt19937_64 rng(30);
    const auto fit = mlm::fit_ml(crossed(rng, 56, 0.8, 0.05, 0.08, 0.04));
    double sum = 0.0;
    for (const auto& c : fit.components.items) sum += c.share;
    CHECK(std::abs(100.0 * sum - 100.0) <= 0.1);
    CHECK(fit.components.items.size() == 4);
    CHECK(fit.components.items[0].name == "hour");
    CHECK(fit.components.residual().name == "residual");
}

TEST_CASE("likelihood-ratio test against the linear model") {
    std::mt19937_64 rng(40);
    std::vector<double> null_lr;
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = crossed(rng, 14, 0.0, 0.0, 0.0, 1.0);
        const auto fit = mlm::fit_ml(d);
        null_lr.push_back(mlm::lr_test_vs_linear(fit, d));
        CHECK(fit.lr_chi2_vs_linear == Approx(null_lr.back()).margin(1e-9));
    }
    std::nth_element(null_lr.begin(), null_lr.begin() + 10, null_lr.end());
    CHECK(null_lr[10] < 3.0);

    const auto r = synth::generate(synth::table1_config(2));
    const auto d = mlm::build_design(r.dataset, mlm::ModelSpec::empty());
    CHECK(mlm::lr_test_vs_linear(mlm::fit_ml(d), d) > 1000.0);
}

TEST_CASE("floored components reduce to ordinary least squares") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g;
    std::vector<std::string> h, dd;
    Eigen::MatrixXd X(240, 2);
    Eigen::VectorXd e(240);
    Eigen::MatrixXd span = Eigen::MatrixXd::Zero(240, 2 + 24 + 10);
    for (int i = 0; i < 240; ++i) {
        h.push_back(std::to_string(i % 24));
        dd.push_back(std::to_string(i / 24));
        X(i, 0) = 1.0;
        X(i, 1) = g(rng);
        e(i) = g(rng);
        span(i, 0) = 1.0;
        span(i, 1) = X(i, 1);
        span(i, 2 + i % 24) = 1.0;
        span(i, 2 + 24 + i / 24) = 1.0;
    }
    // residuals orthogonal to every group indicator: no group variance to find
    const Eigen::VectorXd e_perp = e - span * span.colPivHouseholderQr().solve(e);
    const Eigen::VectorXd y = X * Eigen::Vector2d(1.0, 0.5) + e_perp;
    const auto d = mlm::make_design(X, y, {mlm::make_factor("hour", h), mlm::make_factor("day", dd)});
    const auto fit = mlm::fit_ml(d);
    CHECK(fit.components.items[0].at_boundary);
    CHECK(fit.components.items[1].at_boundary);
    const Eigen::VectorXd ols = X * X.colPivHouseholderQr().solve(y);
    CHECK((mlm::predict_conditional(fit, d) - ols).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(mlm::lr_test_vs_linear(fit, d) == Approx(0.0).margin(1e-4));
    CHECK(fit.coefficient("x1").coef == Approx(0.5).margin(0.2));
}

TEST_CASE("conditional prediction is the fixed part plus the three group modes") {
    const auto r = synth::generate(short_config(CivilDate::from_ymd(2018, 1, 1), CivilDate::from_ymd(2018, 3, 31), 6));
    const auto d = mlm::build_design(r.dataset, mlm::ModelSpec::empty());
    const auto fit = mlm::fit_ml(d);
    const auto yhat = mlm::predict_conditional(fit, d);
    std::map<std::tuple<int, std::int64_t, std::int64_t>, double> seen;
    for (std::size_t i = 0; i < d.n(); ++i) {
        double expected = fit.beta[0].coef;
        for (std::size_t f = 0; f < 3; ++f) expected += fit.blups[f].blup[static_cast<std::size_t>(d.factors[f].ids[i])];
        CHECK(yhat(static_cast<Eigen::Index>(i)) == Approx(expected).margin(1e-12));
    }
    // a design with a day the fit never saw
    auto other = synth::generate(short_config(CivilDate::from_ymd(2018, 4, 1), CivilDate::from_ymd(2018, 4, 7), 6));
    const auto unseen = mlm::build_design(other.dataset, mlm::ModelSpec::empty());
    CHECK(kind_of([&] { mlm::predict_conditional(fit, unseen); }) == ErrorKind::GroupUnseen);
}

TEST_CASE("restricting to event-free days lowers the residual component") {
    const auto r = synth::generate(
        synth::event_laden_config(7, CivilDate::from_ymd(2018, 1, 1), CivilDate::from_ymd(2018, 12, 31)));
    const auto empty = mlm::fit_ml(mlm::build_design(r.dataset, mlm::ModelSpec::empty()));
    const auto restricted = mlm::fit_ml(mlm::build_design(r.dataset, mlm::ModelSpec::restricted()));
    CHECK(restricted.components.residual().estimate <= empty.components.residual().estimate);
}

TEST_CASE("rank-deficient fixed effects are rejected") {
    std::mt19937_64 rng(2);
    auto d = crossed(rng, 7, 0.5, 0.1, 0.0, 0.1);
    Eigen::MatrixXd X(d.X.rows(), 2);
    X.col(0) = d.X.col(0);
    X.col(1) = 3.0 * d.X.col(0);
    const auto bad = mlm::make_design(X, d.y, d.factors);
    CHECK(kind_of([&] { mlm::fit_ml(bad); }) == ErrorKind::RankDeficientFixed);
}

TEST_CASE("fit serialization round-trips") {
    std::mt19937_64 rng(3);
    const auto fit = mlm::fit_ml(crossed(rng, 30, 0.5, 0.1, 0.0, 0.1));
    const auto spec = mlm::ModelSpec::empty();
    const auto j = fit_to_json(fit, spec);
    const auto back = fit_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.spec.tag == "empty");
    CHECK(back.fit.loglik == fit.loglik);
    REQUIRE(back.fit.components.items.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(back.fit.components.items[c].estimate == fit.components.items[c].estimate);
        CHECK(back.fit.components.items[c].at_boundary == fit.components.items[c].at_boundary);
    }
    CHECK(back.fit.blups.size() == fit.blups.size());
    CHECK(fit_to_json(back.fit, back.spec).dump() == j.dump());
    CHECK(kind_of([] { fit_from_json(nlohmann::json::parse("{\"model\": 3}")); }) == ErrorKind::ParseError);
}
