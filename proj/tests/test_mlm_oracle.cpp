#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "tempobeat/mlm.hpp"
#include "tempobeat/mlm_oracle.hpp"

using namespace tempobeat;
using Catch::Approx;

namespace {

mlm::Design tiny(std::mt19937_64& rng, int hours, int days, int months, double s2h, double s2d, double s2m) {
    std::normal_distribution<double> g;
    std::vector<double> uh(static_cast<std::size_t>(hours)), ud(static_cast<std::size_t>(days * months)),
        um(static_cast<std::size_t>(months));
    for (auto& v : uh) v = std::sqrt(s2h) * g(rng);
    for (auto& v : ud) v = std::sqrt(s2d) * g(rng);
    for (auto& v : um) v = std::sqrt(s2m) * g(rng);
    std::vector<std::string> h, d, m;
    std::vector<double> ys, xs;
    for (int mo = 0; mo < months; ++mo) {
        for (int dd = 0; dd < days; ++dd) {
            for (int hh = 0; hh < hours; ++hh) {
                h.push_back("h" + std::to_string(hh));
                d.push_back("d" + std::to_string(mo * days + dd));
                m.push_back("m" + std::to_string(mo));
                const double x = g(rng);
                xs.push_back(x);
                ys.push_back(1.0 - 0.4 * x + uh[static_cast<std::size_t>(hh)] +
                             ud[static_cast<std::size_t>(mo * days + dd)] + um[static_cast<std::size_t>(mo)] +
                             0.5 * g(rng));
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(ys.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = xs[static_cast<std::size_t>(i)];
        y(i) = ys[static_cast<std::size_t>(i)];
    }
    return mlm::make_design(X, y, {mlm::make_factor("hour", h), mlm::make_factor("day", d), mlm::make_factor("month_year", m)});
}

/// Dense Z for the design's factors, in factor then level order.
Eigen::MatrixXd dense_z(const mlm::Design& d) {
    int q = 0;
    for (const auto& f : d.factors) q += f.levels();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d.y.size(), q);
    int offset = 0;
    for (const auto& f : d.factors) {
        for (std::size_t r = 0; r < d.n(); ++r) Z(static_cast<Eigen::Index>(r), offset + f.ids[r]) = 1.0;
        offset += f.levels();
    }
    return Z;
}

} // namespace

TEST_CASE("oracle refuses large designs") {
    std::vector<std::string> labels;
    for (int i = 0; i < 501; ++i) labels.push_back(std::to_string(i % 7));
    const auto d = mlm::make_design(Eigen::MatrixXd::Ones(501, 1), Eigen::VectorXd::LinSpaced(501, 0, 1),
                                    {mlm::make_factor("g", labels)});
    try {
        mlm::oracle_fit_dense(d);
        FAIL("oracle accepted 501 rows");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TooLargeForOracle);
    }
}

TEST_CASE("one group per factor leaves the mean and unidentified components") {
    const Eigen::VectorXd y = (Eigen::VectorXd(6) << 1.0, 3.0, 2.0, 6.0, 4.0, 2.0).finished();
    const std::vector<std::string> one(6, "a");
    const auto d = mlm::make_design(Eigen::MatrixXd::Ones(6, 1), y,
                                    {mlm::make_factor("hour", one), mlm::make_factor("day", one)});
    const auto oracle = mlm::oracle_fit_dense(d);
    const auto fit = mlm::fit_ml(d);
    CHECK(oracle.beta[0].coef == Approx(y.mean()).epsilon(1e-6));
    CHECK(fit.beta[0].coef == Approx(y.mean()).epsilon(1e-6));
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(oracle.components.items[c].at_boundary);
        CHECK(fit.components.items[c].at_boundary);
    }
    const double pop_var = (y.array() - y.mean()).square().mean();
    CHECK(oracle.components.residual().estimate == Approx(pop_var).epsilon(1e-6));
    CHECK(fit.components.residual().estimate == Approx(pop_var).epsilon(1e-6));
}

TEST_CASE("sparse fit agrees with the dense oracle") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 8; ++rep) {
        const auto d = tiny(rng, 3 + rep % 3, 3, 2 + rep % 2, rep % 4 == 0 ? 0.0 : 1.0, 0.3, 0.2);
        REQUIRE(d.n() <= 200);
        const auto fit = mlm::fit_ml(d);
        const auto oracle = mlm::oracle_fit_dense(d);
        CHECK(std::abs(fit.loglik - oracle.loglik) <= 1e-6);
        const double total = oracle.components.total();
        for (std::size_t c = 0; c < 4; ++c) {
            const double a = fit.components.items[c].estimate, b = oracle.components.items[c].estimate;
            if (std::max(a, b) > 1e-8 * total) CHECK(std::abs(a - b) <= 1e-4 * std::max(a, b));
        }
        CHECK((mlm::predict_conditional(fit, d) - mlm::predict_conditional(oracle, d)).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(fit.coefficient("x1").coef == Approx(oracle.coefficient("x1").coef).margin(1e-6));
    }
}

TEST_CASE("conditional modes follow the dense BLUP formula") {
    std::mt19937_64 rng(5);
    const auto d = tiny(rng, 4, 4, 3, 0.8, 0.2, 0.3);
    const auto fit = mlm::fit_ml(d);
    const Eigen::MatrixXd Z = dense_z(d);
    Eigen::VectorXd g(Z.cols());
    int offset = 0;
    for (std::size_t f = 0; f < d.factors.size(); ++f) {
        g.segment(offset, d.factors[f].levels()).setConstant(fit.components.items[f].estimate);
        offset += d.factors[f].levels();
    }
    const Eigen::MatrixXd V = Z * g.asDiagonal() * Z.transpose() +
                              fit.components.residual().estimate * Eigen::MatrixXd::Identity(d.y.size(), d.y.size());
    const Eigen::LLT<Eigen::MatrixXd> llt(V);
    const Eigen::MatrixXd vix = llt.solve(d.X);
    const Eigen::VectorXd beta = (d.X.transpose() * vix).ldlt().solve(vix.transpose() * d.y);
    const Eigen::VectorXd b = g.asDiagonal() * Z.transpose() * llt.solve(d.y - d.X * beta);
    const Eigen::VectorXd expected = d.X * beta + Z * b;
    CHECK((mlm::predict_conditional(fit, d) - expected).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(fit.beta[1].coef == Approx(beta(1)).margin(1e-8));
}
