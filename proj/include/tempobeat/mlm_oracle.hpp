#pragma once

/** @file
 * Dense reference fitter for small designs. It builds the marginal
 * covariance V = sum_f s_f^2 Z_f Z_f' + s_e^2 I explicitly, evaluates the
 * exact log-likelihood with a dense Cholesky and maximizes it over the
 * log-variances with Nelder-Mead. It shares nothing with the profiled
 * sparse fitter beyond the result types, and exists to check it.
 */

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tempobeat/error.hpp"
#include "tempobeat/mlm.hpp"
#include "tempobeat/optim.hpp"

namespace tempobeat::mlm {

inline constexpr std::size_t kOracleMaxRows = 500;

class DenseLikelihood {
public:
    explicit DenseLikelihood(const Design& d) : d_(d) {}

    struct Evaluation {
        double deviance = 0.0;
        Eigen::VectorXd beta;
        Eigen::MatrixXd cov_beta;
        Eigen::VectorXd vinv_resid;
    };

    [[nodiscard]] Eigen::MatrixXd covariance(const Eigen::VectorXd& log_var) const {
        const auto n = static_cast<Eigen::Index>(d_.n());
        const auto k = static_cast<Eigen::Index>(d_.factors.size());
        Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) * std::exp(log_var(k));
        for (Eigen::Index f = 0; f < k; ++f) {
            const double s2 = std::exp(log_var(f));
            const auto& ids = d_.factors[static_cast<std::size_t>(f)].ids;
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (ids[static_cast<std::size_t>(i)] == ids[static_cast<std::size_t>(j)]) {
                        V(i, j) += s2;
                    }
                }
            }
        }
        return V;
    }

    [[nodiscard]] Evaluation evaluate(const Eigen::VectorXd& log_var) const {
        const Eigen::MatrixXd V = covariance(log_var);
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        const Eigen::MatrixXd L = llt.matrixL();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            logdet += 2.0 * std::log(L(i, i));
        }
        const Eigen::MatrixXd vinv_x = llt.solve(d_.X);
        const Eigen::VectorXd vinv_y = llt.solve(d_.y);
        const Eigen::MatrixXd xtvx = d_.X.transpose() * vinv_x;
        Evaluation ev;
        ev.cov_beta = xtvx.inverse();
        ev.beta = ev.cov_beta * (d_.X.transpose() * vinv_y);
        const Eigen::VectorXd r = d_.y - d_.X * ev.beta;
        ev.vinv_resid = llt.solve(r);
        const double n = static_cast<double>(d_.n());
        ev.deviance = n * std::log(2.0 * std::numbers::pi) + logdet + r.dot(ev.vinv_resid);
        return ev;
    }

    [[nodiscard]] double deviance(const Eigen::VectorXd& log_var) const { return evaluate(log_var).deviance; }

private:
    const Design& d_;
};

inline ModelFit oracle_fit_dense(const Design& design) {
    if (design.n() > kOracleMaxRows) {
        throw Error(ErrorKind::TooLargeForOracle,
                    "dense oracle handles at most " + std::to_string(kOracleMaxRows) + " rows");
    }
    const auto k = static_cast<Eigen::Index>(design.factors.size());
    DenseLikelihood lik(design);

    const double mean = design.y.mean();
    const double var = std::max((design.y.array() - mean).square().mean(), 1e-12);
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(k + 1, std::log(var / static_cast<double>(k + 1)));
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(k + 1, kLogVarianceFloor);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(k + 1, kLogVarianceCeiling);
    const auto best = optim::nelder_mead([&](const Eigen::VectorXd& s) { return lik.deviance(s); }, x0, lo, hi);

    ModelFit fit;
    fit.tag = design.tag;
    fit.n_obs = design.n();
    fit.converged = true;
    fit.iterations = best.evaluations;
    const auto ev = lik.evaluate(best.x);
    fit.loglik = -0.5 * ev.deviance;
    for (std::size_t j = 0; j < design.p(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        fit.beta.push_back(wald(design.fixed_names[j], ev.beta(jj), std::sqrt(ev.cov_beta(jj, jj))));
    }
    double total = 0.0;
    for (Eigen::Index f = 0; f <= k; ++f) total += std::exp(best.x(f));
    for (Eigen::Index f = 0; f <= k; ++f) {
        VarianceComponent c;
        c.name = f < k ? design.factors[static_cast<std::size_t>(f)].name : "residual";
        c.estimate = std::exp(best.x(f));
        // the likelihood is flat once a component is negligible
        c.at_boundary = c.estimate < 1e-8 * total;
        fit.components.items.push_back(c);
    }
    std::vector<bool> interior;
    for (const auto& c : fit.components.items) interior.push_back(!c.at_boundary);
    const Eigen::MatrixXd H =
        numeric_hessian([&](const Eigen::VectorXd& s) { return lik.deviance(s); }, best.x, interior, 2e-3);
    attach_component_inference(fit.components, H, interior);

    // BLUP: G Z' V^{-1} (y - X beta)
    for (Eigen::Index f = 0; f < k; ++f) {
        const auto& factor = design.factors[static_cast<std::size_t>(f)];
        GroupEffects ge;
        ge.factor = factor.name;
        ge.labels = factor.labels;
        ge.blup.assign(factor.labels.size(), 0.0);
        const double s2 = std::exp(best.x(f));
        for (std::size_t r = 0; r < design.n(); ++r) {
            ge.blup[static_cast<std::size_t>(factor.ids[r])] += s2 * ev.vinv_resid(static_cast<Eigen::Index>(r));
        }
        fit.blups.push_back(std::move(ge));
    }
    fit.loglik_linear = ols_loglik(design);
    fit.lr_chi2_vs_linear = std::max(2.0 * (fit.loglik - fit.loglik_linear), 0.0);
    return fit;
}

} // namespace tempobeat::mlm
