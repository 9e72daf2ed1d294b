#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace tempobeat::optim {

struct NelderMeadOptions {
    double initial_step = 0.5;
    double f_tolerance = 1e-13;
    double x_tolerance = 1e-10;
    int max_evaluations = 40000;
    int max_restarts = 12;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int evaluations = 0;
};

/**
 * Box-constrained Nelder-Mead (points are clamped into [lo, hi]) with
 * restarts from the incumbent until a restart no longer improves it.
 */
template <class F>
NelderMeadResult nelder_mead(F&& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadOptions& opt = {}) {
    const auto n = x0.size();
    int evals = 0;
    auto clamp = [&](Eigen::VectorXd x) { return Eigen::VectorXd(x.cwiseMax(lo).cwiseMin(hi)); };
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return f(x);
    };

    Eigen::VectorXd best = clamp(std::move(x0));
    double fbest = eval(best);
    double step = opt.initial_step;

    for (int restart = 0; restart <= opt.max_restarts && evals < opt.max_evaluations; ++restart) {
        std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), best);
        std::vector<double> fv(static_cast<std::size_t>(n + 1), fbest);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& p = pts[static_cast<std::size_t>(i + 1)];
            p(i) += (p(i) + step <= hi(i)) ? step : -step;
            p = clamp(p);
            fv[static_cast<std::size_t>(i + 1)] = eval(p);
        }
        std::vector<std::size_t> order(pts.size());
        while (evals < opt.max_evaluations) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t ib = order.front();
            const std::size_t iw = order.back();
            const std::size_t isw = order[order.size() - 2];
            double spread = 0.0;
            for (const auto& p : pts) {
                spread = std::max(spread, (p - pts[ib]).cwiseAbs().maxCoeff());
            }
            if (std::abs(fv[iw] - fv[ib]) <= opt.f_tolerance * (1.0 + std::abs(fv[ib])) &&
                spread <= opt.x_tolerance * (1.0 + pts[ib].cwiseAbs().maxCoeff())) {
                break;
            }
            if (spread == 0.0) {
                break;
            }
            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (i != iw) centroid += pts[i];
            }
            centroid /= static_cast<double>(n);
            const Eigen::VectorXd xr = clamp(centroid + (centroid - pts[iw]));
            const double fr = eval(xr);
            if (fr < fv[ib]) {
                const Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[iw]));
                const double fe = eval(xe);
                if (fe < fr) {
                    pts[iw] = xe;
                    fv[iw] = fe;
                } else {
                    pts[iw] = xr;
                    fv[iw] = fr;
                }
            } else if (fr < fv[isw]) {
                pts[iw] = xr;
                fv[iw] = fr;
            } else {
                const bool outside = fr < fv[iw];
                const Eigen::VectorXd xc = outside ? clamp(centroid + 0.5 * (xr - centroid))
                                                   : clamp(centroid + 0.5 * (pts[iw] - centroid));
                const double fc = eval(xc);
                if (fc < std::min(fr, fv[iw])) {
                    pts[iw] = xc;
                    fv[iw] = fc;
                } else {
                    for (std::size_t i = 0; i < pts.size(); ++i) {
                        if (i == ib) continue;
                        pts[i] = clamp(pts[ib] + 0.5 * (pts[i] - pts[ib]));
                        fv[i] = eval(pts[i]);
                    }
                }
            }
        }
        const auto it = std::min_element(fv.begin(), fv.end());
        const auto ibest = static_cast<std::size_t>(it - fv.begin());
        const bool improved = fv[ibest] < fbest - opt.f_tolerance * (1.0 + std::abs(fbest));
        if (fv[ibest] < fbest) {
            fbest = fv[ibest];
            best = pts[ibest];
        }
        if (!improved && restart > 0) {
            break;
        }
        step = std::max(step * 0.5, 1e-3);
    }
    return NelderMeadResult{best, fbest, evals};
}

} // namespace tempobeat::optim
