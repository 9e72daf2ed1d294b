#pragma once

/** @file
 * Linear mixed models with crossed/nested random intercepts, fitted by
 * maximum likelihood on the profiled deviance.
 *
 * The model is y = X b + sum_f Z_f v_f + e with v_f ~ N(0, s_f^2 I) and
 * e ~ N(0, s_e^2 I). Writing theta_f = s_f / s_e and Lambda for the block
 * diagonal of theta's, the fixed effects and s_e^2 are profiled out:
 *
 *   d(theta) = log|A| + n (1 + log(2 pi pwrss / n)),   A = Lambda Z'Z Lambda + I
 *
 * where pwrss is the minimum over (b, u) of |y - X b - Z Lambda u|^2 + |u|^2.
 * A is factored with a sparse LDL' (pattern analysed once per design).
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "tempobeat/error.hpp"
#include "tempobeat/ingest.hpp"
#include "tempobeat/stats.hpp"

namespace tempobeat::mlm {

/// log(floor) for variance components reported at the boundary.
inline constexpr double kLogVarianceFloor = -30.0;
inline constexpr double kLogVarianceCeiling = 10.0;
inline constexpr int kMaxIterations = 500;

struct GroupingFactor {
    std::string name;
    /// group id per row, in [0, labels.size())
    std::vector<int> ids;
    std::vector<std::string> labels;

    [[nodiscard]] int levels() const { return static_cast<int>(labels.size()); }
};

/// Builds a factor whose ids follow the sorted order of the labels, so the
/// numbering does not depend on row order.
inline GroupingFactor make_factor(std::string name, const std::vector<std::string>& row_labels) {
    GroupingFactor f;
    f.name = std::move(name);
    std::map<std::string, int> index;
    for (const auto& l : row_labels) {
        index.emplace(l, 0);
    }
    int next = 0;
    for (auto& [label, id] : index) {
        id = next++;
        f.labels.push_back(label);
    }
    f.ids.reserve(row_labels.size());
    for (const auto& l : row_labels) {
        f.ids.push_back(index[l]);
    }
    return f;
}

enum class Restriction { None, ExcludeEventDays };

struct ModelSpec {
    std::string tag = "empty";
    std::vector<std::string> fixed_effects;
    Restriction restriction = Restriction::None;

    static ModelSpec empty() { return ModelSpec{"empty", {}, Restriction::None}; }
    static ModelSpec restricted() { return ModelSpec{"restricted", {}, Restriction::ExcludeEventDays}; }
    /// Every non-constant covariate column of the table.
    static ModelSpec full(const CovariateTable& table) {
        ModelSpec s{"full", {}, Restriction::None};
        for (std::size_t c = 0; c < table.names.size(); ++c) {
            const auto& col = table.columns[c];
            const bool constant =
                std::all_of(col.begin(), col.end(), [f = col.empty() ? 0.0 : col.front()](double v) { return v == f; });
            if (!constant) {
                s.fixed_effects.push_back(table.names[c]);
            }
        }
        return s;
    }
};

struct Design {
    std::string tag;
    /// "constant" first
    std::vector<std::string> fixed_names;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<GroupingFactor> factors;
    /// source dataset row of each design row (identity for synthetic designs)
    std::vector<std::size_t> rows;

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

inline Design make_design(Eigen::MatrixXd X, Eigen::VectorXd y, std::vector<GroupingFactor> factors,
                          std::vector<std::string> fixed_names = {}) {
    Design d;
    d.tag = "custom";
    if (fixed_names.empty()) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            fixed_names.push_back(j == 0 ? "constant" : "x" + std::to_string(j));
        }
    }
    d.fixed_names = std::move(fixed_names);
    d.X = std::move(X);
    d.y = std::move(y);
    d.factors = std::move(factors);
    d.rows.resize(d.n());
    for (std::size_t i = 0; i < d.rows.size(); ++i) d.rows[i] = i;
    for (const auto& f : d.factors) {
        if (f.ids.size() != d.n()) {
            throw Error(ErrorKind::LengthMismatch, "factor '" + f.name + "' has the wrong number of rows");
        }
    }
    if (static_cast<std::size_t>(d.X.rows()) != d.n()) {
        throw Error(ErrorKind::LengthMismatch, "fixed-effects matrix has the wrong number of rows");
    }
    return d;
}

/// Dates on which any event dummy is set at any hour.
inline std::vector<bool> event_day_rows(const AnalysisDataset& ds) {
    std::vector<bool> out(ds.size(), false);
    std::map<std::int64_t, bool> day_has_event;
    for (std::size_t c = 0; c < kEventCategoryCount && c < ds.covariates.columns.size(); ++c) {
        if (!parse_event_category(ds.covariates.names[c])) {
            continue;
        }
        const auto& col = ds.covariates.columns[c];
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (col[i] != 0.0) {
                day_has_event[ds.keys[i].date.days] = true;
            }
        }
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[i] = day_has_event.count(ds.keys[i].date.days) > 0;
    }
    return out;
}

/// Fixed matrix (intercept + named covariates) and the hour-of-day, date and
/// month-year grouping factors. `exclude` optionally drops rows (anomalies).
inline Design build_design(const AnalysisDataset& ds, const ModelSpec& spec,
                           const std::vector<bool>* exclude = nullptr) {
    std::vector<const std::vector<double>*> cols;
    for (const auto& name : spec.fixed_effects) {
        const auto idx = ds.covariates.index_of(name);
        if (!idx) {
            throw Error(ErrorKind::UnknownColumn, "model names unknown covariate '" + name + "'");
        }
        cols.push_back(&ds.covariates.columns[*idx]);
    }
    std::vector<bool> drop(ds.size(), false);
    if (spec.restriction == Restriction::ExcludeEventDays) {
        drop = event_day_rows(ds);
    }
    if (exclude != nullptr) {
        for (std::size_t i = 0; i < ds.size() && i < exclude->size(); ++i) {
            drop[i] = drop[i] || (*exclude)[i];
        }
    }
    Design d;
    d.tag = spec.tag;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!drop[i]) {
            d.rows.push_back(i);
        }
    }
    if (d.rows.empty()) {
        throw Error(ErrorKind::EmptyAfterRestriction, "no rows remain after restriction");
    }
    const auto n = static_cast<Eigen::Index>(d.rows.size());
    d.fixed_names.push_back("constant");
    for (const auto& name : spec.fixed_effects) {
        d.fixed_names.push_back(name);
    }
    d.X.resize(n, static_cast<Eigen::Index>(cols.size() + 1));
    d.y.resize(n);
    std::vector<std::string> hour(d.rows.size());
    std::vector<std::string> day(d.rows.size());
    std::vector<std::string> month(d.rows.size());
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t i = d.rows[static_cast<std::size_t>(r)];
        d.X(r, 0) = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            d.X(r, static_cast<Eigen::Index>(c + 1)) = (*cols[c])[i];
        }
        d.y(r) = ds.y.z[i];
        const auto& key = ds.keys[i];
        char buf[4];
        std::snprintf(buf, sizeof buf, "%02d", key.hour_of_day);
        hour[static_cast<std::size_t>(r)] = buf;
        day[static_cast<std::size_t>(r)] = key.date.to_string();
        month[static_cast<std::size_t>(r)] = key.month_year.to_string();
    }
    d.factors.push_back(make_factor("hour", hour));
    d.factors.push_back(make_factor("day", day));
    d.factors.push_back(make_factor("month_year", month));
    return d;
}

// ---------------------------------------------------------------------------
// Profiled deviance
// ---------------------------------------------------------------------------

class ProfiledDeviance {
public:
    struct Evaluation {
        double deviance = 0.0;
        double pwrss = 0.0;
        double logdet = 0.0;
        Eigen::VectorXd beta;
        /// spherical random effects; b = Lambda u
        Eigen::VectorXd u;
        /// X'X - X'Z Lambda A^{-1} Lambda Z'X
        Eigen::MatrixXd schur;
        Eigen::VectorXd gradient;
    };

    explicit ProfiledDeviance(const Design& d) : n_(static_cast<double>(d.n())) {
        const auto n = static_cast<Eigen::Index>(d.n());
        for (const auto& f : d.factors) {
            offsets_.push_back(q_);
            q_ += f.levels();
        }
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(n) * d.factors.size() + static_cast<std::size_t>(q_));
        Eigen::SparseMatrix<double> Z(n, q_);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (std::size_t f = 0; f < d.factors.size(); ++f) {
                trip.emplace_back(r, offsets_[f] + d.factors[f].ids[static_cast<std::size_t>(r)], 1.0);
            }
        }
        Z.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseMatrix<double> I(q_, q_);
        I.setIdentity();
        ztz_ = Eigen::SparseMatrix<double>(Z.transpose() * Z) + I * 0.0;
        ztz_.makeCompressed();
        ztx_ = Z.transpose() * d.X;
        zty_ = Z.transpose() * d.y;
        xtx_ = d.X.transpose() * d.X;
        xty_ = d.X.transpose() * d.y;
        X_ = d.X;
        y_ = d.y;
        Z_ = std::move(Z);
        block_of_.resize(static_cast<std::size_t>(q_));
        for (std::size_t f = 0; f < offsets_.size(); ++f) {
            for (int j = 0; j < d.factors[f].levels(); ++j) {
                block_of_[static_cast<std::size_t>(offsets_[f] + j)] = static_cast<int>(f);
            }
        }
        a_ = ztz_;
        ldlt_.analyzePattern(a_);
    }

    [[nodiscard]] int factors() const { return static_cast<int>(offsets_.size()); }
    [[nodiscard]] double n() const { return n_; }
    [[nodiscard]] int q() const { return q_; }
    [[nodiscard]] const std::vector<int>& offsets() const { return offsets_; }

    Evaluation evaluate(const Eigen::VectorXd& theta, bool with_gradient) {
        Eigen::VectorXd lam(q_);
        for (Eigen::Index i = 0; i < q_; ++i) {
            lam(i) = theta(block_of_[static_cast<std::size_t>(i)]);
        }
        for (Eigen::Index k = 0; k < ztz_.outerSize(); ++k) {
            Eigen::SparseMatrix<double>::InnerIterator src(ztz_, k);
            Eigen::SparseMatrix<double>::InnerIterator dst(a_, k);
            for (; src; ++src, ++dst) {
                double v = lam(src.row()) * src.value() * lam(src.col());
                if (src.row() == src.col()) {
                    v += 1.0;
                }
                dst.valueRef() = v;
            }
        }
        ldlt_.factorize(a_);
        if (ldlt_.info() != Eigen::Success) {
            throw Error(ErrorKind::SingularFactorization, "random-effects system could not be factored");
        }
        Evaluation ev;
        const Eigen::VectorXd D = ldlt_.vectorD();
        ev.logdet = 0.0;
        for (Eigen::Index i = 0; i < D.size(); ++i) {
            if (!(D(i) > 0.0)) {
                throw Error(ErrorKind::SingularFactorization, "random-effects system is not positive definite");
            }
            ev.logdet += std::log(D(i));
        }
        const Eigen::MatrixXd lztx = lam.asDiagonal() * ztx_;
        const Eigen::VectorXd lzty = lam.asDiagonal() * zty_;
        const Eigen::MatrixXd W = ldlt_.solve(lztx);
        const Eigen::VectorXd w = ldlt_.solve(lzty);
        ev.schur = xtx_ - lztx.transpose() * W;
        Eigen::LLT<Eigen::MatrixXd> sllt(ev.schur);
        if (sllt.info() != Eigen::Success) {
            throw Error(ErrorKind::RankDeficientFixed, "fixed-effects system is not positive definite");
        }
        ev.beta = sllt.solve(xty_ - lztx.transpose() * w);
        ev.u = w - W * ev.beta;
        const Eigen::VectorXd b = lam.cwiseProduct(ev.u);
        const Eigen::VectorXd resid = y_ - X_ * ev.beta - Z_ * b;
        ev.pwrss = resid.squaredNorm() + ev.u.squaredNorm();
        ev.deviance = ev.logdet + n_ * (1.0 + std::log(2.0 * std::numbers::pi * ev.pwrss / n_));
        if (with_gradient) {
            ev.gradient = gradient(theta, ev);
        }
        return ev;
    }

    /// Deviance (-2 log L) as a function of log(s_f^2) for each factor
    /// followed by log(s_e^2), with only the fixed effects profiled out.
    double deviance_log_variances(const Eigen::VectorXd& log_var) {
        const int k = factors();
        const double se = log_var(k);
        Eigen::VectorXd theta(k);
        for (int f = 0; f < k; ++f) {
            theta(f) = std::exp(0.5 * (log_var(f) - se));
        }
        const Evaluation ev = evaluate(theta, false);
        return n_ * std::log(2.0 * std::numbers::pi) + n_ * se + ev.logdet + ev.pwrss * std::exp(-se);
    }

private:
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Evaluation& ev) {
        const int k = factors();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
        const Eigen::MatrixXd ainv = ldlt_.solve(Eigen::MatrixXd::Identity(q_, q_));
        for (int f = 0; f < k; ++f) {
            if (theta(f) == 0.0) {
                continue;
            }
            const int lo = offsets_[static_cast<std::size_t>(f)];
            const int hi = f + 1 < k ? offsets_[static_cast<std::size_t>(f + 1)] : q_;
            double tr = 0.0;
            double uu = 0.0;
            for (int i = lo; i < hi; ++i) {
                tr += ainv(i, i);
                uu += ev.u(i) * ev.u(i);
            }
            g(f) = 2.0 / theta(f) * (static_cast<double>(hi - lo) - tr - n_ * uu / ev.pwrss);
        }
        return g;
    }

    double n_ = 0.0;
    int q_ = 0;
    std::vector<int> offsets_;
    std::vector<int> block_of_;
    Eigen::SparseMatrix<double> Z_;
    Eigen::SparseMatrix<double> ztz_;
    Eigen::SparseMatrix<double> a_;
    Eigen::MatrixXd ztx_;
    Eigen::VectorXd zty_;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

struct FixedEffectEstimate {
    std::string name;
    double coef = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
    std::array<double, 2> ci95{};
};

struct VarianceComponent {
    std::string name;
    double estimate = 0.0;
    /// NaN when the component sits on the boundary
    double se = std::numeric_limits<double>::quiet_NaN();
    double share = 0.0;
    std::array<double, 2> ci{};
    bool at_boundary = false;
};

/// Random-factor components in design order, residual last.
struct VarianceComponents {
    std::vector<VarianceComponent> items;

    [[nodiscard]] double total() const {
        double t = 0.0;
        for (const auto& c : items) t += c.estimate;
        return t;
    }
    [[nodiscard]] const VarianceComponent& get(std::string_view name) const {
        for (const auto& c : items) {
            if (c.name == name) return c;
        }
        throw Error(ErrorKind::UnknownColumn, "no variance component '" + std::string(name) + "'");
    }
    [[nodiscard]] const VarianceComponent& residual() const { return items.back(); }
};

struct GroupEffects {
    std::string factor;
    std::vector<std::string> labels;
    std::vector<double> blup;
};

struct ModelFit {
    std::string tag;
    std::vector<FixedEffectEstimate> beta;
    VarianceComponents components;
    double loglik = 0.0;
    double loglik_linear = 0.0;
    double lr_chi2_vs_linear = 0.0;
    std::size_t n_obs = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<GroupEffects> blups;
    std::vector<std::string> warnings;

    /// log of every component (factors then residual), boundary ones at the floor
    [[nodiscard]] Eigen::VectorXd log_variances() const {
        Eigen::VectorXd s(static_cast<Eigen::Index>(components.items.size()));
        for (std::size_t i = 0; i < components.items.size(); ++i) {
            s(static_cast<Eigen::Index>(i)) = std::log(components.items[i].estimate);
        }
        return s;
    }
    [[nodiscard]] const FixedEffectEstimate& coefficient(std::string_view name) const {
        for (const auto& b : beta) {
            if (b.name == name) return b;
        }
        throw Error(ErrorKind::UnknownColumn, "no fixed effect '" + std::string(name) + "'");
    }
};

inline double ols_loglik(const Design& d) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    const Eigen::VectorXd beta = qr.solve(d.y);
    const double rss = (d.y - d.X * beta).squaredNorm();
    const double n = static_cast<double>(d.n());
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * rss / n) + 1.0);
}

inline FixedEffectEstimate wald(std::string name, double coef, double se) {
    FixedEffectEstimate e;
    e.name = std::move(name);
    e.coef = coef;
    e.se = se;
    e.z = coef / se;
    e.p = stats::two_sided_p(e.z);
    e.ci95 = {coef - stats::kZ975 * se, coef + stats::kZ975 * se};
    return e;
}

/// Central second differences of f around x over the flagged coordinates.
template <class F>
Eigen::MatrixXd numeric_hessian(F&& f, const Eigen::VectorXd& x, const std::vector<bool>& use, double h) {
    const auto k = x.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(k, k);
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!use[static_cast<std::size_t>(i)]) continue;
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
        for (Eigen::Index j = 0; j < i; ++j) {
            if (!use[static_cast<std::size_t>(j)]) continue;
            Eigen::VectorXd a = x, b = x, c = x, e = x;
            a(i) += h; a(j) += h;
            b(i) += h; b(j) -= h;
            c(i) -= h; c(j) += h;
            e(i) -= h; e(j) -= h;
            H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(e)) / (4.0 * h * h);
        }
    }
    return H;
}

/// Fills share/se/ci of components from log-variances `s` and the Hessian of
/// the deviance in log-variance space. CIs are exp(s +- 1.96 se_log).
inline void attach_component_inference(VarianceComponents& vc, const Eigen::MatrixXd& hessian,
                                       const std::vector<bool>& interior) {
    const double total = vc.total();
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < interior.size(); ++i) {
        if (interior[i]) idx.push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd Hs(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = 0; b < idx.size(); ++b) {
            Hs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = hessian(idx[a], idx[b]);
        }
    }
    Eigen::MatrixXd cov;
    bool ok = false;
    if (!idx.empty()) {
        // deviance = -2 log L, so the information is H / 2
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * Hs);
        if (llt.info() == Eigen::Success) {
            cov = llt.solve(Eigen::MatrixXd::Identity(Hs.rows(), Hs.cols()));
            ok = true;
        }
    }
    for (std::size_t i = 0; i < vc.items.size(); ++i) {
        auto& c = vc.items[i];
        c.share = total > 0.0 ? c.estimate / total : 0.0;
        c.se = std::numeric_limits<double>::quiet_NaN();
        c.ci = {c.estimate, c.estimate};
        if (c.at_boundary) {
            c.ci = {0.0, c.estimate};
        }
    }
    if (!ok) {
        return;
    }
    for (std::size_t a = 0; a < idx.size(); ++a) {
        auto& c = vc.items[static_cast<std::size_t>(idx[a])];
        const double var_log = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
        if (!(var_log > 0.0)) continue;
        const double se_log = std::sqrt(var_log);
        c.se = c.estimate * se_log;
        c.ci = {c.estimate * std::exp(-stats::kZ975 * se_log), c.estimate * std::exp(stats::kZ975 * se_log)};
    }
}

struct FitOptions {
    int max_iterations = kMaxIterations;
    /// converged when the projected gradient (deviance per unit theta) is below this
    double gradient_tolerance = 1e-6;
    /// or when an iteration changes the deviance by less than this, relatively,
    /// while the projected gradient is below `loose_gradient_tolerance`
    double relative_tolerance = 1e-8;
    double loose_gradient_tolerance = 1e-3;
    double theta_max = 1e6;
};

namespace detail {

inline double projected_gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& g, std::vector<bool>& free) {
    double pg = 0.0;
    for (Eigen::Index f = 0; f < theta.size(); ++f) {
        free[static_cast<std::size_t>(f)] = !(theta(f) <= 0.0 && g(f) >= 0.0);
        if (free[static_cast<std::size_t>(f)]) pg = std::max(pg, std::abs(g(f)));
    }
    return pg;
}

/// Newton direction on the free coordinates; indefinite Hessians get their
/// eigenvalues reflected and floored.
inline Eigen::VectorXd newton_direction(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                        const std::vector<bool>& free) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < free.size(); ++i) {
        if (free[i]) idx.push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::VectorXd d = Eigen::VectorXd::Zero(g.size());
    if (idx.empty()) return d;
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Hs(m, m);
    Eigen::VectorXd gs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        gs(a) = g(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) {
            Hs(a, b) = H(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Hs + Hs.transpose()));
    Eigen::VectorXd lam = es.eigenvalues().cwiseAbs();
    const double big = std::max(lam.maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < m; ++i) {
        lam(i) = std::max(lam(i), 1e-8 * big);
    }
    const Eigen::VectorXd ds =
        -es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose() * gs;
    for (Eigen::Index a = 0; a < m; ++a) {
        d(idx[static_cast<std::size_t>(a)]) = ds(a);
    }
    return d;
}

} // namespace detail

/// Maximum-likelihood fit by projected Newton iterations on theta >= 0 with
/// an analytic gradient and a finite-difference Hessian of that gradient.
inline ModelFit fit_ml(const Design& design, const FitOptions& opt = {}) {
    const auto p = static_cast<Eigen::Index>(design.p());
    if (design.n() <= design.p()) {
        throw Error(ErrorKind::RankDeficientFixed, "fewer observations than fixed effects");
    }
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
        if (qr.rank() < p) {
            throw Error(ErrorKind::RankDeficientFixed, "fixed-effects matrix is not of full column rank");
        }
    }
    ProfiledDeviance dev(design);
    const int k = dev.factors();
    Eigen::VectorXd theta = Eigen::VectorXd::Ones(k);

    auto hessian = [&](const Eigen::VectorXd& th, const std::vector<bool>& free) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(k, k);
        for (int f = 0; f < k; ++f) {
            if (!free[static_cast<std::size_t>(f)]) continue;
            const double h = 1e-4 * std::max(std::abs(th(f)), 1e-2);
            Eigen::VectorXd tp = th, tm = th;
            tp(f) += h;
            tm(f) -= h;
            const Eigen::VectorXd gp = dev.evaluate(tp, true).gradient;
            const Eigen::VectorXd gm = dev.evaluate(tm, true).gradient;
            H.col(f) = (gp - gm) / (2.0 * h);
        }
        return Eigen::MatrixXd(0.5 * (H + H.transpose()));
    };

    ModelFit fit;
    fit.tag = design.tag;
    ProfiledDeviance::Evaluation cur = dev.evaluate(theta, true);
    std::vector<bool> free(static_cast<std::size_t>(k), true);
    int iter = 0;
    int stalled = 0;
    bool converged = false;
    while (iter < opt.max_iterations) {
        ++iter;
        const double pg = detail::projected_gradient(theta, cur.gradient, free);
        if (pg < opt.gradient_tolerance || (stalled >= 3 && pg < opt.loose_gradient_tolerance)) {
            // a component pinned at zero may still be a saddle: probe it
            bool escaped = false;
            for (int f = 0; f < k; ++f) {
                if (theta(f) != 0.0) continue;
                Eigen::VectorXd probe = theta;
                probe(f) = 1e-2;
                const auto ev = dev.evaluate(probe, true);
                if (ev.deviance < cur.deviance - 1e-10 * std::abs(cur.deviance)) {
                    theta = probe;
                    cur = ev;
                    escaped = true;
                }
            }
            if (!escaped) {
                converged = true;
                break;
            }
            stalled = 0;
            continue;
        }
        const Eigen::MatrixXd H = hessian(theta, free);
        Eigen::VectorXd dir = detail::newton_direction(H, cur.gradient, free);
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                // steepest descent fallback
                dir = Eigen::VectorXd::Zero(k);
                for (int f = 0; f < k; ++f) {
                    if (free[static_cast<std::size_t>(f)]) dir(f) = -cur.gradient(f);
                }
                const double scale = dir.cwiseAbs().maxCoeff();
                if (scale > 0.0) dir *= std::min(1.0, 0.1 * std::max(theta.cwiseAbs().maxCoeff(), 1.0) / scale);
            }
            double alpha = 1.0;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                Eigen::VectorXd trial = (theta + alpha * dir).cwiseMax(0.0).cwiseMin(opt.theta_max);
                const double decrease = cur.gradient.dot(trial - theta);
                ProfiledDeviance::Evaluation ev;
                try {
                    ev = dev.evaluate(trial, true);
                } catch (const Error&) {
                    continue;
                }
                if (ev.deviance <= cur.deviance + 1e-4 * std::min(decrease, 0.0)) {
                    const double change = std::abs(cur.deviance - ev.deviance);
                    stalled = change <= opt.relative_tolerance * std::abs(cur.deviance) ? stalled + 1 : 0;
                    theta = trial;
                    cur = ev;
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) {
            // no descent possible in floating point: judge by the gradient
            converged = pg < opt.loose_gradient_tolerance;
            break;
        }
    }

    fit.iterations = iter;
    fit.converged = converged;
    if (!converged) {
        fit.warnings.push_back("optimizer stopped after " + std::to_string(iter) + " iterations without converging");
    }

    const double n = dev.n();
    const double sigma2 = cur.pwrss / n;
    fit.n_obs = design.n();
    fit.loglik = -0.5 * cur.deviance;

    // fixed effects
    const Eigen::MatrixXd cov_beta =
        sigma2 * Eigen::LLT<Eigen::MatrixXd>(cur.schur).solve(Eigen::MatrixXd::Identity(p, p));
    for (Eigen::Index j = 0; j < p; ++j) {
        fit.beta.push_back(wald(design.fixed_names[static_cast<std::size_t>(j)], cur.beta(j), std::sqrt(cov_beta(j, j))));
    }

    // variance components
    const double floor = std::exp(kLogVarianceFloor);
    for (int f = 0; f < k; ++f) {
        VarianceComponent c;
        c.name = design.factors[static_cast<std::size_t>(f)].name;
        c.estimate = theta(f) * theta(f) * sigma2;
        if (c.estimate < floor) {
            c.estimate = floor;
            c.at_boundary = true;
        }
        fit.components.items.push_back(c);
    }
    {
        VarianceComponent c;
        c.name = "residual";
        c.estimate = std::max(sigma2, floor);
        c.at_boundary = sigma2 < floor;
        fit.components.items.push_back(c);
    }
    std::vector<bool> interior;
    for (const auto& c : fit.components.items) interior.push_back(!c.at_boundary);
    const Eigen::VectorXd s = fit.log_variances();
    const Eigen::MatrixXd H =
        numeric_hessian([&](const Eigen::VectorXd& x) { return dev.deviance_log_variances(x); }, s, interior, 2e-3);
    attach_component_inference(fit.components, H, interior);

    // conditional modes b = Lambda u, in units of y
    for (int f = 0; f < k; ++f) {
        const auto& factor = design.factors[static_cast<std::size_t>(f)];
        GroupEffects ge;
        ge.factor = factor.name;
        ge.labels = factor.labels;
        ge.blup.resize(factor.labels.size());
        for (int j = 0; j < factor.levels(); ++j) {
            ge.blup[static_cast<std::size_t>(j)] = theta(f) * cur.u(dev.offsets()[static_cast<std::size_t>(f)] + j);
        }
        fit.blups.push_back(std::move(ge));
    }

    fit.loglik_linear = ols_loglik(design);
    const double lr = 2.0 * (fit.loglik - fit.loglik_linear);
    if (lr < 0.0) {
        fit.warnings.push_back("negative likelihood-ratio statistic clamped to 0");
    }
    fit.lr_chi2_vs_linear = std::max(lr, 0.0);
    return fit;
}

/// 2 (loglik_mixed - loglik_ols) with the same fixed effects, clamped at 0.
inline double lr_test_vs_linear(const ModelFit& fit, const Design& design) {
    return std::max(2.0 * (fit.loglik - ols_loglik(design)), 0.0);
}

/// Fixed part of the prediction for each design row.
inline Eigen::VectorXd predict_fixed(const ModelFit& fit, const Design& design) {
    Eigen::VectorXd beta(static_cast<Eigen::Index>(design.p()));
    for (std::size_t j = 0; j < design.p(); ++j) {
        beta(static_cast<Eigen::Index>(j)) = fit.coefficient(design.fixed_names[j]).coef;
    }
    return design.X * beta;
}

/// Fixed part plus the conditional modes of every random intercept. Groups
/// are matched by label, so the design may differ from the fitted one.
inline Eigen::VectorXd predict_conditional(const ModelFit& fit, const Design& design) {
    Eigen::VectorXd yhat = predict_fixed(fit, design);
    for (const auto& factor : design.factors) {
        const auto ge = std::find_if(fit.blups.begin(), fit.blups.end(),
                                     [&](const GroupEffects& g) { return g.factor == factor.name; });
        if (ge == fit.blups.end()) {
            throw Error(ErrorKind::GroupUnseen, "fit has no factor '" + factor.name + "'");
        }
        std::unordered_map<std::string, double> lookup;
        for (std::size_t j = 0; j < ge->labels.size(); ++j) {
            lookup.emplace(ge->labels[j], ge->blup[j]);
        }
        std::vector<double> per_level(factor.labels.size());
        for (std::size_t j = 0; j < factor.labels.size(); ++j) {
            const auto it = lookup.find(factor.labels[j]);
            if (it == lookup.end()) {
                throw Error(ErrorKind::GroupUnseen,
                            "group '" + factor.labels[j] + "' of factor '" + factor.name + "' was not in the fit");
            }
            per_level[j] = it->second;
        }
        for (std::size_t r = 0; r < design.n(); ++r) {
            yhat(static_cast<Eigen::Index>(r)) += per_level[static_cast<std::size_t>(factor.ids[r])];
        }
    }
    return yhat;
}

/// Deviance of `design` at the log-variances of a fit (fixed effects profiled).
inline double profiled_deviance(const Design& design, const Eigen::VectorXd& log_variances) {
    ProfiledDeviance dev(design);
    return dev.deviance_log_variances(log_variances);
}

/// Central-difference gradient of the profiled deviance in log-variance space.
inline Eigen::VectorXd deviance_gradient_fd(const Design& design, const Eigen::VectorXd& log_variances,
                                            double step = 1e-5) {
    ProfiledDeviance dev(design);
    Eigen::VectorXd g(log_variances.size());
    for (Eigen::Index i = 0; i < log_variances.size(); ++i) {
        Eigen::VectorXd a = log_variances, b = log_variances;
        a(i) += step;
        b(i) -= step;
        g(i) = (dev.deviance_log_variances(a) - dev.deviance_log_variances(b)) / (2.0 * step);
    }
    return g;
}

} // namespace tempobeat::mlm
