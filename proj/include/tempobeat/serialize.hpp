#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tempobeat/error.hpp"
#include "tempobeat/mlm.hpp"
#include "tempobeat/rmsd.hpp"

namespace tempobeat {

namespace detail {

// JSON has no NaN; boundary standard errors are written as null.
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double number_or_nan(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace detail

/// ModelFit plus the model specification that produced it.
inline nlohmann::json fit_to_json(const mlm::ModelFit& fit, const mlm::ModelSpec& spec) {
    using nlohmann::json;
    json coefs = json::array();
    for (const auto& b : fit.beta) {
        coefs.push_back({{"name", b.name},
                         {"coef", b.coef},
                         {"se", detail::number_or_null(b.se)},
                         {"z", detail::number_or_null(b.z)},
                         {"p", detail::number_or_null(b.p)},
                         {"ci", {detail::number_or_null(b.ci95[0]), detail::number_or_null(b.ci95[1])}}});
    }
    json comps = json::array();
    for (const auto& c : fit.components.items) {
        comps.push_back({{"name", c.name},
                         {"variance", c.estimate},
                         {"se", detail::number_or_null(c.se)},
                         {"share", c.share},
                         {"ci", {detail::number_or_null(c.ci[0]), detail::number_or_null(c.ci[1])}},
                         {"at_boundary", c.at_boundary}});
    }
    json blups = json::object();
    for (const auto& g : fit.blups) {
        json m = json::object();
        for (std::size_t i = 0; i < g.labels.size(); ++i) m[g.labels[i]] = g.blup[i];
        blups[g.factor] = m;
    }
    return json{{"model", spec.tag},
                {"restriction", spec.restriction == mlm::Restriction::ExcludeEventDays ? "exclude_event_days" : "none"},
                {"fixed_effects", spec.fixed_effects},
                {"n_obs", fit.n_obs},
                {"converged", fit.converged},
                {"iterations", fit.iterations},
                {"loglik", fit.loglik},
                {"loglik_linear", fit.loglik_linear},
                {"lr_chi2", fit.lr_chi2_vs_linear},
                {"coef", coefs},
                {"components", comps},
                {"blups", blups},
                {"warnings", fit.warnings}};
}

struct StoredFit {
    mlm::ModelFit fit;
    mlm::ModelSpec spec;
};

inline StoredFit fit_from_json(const nlohmann::json& j) {
    StoredFit s;
    try {
        auto& f = s.fit;
        f.tag = j.at("model").get<std::string>();
        s.spec.tag = f.tag;
        s.spec.fixed_effects = j.at("fixed_effects").get<std::vector<std::string>>();
        s.spec.restriction = j.at("restriction").get<std::string>() == "exclude_event_days"
                                 ? mlm::Restriction::ExcludeEventDays
                                 : mlm::Restriction::None;
        f.n_obs = j.at("n_obs").get<std::size_t>();
        f.converged = j.at("converged").get<bool>();
        f.iterations = j.at("iterations").get<int>();
        f.loglik = j.at("loglik").get<double>();
        f.loglik_linear = j.at("loglik_linear").get<double>();
        f.lr_chi2_vs_linear = j.at("lr_chi2").get<double>();
        for (const auto& b : j.at("coef")) {
            mlm::FixedEffectEstimate e;
            e.name = b.at("name").get<std::string>();
            e.coef = b.at("coef").get<double>();
            e.se = detail::number_or_nan(b.at("se"));
            e.z = detail::number_or_nan(b.at("z"));
            e.p = detail::number_or_nan(b.at("p"));
            e.ci95 = {detail::number_or_nan(b.at("ci")[0]), detail::number_or_nan(b.at("ci")[1])};
            f.beta.push_back(e);
        }
        for (const auto& c : j.at("components")) {
            mlm::VarianceComponent v;
            v.name = c.at("name").get<std::string>();
            v.estimate = c.at("variance").get<double>();
            v.se = detail::number_or_nan(c.at("se"));
            v.share = c.at("share").get<double>();
            v.ci = {detail::number_or_nan(c.at("ci")[0]), detail::number_or_nan(c.at("ci")[1])};
            v.at_boundary = c.at("at_boundary").get<bool>();
            f.components.items.push_back(v);
        }
        for (const auto& [factor, m] : j.at("blups").items()) {
            mlm::GroupEffects g;
            g.factor = factor;
            for (const auto& [label, v] : m.items()) {
                g.labels.push_back(label);
                g.blup.push_back(v.get<double>());
            }
            f.blups.push_back(std::move(g));
        }
        f.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("model fit JSON: ") + e.what());
    }
    return s;
}

inline nlohmann::json recommendation_to_json(const Recommendation& r, std::size_t min_count) {
    using nlohmann::json;
    json ranked = json::array();
    for (const auto& s : r.ranked) {
        ranked.push_back({{"weekday", to_string(s.weekday)}, {"hour", s.hour}, {"rmsd", s.rmsd}, {"count", s.count}});
    }
    return json{{"models", r.models},
                {"min_count", min_count},
                {"best_weekday", to_string(r.best_weekday)},
                {"best_hour", r.best_hour},
                {"ranked", ranked}};
}

} // namespace tempobeat
