#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "tempobeat/tempobeat.hpp"

namespace tempobeat::cli {

namespace {

std::string esc(const std::string& s) { return svg::detail::escape(s); }

std::string fmt(double v, int digits = 4) {
    return std::isfinite(v) ? io::format_fixed(v, digits) : std::string("&ndash;");
}

struct Artifacts {
    fs::path dir;
    Manifest* m;

    [[nodiscard]] std::optional<std::string> read(const std::string& name) const {
        const auto p = dir / name;
        if (!fs::exists(p)) return std::nullopt;
        m->input(p);
        return io::read_file(p.string());
    }
};

std::optional<AcfSeries> load_acf(const Artifacts& a, const CorrelogramPreset& preset) {
    const auto text = a.read("acf-" + std::string(preset.name) + ".csv");
    if (!text) return std::nullopt;
    std::istringstream in(*text);
    const auto lines = io::read_lines(in);
    AcfSeries s;
    s.lag_unit = preset.unit;
    s.lag_step = preset.step;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = io::split(lines[i].text);
        if (f.size() != 2) throw Error(ErrorKind::ParseError, "acf table needs lag,r", lines[i].number);
        s.lags.push_back(static_cast<int>(io::parse_double(f[0], lines[i].number, "lag")));
        s.r.push_back(io::parse_double(f[1], lines[i].number, "r"));
    }
    return s;
}

std::string components_table(const mlm::ModelFit& f) {
    std::string out = "<table><tr><th>Component</th><th>Variance</th><th>SE</th><th>95% CI</th>"
                      "<th>% variation</th><th>% cumulative</th></tr>\n";
    double cumulative = 0.0;
    for (const auto& c : f.components.items) {
        cumulative += 100.0 * c.share;
        out += "<tr><td>" + esc(c.name) + "</td><td>" + fmt(c.estimate) + "</td><td>" + fmt(c.se) + "</td><td>" +
               (c.at_boundary ? std::string("at boundary") : "[" + fmt(c.ci[0]) + ", " + fmt(c.ci[1]) + "]") +
               "</td><td>" + fmt(100.0 * c.share, 1) + "</td><td>" + fmt(cumulative, 1) + "</td></tr>\n";
    }
    out += "</table>\n<p>Log-likelihood " + fmt(f.loglik, 2) + "; LR test vs. linear model &chi;&sup2; = " +
           fmt(f.lr_chi2_vs_linear, 2) + "; N = " + std::to_string(f.n_obs) +
           (f.converged ? "" : "; <strong>not converged</strong>") + "</p>\n";
    return out;
}

std::string coefficient_table(const mlm::ModelFit& f) {
    std::string out = "<table><tr><th>Effect</th><th>Coef.</th><th>SE</th><th>z</th><th>P</th><th>95% CI</th></tr>\n";
    for (const auto& b : f.beta) {
        out += "<tr><td>" + esc(b.name) + "</td><td>" + fmt(b.coef) + "</td><td>" + fmt(b.se) + "</td><td>" +
               fmt(b.z, 2) + "</td><td>" + fmt(b.p, 3) + "</td><td>[" + fmt(b.ci95[0]) + ", " + fmt(b.ci95[1]) +
               "]</td></tr>\n";
    }
    return out + "</table>\n";
}

} // namespace

int run_report(const Options& o, Manifest& m) {
    const Artifacts a{o.in, &m};
    std::string body;
    int sections = 0;

    // correlograms
    std::string acf_html;
    for (const auto& preset : correlogram_presets()) {
        const auto s = load_acf(a, preset);
        if (!s) continue;
        svg::Series series{"r", {}, s->r};
        for (int lag : s->lags) series.x.push_back(lag);
        acf_html += svg::line_chart({series}, {std::string(preset.name),
                                               "lag (" + std::string(to_string(preset.unit)) + "s)", "r", 480, 280});
    }
    if (!acf_html.empty()) {
        body += "<h2>Autocorrelation</h2>\n<div class=\"grid\">" + acf_html + "</div>\n";
        ++sections;
    }

    // model tables
    const std::vector<std::pair<std::string, std::string>> models{
        {"empty", "Empty model"}, {"full", "Full model (events and weather)"}, {"restricted", "Restricted model (days without events)"}};
    for (const auto& [tag, title] : models) {
        const auto text = a.read("fit-" + tag + ".json");
        if (!text) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(*text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ParseError, "fit-" + tag + ".json: " + e.what());
        }
        const auto stored = fit_from_json(j);
        body += "<h2>" + esc(title) + "</h2>\n" + components_table(stored.fit);
        if (stored.fit.beta.size() > 1) body += coefficient_table(stored.fit);
        ++sections;
    }

    // deviations
    std::vector<svg::Series> by_weekday;
    std::vector<svg::Series> by_hour;
    std::string grids;
    for (const auto& [tag, title] : models) {
        if (const auto t = a.read("rmsd-" + tag + "-weekday.csv")) {
            svg::Series s{tag, {}, {}};
            for (const auto& c : parse_rmsd_csv(*t).cells) s.y.push_back(c.rmsd.value_or(NAN));
            by_weekday.push_back(std::move(s));
        }
        if (const auto t = a.read("rmsd-" + tag + "-hour.csv")) {
            svg::Series s{tag, {}, {}};
            for (const auto& c : parse_rmsd_csv(*t).cells) {
                s.x.push_back(c.hour);
                s.y.push_back(c.rmsd.value_or(NAN));
            }
            by_hour.push_back(std::move(s));
        }
        if (const auto t = a.read("rmsd-" + tag + "-grid.csv")) {
            std::vector<std::vector<double>> g(7, std::vector<double>(24, NAN));
            for (const auto& c : parse_rmsd_csv(*t).cells) {
                g[static_cast<std::size_t>(c.weekday)][static_cast<std::size_t>(c.hour)] = c.rmsd.value_or(NAN);
            }
            std::vector<std::string> rows(kWeekdayNames.begin(), kWeekdayNames.end());
            std::vector<std::string> cols;
            for (int h = 0; h < 24; ++h) cols.push_back(std::to_string(h));
            grids += svg::heatmap(rows, cols, g, {tag + " model", "hour of day", "", 480, 240});
        }
    }
    if (!by_weekday.empty() || !by_hour.empty()) {
        body += "<h2>Deviation between observed and predicted activity</h2>\n";
        if (const auto t = a.read("rmsd-overall.csv")) {
            body += "<table><tr><th>Model</th><th>RMSD</th><th>Hours</th></tr>\n";
            std::istringstream in(*t);
            const auto lines = io::read_lines(in);
            for (std::size_t i = 1; i < lines.size(); ++i) {
                const auto f = io::split(lines[i].text);
                if (f.size() != 3) continue;
                body += "<tr><td>" + esc(std::string(f[0])) + "</td><td>" +
                        fmt(io::parse_double(f[1], lines[i].number, "rmsd")) + "</td><td>" + std::string(f[2]) +
                        "</td></tr>\n";
            }
            body += "</table>\n";
        }
        if (!by_weekday.empty()) {
            std::vector<std::string> labels(kWeekdayNames.begin(), kWeekdayNames.end());
            body += svg::bar_chart(labels, by_weekday, {"RMSD by weekday (daily means)", "weekday", "RMSD"});
        }
        if (!by_hour.empty()) {
            body += svg::line_chart(by_hour, {"RMSD by hour of day", "hour", "RMSD"});
        }
        if (!grids.empty()) body += "<h3>By weekday and hour</h3>\n<div class=\"grid\">" + grids + "</div>\n";
        ++sections;
    }

    if (const auto t = a.read("recommendation.json")) {
        const auto j = nlohmann::json::parse(*t);
        body += "<h2>Recommended sampling slot</h2>\n<p>Most representative weekday: <strong>" +
                esc(j.at("best_weekday").get<std::string>()) + "</strong>; hour: <strong>" +
                std::to_string(j.at("best_hour").get<int>()) + ":00</strong>.</p>\n";
        body += "<table><tr><th>Rank</th><th>Weekday</th><th>Hour</th><th>RMSD</th><th>Count</th></tr>\n";
        int rank = 0;
        for (const auto& s : j.at("ranked")) {
            if (++rank > 10) break;
            body += "<tr><td>" + std::to_string(rank) + "</td><td>" + esc(s.at("weekday").get<std::string>()) +
                    "</td><td>" + std::to_string(s.at("hour").get<int>()) + "</td><td>" +
                    fmt(s.at("rmsd").get<double>()) + "</td><td>" + std::to_string(s.at("count").get<int>()) +
                    "</td></tr>\n";
        }
        body += "</table>\n";
        ++sections;
    }

    if (const auto t = a.read("anomalies.csv")) {
        std::istringstream in(*t);
        const auto lines = io::read_lines(in);
        body += "<h2>Screened hours</h2>\n<p>" + std::to_string(lines.empty() ? 0 : lines.size() - 1) +
                " hours exceed the anomaly threshold.</p>\n";
        ++sections;
    }

    if (sections == 0) {
        throw Error(ErrorKind::EmptyInput, "no artifacts to report in " + a.dir.string());
    }
    const std::string html =
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>tempobeat report</title>\n"
        "<style>body{font-family:sans-serif;max-width:1000px;margin:2em auto}"
        "table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #ccc;padding:2px 8px;text-align:right}"
        "td:first-child,th:first-child{text-align:left}.grid{display:flex;flex-wrap:wrap;gap:8px}</style>\n"
        "</head>\n<body>\n<h1>Hourly activity report</h1>\n" +
        body + "</body>\n</html>\n";
    fs::create_directories(o.out);
    const auto path = fs::path(o.out) / "report.html";
    io::write_file(path.string(), html);
    m.output(path);
    std::cout << "wrote " << path.string() << "\n";
    return kOk;
}

} // namespace tempobeat::cli
