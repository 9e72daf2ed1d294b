#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "cli.hpp"
#include "tempobeat/tempobeat.hpp"

namespace tempobeat::cli {

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string sha256_file(const fs::path& p) {
    const std::string content = io::read_file(p.string());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Io, "cannot hash " + p.string());
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

void Manifest::input(const fs::path& p) { inputs_.emplace_back(p.string(), sha256_file(p)); }

void Manifest::output(const fs::path& p) { outputs_.emplace_back(p.filename().string(), sha256_file(p)); }

void Manifest::write(const fs::path& dir, const std::string& subcommand) const {
    nlohmann::json j;
    j["tool"] = "tempobeat";
    j["version"] = TEMPOBEAT_VERSION;
    j["subcommand"] = subcommand;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["created_utc"] = stamp;
    j["config"] = config_;
    auto list = [](const auto& v, const char* key) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& [path, digest] : v) a.push_back({{key, path}, {"sha256", digest}});
        return a;
    };
    j["inputs"] = list(inputs_, "path");
    j["outputs"] = list(outputs_, "file");
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [name, ms] : timings_) t.push_back({{"stage", name}, {"ms", ms}});
    j["timings"] = t;
    fs::create_directories(dir);
    io::write_file((dir / ("manifest-" + subcommand + ".json")).string(), j.dump(2) + "\n");
}

namespace {

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Runs `f` and prefixes any library error with the file it concerns.
template <class F>
auto from_file(const fs::path& p, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), p.string() + ": " + e.message(), e.line());
    }
}

void emit(Manifest& m, const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    io::write_file(path.string(), content);
    m.output(path);
}

std::ifstream open_input(const fs::path& p, Manifest& m) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
    m.input(p);
    return in;
}

IngestConfig load_config(const Options& o, Manifest& m) {
    IngestConfig cfg;
    if (!o.config.empty()) {
        auto in = open_input(o.config, m);
        cfg = from_file(o.config, [&] { return parse_config(in, cfg); });
    }
    if (!o.fill_gaps.empty()) cfg.fill_gaps = *parse_gap_policy(o.fill_gaps);
    if (o.k) cfg.anomaly_k = *o.k;
    return cfg;
}

AnalysisDataset load_dataset(const Options& o, Manifest& m) {
    if (!o.data.empty()) {
        const fs::path dir(o.data);
        m.input(dir / "meta.json");
        m.input(dir / "dataset.csv");
        return from_file(dir, [&] { return read_bundle(dir); });
    }
    if (o.obs.empty()) {
        throw Error(ErrorKind::InvalidConfig, "give a bundle with --data or raw inputs with --obs");
    }
    const auto cfg = load_config(o, m);
    auto obs_in = open_input(o.obs, m);
    const auto obs = from_file(o.obs, [&] { return parse_observations(obs_in); });
    std::optional<WeatherData> weather;
    if (!o.weather.empty()) {
        auto in = open_input(o.weather, m);
        weather = from_file(o.weather, [&] { return parse_weather(in, cfg.stations, cfg.weather_max_gap); });
    }
    std::vector<EventRow> events;
    if (!o.events.empty()) {
        auto in = open_input(o.events, m);
        events = from_file(o.events, [&] { return parse_events(in); });
    }
    return from_file(o.obs, [&] { return assemble_dataset(obs, weather, events, cfg); });
}

std::vector<std::string> selected_models(const std::string& model) {
    if (model == "all") return {"empty", "full", "restricted"};
    return {model};
}

mlm::ModelSpec spec_for(const std::string& tag, const AnalysisDataset& ds) {
    if (tag == "full") return mlm::ModelSpec::full(ds.covariates);
    if (tag == "restricted") return mlm::ModelSpec::restricted();
    return mlm::ModelSpec::empty();
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("TEMPOBEAT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<bool> anomaly_mask(const AnalysisDataset& ds, double k) {
    std::vector<bool> mask(ds.size(), false);
    for (std::size_t i = 0; i < ds.size(); ++i) mask[i] = std::abs(ds.y.z[i]) > k;
    return mask;
}

struct LoadedFit {
    StoredFit stored;
    std::optional<double> anomaly_k;
};

LoadedFit load_fit(const fs::path& p, Manifest& m) {
    m.input(p);
    return from_file(p, [&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_file(p.string()));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ParseError, e.what());
        }
        LoadedFit f{fit_from_json(j), std::nullopt};
        if (j.contains("excluded_anomalies_k") && !j["excluded_anomalies_k"].is_null()) {
            f.anomaly_k = j["excluded_anomalies_k"].get<double>();
        }
        return f;
    });
}

constexpr std::array<std::string_view, 3> kAxes{"weekday", "hour", "grid"};

std::vector<std::string> weekday_labels() { return {kWeekdayNames.begin(), kWeekdayNames.end()}; }

std::vector<std::string> hour_labels() {
    std::vector<std::string> out;
    for (int h = 0; h < 24; ++h) out.push_back(std::to_string(h));
    return out;
}

std::vector<double> slice_values(const RmsdSlice& s) {
    std::vector<double> v;
    for (const auto& c : s.cells) v.push_back(c.rmsd ? *c.rmsd : std::numeric_limits<double>::quiet_NaN());
    return v;
}

} // namespace

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_synth(const Options& o, Manifest& m) {
    synth::SynthConfig cfg;
    if (o.preset == "table1") {
        cfg = synth::table1_config(o.seed);
    } else if (o.preset == "weekly") {
        cfg = synth::weekly_config(o.seed);
    } else {
        cfg = synth::reference_config(o.seed);
    }
    const auto r = m.stage("generate", [&] { return synth::generate(cfg); });
    const auto files = synth::write_synth(r, cfg, o.out);
    for (const auto& f : files) m.output(f);
    std::cout << "generated " << r.dataset.size() << " hours (" << cfg.first.to_string() << " .. "
              << cfg.last.to_string() << "), seed " << cfg.seed << "\n";
    return kOk;
}

int run_ingest(const Options& o, Manifest& m) {
    const auto ds = m.stage("assemble", [&] { return load_dataset(o, m); });
    write_bundle(ds, o.out);
    m.output(fs::path(o.out) / "dataset.csv");
    m.output(fs::path(o.out) / "meta.json");
    std::cout << "bundle: " << ds.size() << " hours from " << ds.grid.start.to_string() << ", "
              << ds.covariates.names.size() << " covariates, " << ds.filled_hours.size() << " filled hours\n";
    return kOk;
}

int run_acf(const Options& o, Manifest& m) {
    const auto ds = load_dataset(o, m);
    const auto obs = ds.observations();
    const auto daily = m.stage("aggregate", [&] { return aggregate_daily(obs); });
    for (const auto& preset : correlogram_presets()) {
        const auto& y = preset.unit == LagUnit::Hour ? ds.y.z : daily.z;
        const int available = static_cast<int>(y.size()) - 1;
        int horizon = std::min(preset.horizon, available - available % preset.step);
        if (horizon < preset.step) {
            std::cerr << "warning: " << preset.name << " skipped, series too short\n";
            continue;
        }
        if (horizon < preset.horizon) {
            std::cerr << "warning: " << preset.name << " horizon clipped to " << horizon << "\n";
        }
        const auto series = m.stage(std::string(preset.name), [&] {
            return correlogram(y, preset.unit, preset.step, horizon);
        });
        const std::string base = "acf-" + std::string(preset.name);
        emit(m, fs::path(o.out) / (base + ".csv"), acf_csv(series));
        svg::Series s{"r", {}, series.r};
        for (int lag : series.lags) s.x.push_back(lag);
        emit(m, fs::path(o.out) / (base + ".svg"),
             svg::line_chart({s}, {"Autocorrelation, " + std::string(preset.name),
                                   "lag (" + std::string(to_string(preset.unit)) + "s)", "r"}));
    }
    return kOk;
}

int run_fit(const Options& o, Manifest& m) {
    const auto ds = load_dataset(o, m);
    std::vector<bool> mask;
    const double k = o.k.value_or(2.0);
    if (o.drop_anomalies) mask = anomaly_mask(ds, k);

    const auto tags = selected_models(o.model);
    std::vector<mlm::ModelSpec> specs;
    for (const auto& t : tags) specs.push_back(spec_for(t, ds));

    // independent fits, at most TEMPOBEAT_THREADS at a time
    const std::size_t cap = thread_cap();
    std::vector<mlm::ModelFit> fits(specs.size());
    auto work = [&](std::size_t i) {
        const auto design = mlm::build_design(ds, specs[i], o.drop_anomalies ? &mask : nullptr);
        fits[i] = mlm::fit_ml(design);
    };
    m.stage("fit", [&] {
        for (std::size_t start = 0; start < specs.size(); start += cap) {
            std::vector<std::future<void>> batch;
            for (std::size_t i = start; i < std::min(specs.size(), start + cap); ++i) {
                batch.push_back(std::async(cap == 1 ? std::launch::deferred : std::launch::async, work, i));
            }
            for (auto& f : batch) f.get();
        }
        return 0;
    });

    bool all_converged = true;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        auto j = fit_to_json(fits[i], specs[i]);
        j["excluded_anomalies_k"] = o.drop_anomalies ? nlohmann::json(k) : nlohmann::json(nullptr);
        emit(m, fs::path(o.out) / ("fit-" + tags[i] + ".json"), j.dump(2) + "\n");
        const auto& f = fits[i];
        std::cout << tags[i] << ": n=" << f.n_obs << " loglik=" << io::format_fixed(f.loglik, 2)
                  << " lr_chi2=" << io::format_fixed(f.lr_chi2_vs_linear, 2);
        for (const auto& c : f.components.items) {
            std::cout << " " << c.name << "=" << io::format_fixed(c.estimate, 4) << " ("
                      << io::format_fixed(100.0 * c.share, 1) << "%)";
        }
        std::cout << (f.converged ? "" : " NOT CONVERGED") << "\n";
        for (const auto& w : f.warnings) std::cerr << "warning (" << tags[i] << "): " << w << "\n";
        all_converged = all_converged && f.converged;
    }
    return all_converged ? kOk : kNotConverged;
}

int run_rmsd(const Options& o, Manifest& m) {
    const auto ds = load_dataset(o, m);
    std::vector<std::string> axes;
    if (o.axis == "all") {
        axes.assign(kAxes.begin(), kAxes.end());
    } else {
        axes.push_back(o.axis);
    }
    std::vector<RmsdReport> reports;
    for (const auto& tag : selected_models(o.model)) {
        const fs::path p = fs::path(o.in) / ("fit-" + tag + ".json");
        if (o.model == "all" && !fs::exists(p)) continue;
        const auto loaded = load_fit(p, m);
        std::vector<bool> mask;
        if (loaded.anomaly_k) mask = anomaly_mask(ds, *loaded.anomaly_k);
        const auto design = mlm::build_design(ds, loaded.stored.spec, loaded.anomaly_k ? &mask : nullptr);
        const Eigen::VectorXd yhat = mlm::predict_conditional(loaded.stored.fit, design);
        std::vector<double> obs(design.n());
        std::vector<double> pred(design.n());
        std::vector<CalendarKey> keys(design.n());
        for (std::size_t r = 0; r < design.n(); ++r) {
            obs[r] = design.y(static_cast<Eigen::Index>(r));
            pred[r] = yhat(static_cast<Eigen::Index>(r));
            keys[r] = ds.keys[design.rows[r]];
        }
        reports.push_back(rmsd_report(tag, obs, pred, keys));
    }
    if (reports.empty()) throw Error(ErrorKind::EmptyInput, "no fit-*.json found in " + o.in);

    std::string overall = "model,rmsd,n\n";
    for (const auto& r : reports) {
        overall += r.model_tag + "," + io::format_double(r.overall) + "," + std::to_string(r.n) + "\n";
        for (const auto& axis : axes) {
            const auto& slice = axis == "weekday" ? r.by_weekday : axis == "hour" ? r.by_hour : r.by_weekday_hour;
            emit(m, fs::path(o.out) / ("rmsd-" + r.model_tag + "-" + axis + ".csv"), rmsd_csv(slice));
        }
    }
    emit(m, fs::path(o.out) / "rmsd-overall.csv", overall);

    for (const auto& axis : axes) {
        if (axis == "grid") {
            // one heatmap per model: weekday rows, hour columns
            for (const auto& r : reports) {
                std::vector<std::vector<double>> grid(7, std::vector<double>(24));
                const auto v = slice_values(r.by_weekday_hour);
                for (std::size_t c = 0; c < 168; ++c) grid[c / 24][c % 24] = v[c];
                emit(m, fs::path(o.out) / ("rmsd-" + r.model_tag + "-grid.svg"),
                     svg::heatmap(weekday_labels(), hour_labels(), grid,
                                  {"RMSD by weekday and hour, " + r.model_tag + " model", "hour of day", ""}));
            }
            continue;
        }
        std::vector<svg::Series> series;
        for (const auto& r : reports) {
            series.push_back({r.model_tag, {}, slice_values(axis == "weekday" ? r.by_weekday : r.by_hour)});
        }
        emit(m, fs::path(o.out) / ("rmsd-" + axis + ".svg"),
             svg::bar_chart(axis == "weekday" ? weekday_labels() : hour_labels(), series,
                            {"RMSD by " + axis, axis == "weekday" ? "weekday (daily means)" : "hour of day", "RMSD"}));
    }
    for (const auto& r : reports) {
        std::cout << r.model_tag << ": RMSD " << io::format_fixed(r.overall, 4) << " over " << r.n << " hours\n";
    }
    return kOk;
}

int run_recommend(const Options& o, Manifest& m) {
    std::vector<RmsdReport> reports;
    for (const auto& tag : selected_models(o.model)) {
        RmsdReport r;
        r.model_tag = tag;
        bool found = true;
        for (auto axis : kAxes) {
            const fs::path p = fs::path(o.in) / ("rmsd-" + tag + "-" + std::string(axis) + ".csv");
            if (!fs::exists(p)) {
                found = false;
                break;
            }
            m.input(p);
            auto slice = from_file(p, [&] { return parse_rmsd_csv(io::read_file(p.string())); });
            (axis == "weekday" ? r.by_weekday : axis == "hour" ? r.by_hour : r.by_weekday_hour) = std::move(slice);
        }
        if (!found) {
            if (o.model != "all") {
                throw Error(ErrorKind::EmptyInput, "missing RMSD tables for model '" + tag + "' in " + o.in);
            }
            continue;
        }
        reports.push_back(std::move(r));
    }
    const auto rec = recommend(reports, o.min_count);
    emit(m, fs::path(o.out) / "recommendation.json", recommendation_to_json(rec, o.min_count).dump(2) + "\n");

    std::cout << "models:";
    for (const auto& t : rec.models) std::cout << " " << t;
    std::cout << "\nrank  weekday  hour  rmsd    count\n";
    const std::size_t shown = std::min<std::size_t>(rec.ranked.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& s = rec.ranked[i];
        char line[80];
        std::snprintf(line, sizeof line, "%4zu  %-7s  %02d    %.4f  %zu\n", i + 1,
                      std::string(to_string(s.weekday)).c_str(), s.hour, s.rmsd, s.count);
        std::cout << line;
    }
    std::cout << "best weekday: " << to_string(rec.best_weekday) << ", best hour: " << rec.best_hour << "\n";
    return kOk;
}

int run_anomalies(const Options& o, Manifest& m) {
    const auto ds = load_dataset(o, m);
    double k = o.k.value_or(2.0);
    if (!o.k && !o.config.empty()) k = load_config(o, m).anomaly_k;
    const auto flagged = flag_anomalies(ds.y, k);
    std::string csv = "timestamp,z\n";
    for (const auto& a : flagged) csv += a.stamp.to_string() + "," + io::format_double(a.z) + "\n";
    emit(m, fs::path(o.out) / "anomalies.csv", csv);
    std::cout << flagged.size() << " of " << ds.size() << " hours have |z| > " << io::format_double(k) << "\n";
    return kOk;
}

int run_proxy(const Options& o, Manifest& m) {
    std::vector<double> sizes;
    std::vector<double> counts;
    if (!o.data.empty()) {
        const auto ds = load_dataset(o, m);
        sizes = ds.values;
        counts = ds.row_counts;
    } else if (!o.obs.empty()) {
        auto in = open_input(o.obs, m);
        for (const auto& ob : from_file(o.obs, [&] { return parse_observations(in); })) {
            sizes.push_back(ob.value);
            if (ob.row_count) counts.push_back(*ob.row_count);
        }
    } else {
        throw Error(ErrorKind::InvalidConfig, "give a bundle with --data or observations with --obs");
    }
    if (counts.size() != sizes.size()) {
        throw Error(ErrorKind::LengthMismatch, "observations need a row_count on every row");
    }
    const double r2 = proxy_r2(sizes, counts);
    std::cout << "proxy_r2 = " << io::format_fixed(r2, 6) << "\n";
    return kOk;
}

} // namespace tempobeat::cli
