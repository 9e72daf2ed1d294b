#include <cstdio>
#include <exception>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cli.hpp"
#include "tempobeat/error.hpp"

using namespace tempobeat;
using namespace tempobeat::cli;

namespace {

nlohmann::json snapshot(const Options& o) {
    nlohmann::json j{{"out", o.out}, {"model", o.model}, {"axis", o.axis}, {"min_count", o.min_count},
                     {"seed", o.seed}, {"drop_anomalies", o.drop_anomalies}};
    for (const auto& [key, value] : std::map<std::string, std::string>{{"config", o.config},
                                                                       {"obs", o.obs},
                                                                       {"weather", o.weather},
                                                                       {"events", o.events},
                                                                       {"data", o.data},
                                                                       {"in", o.in},
                                                                       {"fill_gaps", o.fill_gaps}}) {
        if (!value.empty()) j[key] = value;
    }
    if (o.k) j["k"] = *o.k;
    if (o.subcommand == "synth") j["preset"] = o.preset;
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hourly activity representativeness toolkit", "tempobeat"};
    app.set_version_flag("--version", TEMPOBEAT_VERSION);
    app.require_subcommand(1, 1);
    Options o;

    auto add_out = [&](CLI::App* s) { s->add_option("--out", o.out, "Output directory")->capture_default_str(); };
    auto add_data = [&](CLI::App* s, bool required) {
        auto* opt = s->add_option("--data", o.data, "Dataset bundle directory written by `ingest`");
        if (required) opt->required();
    };
    auto add_raw = [&](CLI::App* s) {
        s->add_option("--obs", o.obs, "Observations CSV (timestamp,size_bytes[,row_count])");
        s->add_option("--weather", o.weather, "Weather CSV (timestamp,station,air_temp_c,precip_mm)");
        s->add_option("--events", o.events, "Events CSV (start,end,category,all_day)");
        s->add_option("--config", o.config, "key = value configuration file; flags override it");
        s->add_option("--fill-gaps", o.fill_gaps, "Observation gap policy")
            ->check(CLI::IsMember({"zero", "interpolate", "error"}));
    };
    auto add_model = [&](CLI::App* s) {
        s->add_option("--model", o.model, "Model(s)")
            ->check(CLI::IsMember({"empty", "full", "restricted", "all"}))
            ->capture_default_str();
    };
    auto add_in = [&](CLI::App* s) {
        s->add_option("--in", o.in, "Directory holding earlier artifacts (default: --out)");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known truth");
    synth->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
    synth->add_option("--preset", o.preset, "Generator configuration")
        ->check(CLI::IsMember({"table1", "events", "weekly"}))
        ->capture_default_str();
    add_out(synth);

    auto* ingest = app.add_subcommand("ingest", "Validate inputs and write a dataset bundle");
    add_raw(ingest);
    ingest->get_option("--obs")->required();
    add_out(ingest);

    auto* acf = app.add_subcommand("acf", "Correlograms for the four lag presets");
    add_data(acf, true);
    add_out(acf);

    auto* fit = app.add_subcommand("fit", "Fit the empty, full and restricted mixed models");
    add_data(fit, false);
    add_raw(fit);
    add_model(fit);
    fit->add_flag("--drop-anomalies", o.drop_anomalies, "Exclude hours with |z| > k from the fit");
    fit->add_option("--k", o.k, "Anomaly threshold in z units");
    add_out(fit);

    auto* rmsd = app.add_subcommand("rmsd", "RMSD of conditional predictions by weekday, hour and both");
    add_data(rmsd, true);
    add_in(rmsd);
    add_model(rmsd);
    rmsd->add_option("--axis", o.axis, "Decomposition axis")
        ->check(CLI::IsMember({"weekday", "hour", "grid", "all"}))
        ->capture_default_str();
    add_out(rmsd);

    auto* recommend = app.add_subcommand("recommend", "Rank weekday-hour slots by RMSD");
    add_in(recommend);
    add_model(recommend);
    recommend->add_option("--min-count", o.min_count, "Minimum rows per slot")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_out(recommend);

    auto* anomalies = app.add_subcommand("anomalies", "List hours with |z| > k");
    add_data(anomalies, true);
    anomalies->add_option("--k", o.k, "Threshold in z units (default 2)");
    anomalies->add_option("--config", o.config, "key = value configuration file");
    add_out(anomalies);

    auto* proxy = app.add_subcommand("proxy", "R^2 between file sizes and row counts");
    add_data(proxy, false);
    proxy->add_option("--obs", o.obs, "Observations CSV with a row_count column");
    add_out(proxy);

    auto* report = app.add_subcommand("report", "Self-contained HTML report from earlier artifacts");
    add_in(report);
    add_out(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    o.subcommand = app.get_subcommands().front()->get_name();
    if (o.in.empty()) o.in = o.out;

    Manifest manifest;
    manifest.config(snapshot(o));
    int rc = kOk;
    try {
        const std::map<std::string, int (*)(const Options&, Manifest&)> handlers{
            {"synth", run_synth},     {"ingest", run_ingest},       {"acf", run_acf},
            {"fit", run_fit},         {"rmsd", run_rmsd},           {"recommend", run_recommend},
            {"anomalies", run_anomalies}, {"proxy", run_proxy},     {"report", run_report}};
        rc = handlers.at(o.subcommand)(o, manifest);
        manifest.write(o.out, o.subcommand);
    } catch (const Error& e) {
        std::cerr << "tempobeat " << o.subcommand << ": " << e.what() << "\n";
        return e.kind() == ErrorKind::InvalidConfig ? kUsage : kDataError;
    } catch (const std::exception& e) {
        std::cerr << "tempobeat " << o.subcommand << ": " << e.what() << "\n";
        return kDataError;
    }
    return rc;
}
