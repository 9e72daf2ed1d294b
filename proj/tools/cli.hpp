#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace tempobeat::cli {

enum ExitCode : int { kOk = 0, kDataError = 1, kNotConverged = 2, kUsage = 3 };

struct Options {
    std::string subcommand;
    std::string config;
    std::string obs;
    std::string weather;
    std::string events;
    std::string data;
    std::string in;
    std::string out = ".";
    std::string model = "all";
    std::string axis = "all";
    std::string preset = "events";
    std::string fill_gaps;
    std::optional<double> k;
    std::size_t min_count = 4;
    std::uint64_t seed = 1;
    bool drop_anomalies = false;
};

/// Run record written next to the artifacts of every subcommand.
class Manifest {
public:
    void input(const fs::path& p);
    void output(const fs::path& p);
    void config(nlohmann::json c) { config_ = std::move(c); }

    template <class F>
    auto stage(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Done {
            Manifest* m;
            std::string name;
            std::chrono::steady_clock::time_point t0;
            ~Done() {
                const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                m->timings_.emplace_back(name, ms);
            }
        } done{this, name, t0};
        return f();
    }

    void write(const fs::path& dir, const std::string& subcommand) const;

private:
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
    nlohmann::json config_ = nlohmann::json::object();
};

std::string sha256_file(const fs::path& p);

int run_synth(const Options& o, Manifest& m);
int run_ingest(const Options& o, Manifest& m);
int run_acf(const Options& o, Manifest& m);
int run_fit(const Options& o, Manifest& m);
int run_rmsd(const Options& o, Manifest& m);
int run_recommend(const Options& o, Manifest& m);
int run_anomalies(const Options& o, Manifest& m);
int run_proxy(const Options& o, Manifest& m);
int run_report(const Options& o, Manifest& m);

} // namespace tempobeat::cli
