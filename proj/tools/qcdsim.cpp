#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qcd/error.hpp"
#include "qcd/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quickest change detection simulator: CuSum, CuSum-AC and random transmission"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> reps;
    std::string out_dir = "out";
    std::size_t threads = 0;
    std::string figure;

    auto* config_opt = app.add_option("--config", config_path, "experiment config (INI)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "top-level seed, overrides the config");
    app.add_option("--reps", reps, "replications per estimate, overrides n_reps")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
    app.add_option("--reproduce", figure, "run a canned figure")
        ->check(CLI::IsMember({"fig4", "fig5", "fig6"}))
        ->excludes(config_opt);
    CLI11_PARSE(app, argc, argv);

    try {
        if (threads) qcd::set_thread_count(threads);
        qcd::RunConfig config;
        if (!figure.empty()) {
            config = qcd::reproduce_config(figure, seed.value_or(1), reps.value_or(2000));
        } else if (!config_path.empty()) {
            config = qcd::load_config(config_path);
        } else {
            std::cerr << "nothing to do: pass --config or --reproduce\n" << app.help();
            return 2;
        }
        if (seed) config.seed = seed;
        if (reps) {
            for (auto& e : config.experiments) e.n_reps = *reps;
        }
        for (const auto& path : qcd::run(config, out_dir)) std::cout << path.string() << "\n";
        return 0;
    } catch (const qcd::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
