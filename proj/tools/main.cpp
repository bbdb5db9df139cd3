#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "experiments.hpp"

using namespace eqr::tools;

namespace {

std::string output_dir(const ExperimentConfig& cfg, const std::string& flag)
{
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("EQRECIP_OUTPUT_DIR"); env && *env) {
        return env;
    }
    return cfg.output.empty() ? "." : cfg.output;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Equal-reciprocal D2D sharing: closed forms, LP policies, simulation and scheduling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", EQRECIP_VERSION);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run an experiment config, write <name>.csv and <name>.json");
    run->add_option("config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory (default: EQRECIP_OUTPUT_DIR, then the config's output)");
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--trials", trials, "override the Monte Carlo trial count");
    run->add_flag("-q,--quiet", quiet, "print nothing on success");

    auto* check = app.add_subcommand("validate", "check a config without running it");
    check->add_option("config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);

    auto* list = app.add_subcommand("list-experiments", "list the experiment kinds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (ExperimentKind k : all_kinds()) {
                std::cout << to_string(k) << "\t" << describe(k) << "\n";
            }
            return 0;
        }
        ExperimentConfig cfg = load_config(config_path);
        if (check->parsed()) {
            std::cout << "ok\n";
            return 0;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (trials) {
            cfg.trials = *trials;
        }
        const ExperimentResult result = run_experiment(cfg);
        const std::string path = write_result(cfg, result, output_dir(cfg, out_dir));
        if (!quiet) {
            std::cout << "wrote " << path << " (" << result.summary["metrics"]["rows"].get<std::size_t>()
                      << " rows)\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
