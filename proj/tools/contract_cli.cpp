// Command-line front end: solve the (g,k) surfaces, simulate contract
// trajectories, cross-check the PDE against its Feynman-Kac representation,
// or run the full verification battery.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "contract/commands.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config out_dir)");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&opts](std::uint64_t s) { opts.seed = s; }, "seed override");
}

contract::RunConfig load(const CommonOptions& opts) {
    contract::RunConfig cfg = contract::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed) cfg.sim.seed = *opts.seed;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Principal-agent contract solver and simulator"};
    app.require_subcommand(1);

    CommonOptions solve_opts, sim_opts, fk_opts, verify_opts;
    std::string surface_file;

    auto* solve = app.add_subcommand("solve", "solve the (g,k) surfaces and export them");
    add_common(solve, solve_opts);
    auto* simulate = app.add_subcommand("simulate", "simulate contract trajectories");
    add_common(simulate, sim_opts);
    auto* fk = app.add_subcommand("fk-check", "compare the PDE solution with Monte Carlo");
    add_common(fk, fk_opts);
    auto* verify = app.add_subcommand("verify", "run the full property battery");
    add_common(verify, verify_opts);
    verify->add_option("--surface", surface_file,
                       "verify a previously exported surfaces.csv instead of re-solving");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return contract::cmd_solve(load(solve_opts));
        if (simulate->parsed()) return contract::cmd_simulate(load(sim_opts));
        if (fk->parsed()) return contract::cmd_fk_check(load(fk_opts));
        if (verify->parsed()) {
            std::optional<std::filesystem::path> surface;
            if (!surface_file.empty()) surface = surface_file;
            return contract::cmd_verify(load(verify_opts), surface);
        }
    } catch (const contract::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return contract::exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return contract::exit_numerical_error;
    }
    return contract::exit_config_error;
}
