#pragma once

// Orchestration of the solve / simulate / fk-check / verify workflows. The
// only module with side effects: everything below writes files into the
// configured output directory, with a manifest emitted last and partial
// outputs removed if a command dies midway.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 numerical failure (mapped by the CLI from thrown exceptions).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "contract/config.hpp"
#include "contract/hjb.hpp"
#include "contract/incentives.hpp"
#include "contract/io.hpp"
#include "contract/simulate.hpp"

namespace contract {

inline constexpr int exit_ok = 0;
inline constexpr int exit_check_failed = 1;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_numerical_error = 3;

inline constexpr double fk_node_tolerance_floor = 5e-3; // added to 3 SE per node
inline constexpr double bsde_residual_threshold = 1e-9;
inline constexpr double gamma_consistency_threshold = 1e-10;

namespace detail {

template <typename Fn>
int with_tracked_outputs(const RunConfig& cfg, Fn&& body) {
    OutputTracker out(cfg.out_dir);
    try {
        write_effective_config(cfg, out.target("effective_config.txt"));
        const int status = body(out);
        out.write_manifest();
        return status;
    } catch (...) {
        out.remove_partial_outputs();
        throw;
    }
}

} // namespace detail

inline int cmd_solve(const RunConfig& cfg) {
    return detail::with_tracked_outputs(cfg, [&](OutputTracker& out) {
        const GridSolution sol = solve_backward(cfg.params, cfg.grid);
        write_surface_csv(sol, out.target("surfaces.csv"));
        return exit_ok;
    });
}

inline int cmd_simulate(const RunConfig& cfg) {
    return detail::with_tracked_outputs(cfg, [&](OutputTracker& out) {
        const GridSolution sol = solve_backward(cfg.params, cfg.grid);
        for (std::size_t i = 0; i < cfg.sim.export_paths; ++i) {
            const SimPath path =
                simulate_contract(cfg.params, sol, cfg.sim.v0, cfg.sim.n_steps,
                                  mix_seed(cfg.sim.seed, i));
            char name[32];
            std::snprintf(name, sizeof name, "path_%03zu.csv", i);
            write_path_csv(path, out.target(name));
        }
        return exit_ok;
    });
}

// Node-by-node PDE-vs-Monte-Carlo comparison at random interior nodes.
inline int cmd_fk_check(const RunConfig& cfg) {
    return detail::with_tracked_outputs(cfg, [&](OutputTracker& out) {
        const GridSolution sol = solve_backward(cfg.params, cfg.grid);
        auto rng = make_path_rng(cfg.sim.seed, 0xFCULL);
        std::uniform_int_distribution<std::size_t> pick_i(1, sol.n_time() - 1);
        std::uniform_int_distribution<std::size_t> pick_j(1, sol.n_eta() - 2);

        std::vector<FkCheckRow> rows;
        bool all_pass = true;
        for (std::size_t n = 0; n < cfg.sim.fk_nodes; ++n) {
            const std::size_t i = pick_i(rng);
            const std::size_t j = pick_j(rng);
            const auto fk = feynman_kac_g(sol.time[i], sol.eta[j], sol, cfg.sim.n_paths,
                                          mix_seed(cfg.sim.seed, 100 + n), cfg.params);
            FkCheckRow row;
            row.t = sol.time[i];
            row.eta = sol.eta[j];
            row.g_pde = sol.g_node(i, j);
            row.g_mc = fk.estimate.mean;
            row.se = fk.estimate.standard_error;
            row.tolerance = 3.0 * row.se + fk_node_tolerance_floor;
            row.pass = std::fabs(row.g_pde - row.g_mc) <= row.tolerance;
            all_pass = all_pass && row.pass;
            rows.push_back(row);
        }
        write_fk_check_csv(rows, out.target("fk_check.csv"));
        return all_pass ? exit_ok : exit_check_failed;
    });
}

// Full property battery against a solved (or supplied) surface.
inline int cmd_verify(const RunConfig& cfg,
                      const std::optional<std::filesystem::path>& surface_file = {}) {
    return detail::with_tracked_outputs(cfg, [&](OutputTracker& out) {
        const GridSolution sol = surface_file
                                     ? load_surface_csv(cfg.params, cfg.grid, *surface_file)
                                     : solve_backward(cfg.params, cfg.grid);
        ReportLines lines;
        bool all_pass = true;
        auto add_flag = [&](const std::string& key, bool ok) {
            lines.emplace_back(key, ok ? "pass" : "FAIL");
            all_pass = all_pass && ok;
        };

        // Terminal condition must hold bit-exactly.
        {
            bool exact = true;
            for (std::size_t j = 0; j < sol.n_eta(); ++j)
                exact = exact && sol.g_node(sol.n_time(), j) == sol.terminal_g();
            lines.emplace_back("terminal.g_target", fmt17(sol.terminal_g()));
            add_flag("terminal.pass", exact);
        }

        // Full-effort corner.
        {
            const auto corner = corner_check_batch(sol, cfg.params, cfg.sim.corner_probes,
                                                   cfg.sim.effort_samples,
                                                   mix_seed(cfg.sim.seed, 1));
            lines.emplace_back("corner.probes", std::to_string(corner.n_probes));
            lines.emplace_back("corner.violations", std::to_string(corner.violations.size()));
            add_flag("corner.pass", corner.all_pass());
        }

        // Incentive compatibility battery.
        {
            const std::vector<NamedStrategy> battery = {
                {"zero", constant_effort_strategy(0.0)},
                {"half", constant_effort_strategy(0.5 * cfg.params.effort_cap)},
                {"front_loaded", front_loaded_strategy(cfg.params)},
            };
            const auto report = incentive_test(battery, cfg.params, sol, cfg.sim.v0,
                                               cfg.sim.n_paths, cfg.sim.n_steps,
                                               mix_seed(cfg.sim.seed, 2));
            lines.emplace_back("incentive.full_effort.estimate", fmt17(report.full_effort.mean));
            lines.emplace_back("incentive.full_effort.se",
                               fmt17(report.full_effort.standard_error));
            for (const auto& row : report.deviations) {
                lines.emplace_back("incentive." + row.name + ".estimate",
                                   fmt17(row.estimate.mean));
                lines.emplace_back("incentive." + row.name + ".se",
                                   fmt17(row.estimate.standard_error));
                add_flag("incentive." + row.name + ".pass", row.pass);
            }
        }

        // Belief filtering martingale.
        {
            const auto stats = belief_martingale_stats(cfg.params, cfg.sim.n_paths,
                                                       cfg.sim.n_steps,
                                                       mix_seed(cfg.sim.seed, 3));
            lines.emplace_back("belief.mean.estimate", fmt17(stats.sample_mean));
            lines.emplace_back("belief.mean.se", fmt17(stats.se_mean));
            lines.emplace_back("belief.mean.target", fmt17(stats.target_mean));
            add_flag("belief.mean.pass", stats.mean_within_3se());
            lines.emplace_back("belief.var.estimate", fmt17(stats.sample_var));
            lines.emplace_back("belief.var.se", fmt17(stats.se_var));
            lines.emplace_back("belief.var.target", fmt17(stats.target_var));
            add_flag("belief.var.pass", stats.var_within_3se());
        }

        // BSDE decomposition and terminal anchoring on a path batch.
        {
            double max_res = 0.0;
            bool anchored = true;
            for (std::size_t i = 0; i < cfg.sim.bsde_paths; ++i) {
                const auto path = simulate_contract(cfg.params, sol, cfg.sim.v0,
                                                    cfg.sim.bsde_steps,
                                                    mix_seed(cfg.sim.seed, 1000 + i));
                max_res = std::max(max_res, bsde_residual(path, cfg.params));
                anchored = anchored &&
                           path.v.back() == terminal_agent_value(path.w.back(), cfg.params);
            }
            lines.emplace_back("bsde.max_residual", fmt17(max_res));
            lines.emplace_back("bsde.threshold", fmt17(bsde_residual_threshold));
            add_flag("bsde.pass", max_res < bsde_residual_threshold);
            add_flag("bsde.terminal_anchoring.pass", anchored);
        }

        // HJB residual at random interior nodes, gauged against the scheme
        // order. The constant is calibrated from a half-resolution solve so
        // the check asserts genuine (dt + deta^2) scaling.
        {
            GridSpec coarse = sol.spec;
            coarse.n_time = std::max<std::size_t>(2, coarse.n_time / 2);
            coarse.n_eta = std::max<std::size_t>(3, (coarse.n_eta - 1) / 2 + 1);
            const GridSolution csol = solve_backward(cfg.params, coarse);
            double coarse_max = 0.0;
            for (std::size_t i = 1; i < csol.n_time(); ++i)
                for (std::size_t j = 1; j + 1 < csol.n_eta(); ++j)
                    coarse_max = std::max(coarse_max,
                                          hjb_residual(csol.time[i], 0.0, -1.0, csol.eta[j],
                                                       csol, cfg.params));
            const double coarse_scale = csol.dt() + csol.deta() * csol.deta();
            const double reported_c = 2.0 * coarse_max / coarse_scale;

            // Sweep every interior node so any locally corrupted surface
            // value trips the bound.
            double fine_max = 0.0;
            for (std::size_t i = 1; i < sol.n_time(); ++i)
                for (std::size_t j = 1; j + 1 < sol.n_eta(); ++j)
                    fine_max = std::max(fine_max, hjb_residual(sol.time[i], 0.0, -1.0,
                                                               sol.eta[j], sol, cfg.params));
            const double bound = reported_c * (sol.dt() + sol.deta() * sol.deta());
            lines.emplace_back("hjb_residual.max", fmt17(fine_max));
            lines.emplace_back("hjb_residual.reported_constant", fmt17(reported_c));
            lines.emplace_back("hjb_residual.bound", fmt17(bound));
            add_flag("hjb_residual.pass", fine_max <= bound);
        }

        // Two-route gamma consistency at every node with v = -1.
        {
            double worst = 0.0;
            for (std::size_t i = 0; i <= sol.n_time(); ++i)
                for (std::size_t j = 0; j < sol.n_eta(); ++j) {
                    const double t = sol.time[i];
                    const double k = sol.k_node(i, j);
                    const double ph = sol.phi_node(i, j);
                    const double v = -1.0;
                    const double h_t = precision(t, cfg.params);
                    const IncentiveInputs in{t, sol.eta[j], v, k, ph};
                    const double guess = incentive_gamma_under_guess(in, cfg.params);
                    const double wage = cfg.params.effort_cap - std::log(k * v) /
                                                                    cfg.params.risk_weight();
                    const double pt = cfg.params.risk_weight() * ph * v /
                                      (cfg.params.sigma * cfg.params.sigma * h_t);
                    const double primitive =
                        incentive_gamma(wage, cfg.params.effort_cap, pt, cfg.params);
                    worst = std::max(worst, std::fabs(guess - primitive));
                }
            lines.emplace_back("gamma_consistency.max_gap", fmt17(worst));
            add_flag("gamma_consistency.pass", worst <= gamma_consistency_threshold);
        }

        write_report(lines, out.target("verify_report.txt"));
        return all_pass ? exit_ok : exit_check_failed;
    });
}

} // namespace contract
