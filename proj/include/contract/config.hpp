#pragma once

// Run configuration: line-based `key = value` files with `#` comments.
// Strict by construction: unknown keys, duplicates, and invariant violations
// are errors that name the key and line.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "contract/errors.hpp"
#include "contract/hjb.hpp"
#include "contract/io.hpp"
#include "contract/model.hpp"

namespace contract {

struct SimConfig {
    std::size_t n_paths = 100000;
    std::size_t n_steps = 1000;
    std::uint64_t seed = 12345;
    double v0 = -1.0;
    std::size_t export_paths = 2;    // trajectories written by `simulate`
    std::size_t fk_nodes = 20;       // probe nodes for `fk-check`
    std::size_t corner_probes = 100;
    std::size_t effort_samples = 41; // effort grid for the corner check
    std::size_t bsde_paths = 100;
    std::size_t bsde_steps = 1000;
};

struct RunConfig {
    ModelParams params;
    GridSpec grid;
    SimConfig sim;
    std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& value, const std::string& key, int line) {
    double out = 0.0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("cannot parse number '" + value + "' (key '" + key + "', line " +
                              std::to_string(line) + ")",
                          key, line);
    return out;
}

inline std::uint64_t parse_u64(const std::string& value, const std::string& key, int line) {
    std::uint64_t out = 0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("cannot parse unsigned integer '" + value + "' (key '" + key +
                              "', line " + std::to_string(line) + ")",
                          key, line);
    return out;
}

inline std::size_t parse_size(const std::string& value, const std::string& key, int line) {
    return static_cast<std::size_t>(parse_u64(value, key, line));
}

} // namespace detail

inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file: " + file.string());

    std::map<std::string, std::pair<std::string, int>> entries; // key -> (value, line)
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value' at line " + std::to_string(line_no), {},
                              line_no);
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("empty key or value at line " + std::to_string(line_no), key,
                              line_no);
        if (const auto it = entries.find(key); it != entries.end())
            throw ConfigError("duplicate key '" + key + "' at lines " +
                                  std::to_string(it->second.second) + " and " +
                                  std::to_string(line_no),
                              key, line_no);
        entries.emplace(key, std::make_pair(value, line_no));
    }

    RunConfig cfg;
    std::map<std::string, int> line_of;
    auto take = [&](const std::string& key) -> const std::string* {
        const auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        line_of[key] = it->second.second;
        return &it->second.first;
    };
    auto take_double = [&](const std::string& key, double& slot) {
        if (const auto* v = take(key)) slot = detail::parse_double(*v, key, line_of[key]);
    };
    auto take_size = [&](const std::string& key, std::size_t& slot) {
        if (const auto* v = take(key)) slot = detail::parse_size(*v, key, line_of[key]);
    };

    // The nine model parameters are required.
    for (const char* key : {"theta", "lambda", "rho", "r", "sigma", "M", "T", "m0", "h0"})
        if (entries.find(key) == entries.end())
            throw ConfigError(std::string("missing required key '") + key + "'", key);

    take_double("theta", cfg.params.theta);
    take_double("lambda", cfg.params.lambda);
    take_double("rho", cfg.params.rho);
    take_double("r", cfg.params.r);
    take_double("sigma", cfg.params.sigma);
    take_double("M", cfg.params.effort_cap);
    take_double("T", cfg.params.horizon);
    take_double("m0", cfg.params.prior_mean);
    take_double("h0", cfg.params.prior_precision);

    take_size("n_time", cfg.grid.n_time);
    take_size("n_eta", cfg.grid.n_eta);
    take_double("eta_center", cfg.grid.eta_center);
    take_double("eta_halfwidth", cfg.grid.eta_halfwidth);
    take_double("fixed_point_tol", cfg.grid.fixed_point_tol);
    take_double("root_tol", cfg.grid.root_tol);
    if (const auto* v = take("k_equation_convention")) {
        if (*v == "printed") cfg.grid.k_convention = KEquationConvention::printed;
        else if (*v == "canonical") cfg.grid.k_convention = KEquationConvention::canonical;
        else
            throw ConfigError("k_equation_convention must be 'printed' or 'canonical' (line " +
                                  std::to_string(line_of["k_equation_convention"]) + ")",
                              "k_equation_convention", line_of["k_equation_convention"]);
    }

    take_size("n_paths", cfg.sim.n_paths);
    take_size("n_steps", cfg.sim.n_steps);
    if (const auto* v = take("seed")) cfg.sim.seed = detail::parse_u64(*v, "seed", line_of["seed"]);
    take_double("v0", cfg.sim.v0);
    take_size("export_paths", cfg.sim.export_paths);
    take_size("fk_nodes", cfg.sim.fk_nodes);
    take_size("corner_probes", cfg.sim.corner_probes);
    take_size("effort_samples", cfg.sim.effort_samples);
    take_size("bsde_paths", cfg.sim.bsde_paths);
    take_size("bsde_steps", cfg.sim.bsde_steps);
    if (const auto* v = take("out_dir")) cfg.out_dir = *v;

    for (const auto& [key, value] : entries)
        if (line_of.find(key) == line_of.end())
            throw ConfigError("unknown key '" + key + "' at line " +
                                  std::to_string(value.second),
                              key, value.second);

    // Re-validate every module invariant now, naming the offending key/line.
    try {
        cfg.params.validate();
        cfg.grid.resolved(cfg.params); // validates grid fields too
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const std::string key = msg.substr(0, msg.find(' '));
        const auto it = line_of.find(key);
        const std::string where =
            it != line_of.end() ? " (key '" + key + "', line " + std::to_string(it->second) + ")"
                                : " (key '" + key + "')";
        throw ConfigError(msg + where, key, it != line_of.end() ? it->second : -1);
    }
    if (!(cfg.sim.v0 < 0.0))
        throw ConfigError("v0 must be negative", "v0",
                          line_of.count("v0") ? line_of["v0"] : -1);
    if (cfg.sim.n_paths == 0 || cfg.sim.n_steps == 0)
        throw ConfigError("n_paths and n_steps must be positive");
    return cfg;
}

// Round-trippable echo of the configuration actually in effect, with the
// derived grid defaults resolved.
inline void write_effective_config(const RunConfig& cfg, const std::filesystem::path& file) {
    const GridSpec grid = cfg.grid.resolved(cfg.params);
    auto out = open_output(file);
    out << "theta = " << fmt17(cfg.params.theta) << '\n'
        << "lambda = " << fmt17(cfg.params.lambda) << '\n'
        << "rho = " << fmt17(cfg.params.rho) << '\n'
        << "r = " << fmt17(cfg.params.r) << '\n'
        << "sigma = " << fmt17(cfg.params.sigma) << '\n'
        << "M = " << fmt17(cfg.params.effort_cap) << '\n'
        << "T = " << fmt17(cfg.params.horizon) << '\n'
        << "m0 = " << fmt17(cfg.params.prior_mean) << '\n'
        << "h0 = " << fmt17(cfg.params.prior_precision) << '\n'
        << "n_time = " << grid.n_time << '\n'
        << "n_eta = " << grid.n_eta << '\n'
        << "eta_center = " << fmt17(grid.eta_center) << '\n'
        << "eta_halfwidth = " << fmt17(grid.eta_halfwidth) << '\n'
        << "fixed_point_tol = " << fmt17(grid.fixed_point_tol) << '\n'
        << "root_tol = " << fmt17(grid.root_tol) << '\n'
        << "k_equation_convention = "
        << (grid.k_convention == KEquationConvention::printed ? "printed" : "canonical") << '\n'
        << "n_paths = " << cfg.sim.n_paths << '\n'
        << "n_steps = " << cfg.sim.n_steps << '\n'
        << "seed = " << cfg.sim.seed << '\n'
        << "v0 = " << fmt17(cfg.sim.v0) << '\n'
        << "export_paths = " << cfg.sim.export_paths << '\n'
        << "fk_nodes = " << cfg.sim.fk_nodes << '\n'
        << "corner_probes = " << cfg.sim.corner_probes << '\n'
        << "effort_samples = " << cfg.sim.effort_samples << '\n'
        << "bsde_paths = " << cfg.sim.bsde_paths << '\n'
        << "bsde_steps = " << cfg.sim.bsde_steps << '\n'
        << "out_dir = " << cfg.out_dir << '\n';
}

} // namespace contract
