#pragma once

// File emission and ingestion. Every floating-point value is printed with 17
// significant digits so CSVs round-trip doubles losslessly and repeated runs
// are byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contract/errors.hpp"
#include "contract/hjb.hpp"
#include "contract/simulate.hpp"

namespace contract {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
}

inline std::ofstream open_output(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open output file: " + file.string());
    return out;
}

inline void write_surface_csv(const GridSolution& sol, const std::filesystem::path& file) {
    auto out = open_output(file);
    out << "t,eta,g,k,phi\n";
    for (std::size_t i = 0; i <= sol.n_time(); ++i)
        for (std::size_t j = 0; j < sol.n_eta(); ++j)
            out << fmt17(sol.time[i]) << ',' << fmt17(sol.eta[j]) << ','
                << fmt17(sol.g_node(i, j)) << ',' << fmt17(sol.k_node(i, j)) << ','
                << fmt17(sol.phi_node(i, j)) << '\n';
}

// Rebuilds a solution object from an exported surface file; the grid shape
// is prescribed by (params, spec) and the file must match it.
inline GridSolution load_surface_csv(const ModelParams& p, const GridSpec& spec_in,
                                     const std::filesystem::path& file) {
    p.validate();
    const GridSpec spec = spec_in.resolved(p);
    GridSolution sol;
    sol.params = p;
    sol.spec = spec;
    sol.time.resize(spec.n_time + 1);
    for (std::size_t i = 0; i <= spec.n_time; ++i)
        sol.time[i] = p.horizon * static_cast<double>(i) / static_cast<double>(spec.n_time);
    sol.eta.resize(spec.n_eta);
    const double de = 2.0 * spec.eta_halfwidth / static_cast<double>(spec.n_eta - 1);
    for (std::size_t j = 0; j < spec.n_eta; ++j)
        sol.eta[j] = spec.eta_center - spec.eta_halfwidth + de * static_cast<double>(j);
    sol.g.assign((spec.n_time + 1) * spec.n_eta, 0.0);
    sol.k.assign((spec.n_time + 1) * spec.n_eta, 0.0);
    sol.phi.assign((spec.n_time + 1) * spec.n_eta, 0.0);

    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open surface file: " + file.string());
    std::string line;
    if (!std::getline(in, line) || line != "t,eta,g,k,phi")
        throw ConfigError("surface file has unexpected header: " + file.string());
    const double coord_tol = 1e-9 * std::max(1.0, p.horizon + spec.eta_halfwidth);
    std::size_t row = 0;
    const std::size_t expected = (spec.n_time + 1) * spec.n_eta;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= expected) throw ConfigError("surface file has extra rows");
        double fields[5];
        std::istringstream ss(line);
        std::string tok;
        for (int f = 0; f < 5; ++f) {
            if (!std::getline(ss, tok, ','))
                throw ConfigError("malformed surface row " + std::to_string(row + 2));
            try {
                fields[f] = std::stod(tok);
            } catch (const std::exception&) {
                throw ConfigError("malformed surface row " + std::to_string(row + 2));
            }
        }
        const std::size_t i = row / spec.n_eta;
        const std::size_t j = row % spec.n_eta;
        if (std::fabs(fields[0] - sol.time[i]) > coord_tol ||
            std::fabs(fields[1] - sol.eta[j]) > coord_tol)
            throw ConfigError("surface row " + std::to_string(row + 2) +
                              " does not match the configured grid");
        sol.g[sol.idx(i, j)] = fields[2];
        sol.k[sol.idx(i, j)] = fields[3];
        sol.phi[sol.idx(i, j)] = fields[4];
        ++row;
    }
    if (row != expected) throw ConfigError("surface file is truncated");
    return sol;
}

inline void write_path_csv(const SimPath& path, const std::filesystem::path& file) {
    auto out = open_output(file);
    out << "t,y,eta_hat,v,w,d,a,gamma\n";
    for (std::size_t i = 0; i < path.t.size(); ++i)
        out << fmt17(path.t[i]) << ',' << fmt17(path.y[i]) << ',' << fmt17(path.eta_hat[i])
            << ',' << fmt17(path.v[i]) << ',' << fmt17(path.w[i]) << ',' << fmt17(path.d[i])
            << ',' << fmt17(path.a[i]) << ',' << fmt17(path.gamma[i]) << '\n';
}

struct FkCheckRow {
    double t = 0.0;
    double eta = 0.0;
    double g_pde = 0.0;
    double g_mc = 0.0;
    double se = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline void write_fk_check_csv(const std::vector<FkCheckRow>& rows,
                               const std::filesystem::path& file) {
    auto out = open_output(file);
    out << "t,eta,g_pde,g_mc,se,abs_diff,tolerance,pass\n";
    for (const auto& r : rows)
        out << fmt17(r.t) << ',' << fmt17(r.eta) << ',' << fmt17(r.g_pde) << ','
            << fmt17(r.g_mc) << ',' << fmt17(r.se) << ',' << fmt17(std::fabs(r.g_pde - r.g_mc))
            << ',' << fmt17(r.tolerance) << ',' << (r.pass ? 1 : 0) << '\n';
}

// key = value report lines.
using ReportLines = std::vector<std::pair<std::string, std::string>>;

inline void write_report(const ReportLines& lines, const std::filesystem::path& file) {
    auto out = open_output(file);
    for (const auto& [key, value] : lines) out << key << " = " << value << '\n';
}

// Tracks command outputs so the manifest can be written last and partial
// results removed if the command fails midway.
class OutputTracker {
public:
    explicit OutputTracker(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::filesystem::path target(const std::string& name) {
        files_.push_back(name);
        return dir_ / name;
    }

    void write_manifest() {
        auto out = open_output(dir_ / "manifest.txt");
        for (const auto& f : files_) out << f << '\n';
    }

    void remove_partial_outputs() {
        std::error_code ec;
        for (const auto& f : files_) std::filesystem::remove(dir_ / f, ec);
        std::filesystem::remove(dir_ / "manifest.txt", ec);
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

} // namespace contract
