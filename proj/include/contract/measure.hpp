#pragma once

// Girsanov machinery: the zero-drift reference dynamics dy = sigma dW^0, the
// controlled drift f = eta_hat + a, the relative density process Gamma, and
// the change of Brownian motion between the reference measure and the
// effort-dependent measure.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "contract/model.hpp"
#include "contract/stats.hpp"

namespace contract {

// A discretized path of the reference dynamics on a uniform grid over [0,T]:
// y_{i+1} - y_i = sigma * dW_i exactly.
struct ReferencePath {
    std::vector<double> t;  // n_steps + 1 grid times
    std::vector<double> dw; // n_steps reference Brownian increments
    std::vector<double> y;  // n_steps + 1 cumulative output, y_0 = 0

    std::size_t n_steps() const { return dw.size(); }
    double dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
};

// Effort strategies observe the path only through (t, y_t, A_t); that pair
// is a sufficient statistic for every strategy considered here.
using EffortStrategy = std::function<double(double t, double y, double A)>;

inline ReferencePath make_reference_path(const ModelParams& p, std::size_t n_steps,
                                         std::uint64_t seed, std::uint64_t path_index = 0) {
    if (n_steps == 0) throw std::invalid_argument("n_steps must be positive");
    ReferencePath path;
    path.t.resize(n_steps + 1);
    path.dw.resize(n_steps);
    path.y.resize(n_steps + 1);
    const double dt = p.horizon / static_cast<double>(n_steps);
    auto rng = make_path_rng(seed, path_index);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    path.y[0] = 0.0;
    for (std::size_t i = 0; i <= n_steps; ++i)
        path.t[i] = p.horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        path.dw[i] = normal(rng);
        path.y[i + 1] = path.y[i] + p.sigma * path.dw[i];
    }
    return path;
}

inline double controlled_drift(double eta_hat, double a, const ModelParams& p) {
    require_effort_in_range(a, p);
    return eta_hat + a;
}

struct GirsanovResult {
    std::vector<double> gamma;          // n_steps + 1 values, gamma[0] = 1
    std::vector<double> log_increment;  // n_steps per-step log increments
};

// Discretized exponential martingale along a reference path,
//   Gamma_i = exp( sum sigma^-1 f dW - 1/2 sum (sigma^-1 f)^2 dt ),
// with the stochastic integral taken at the left endpoint (Ito convention),
// which is what makes the per-step conditional-expectation identity exact.
inline GirsanovResult girsanov_density(const ReferencePath& path,
                                       const EffortStrategy& strategy,
                                       const ModelParams& p) {
    const std::size_t n = path.n_steps();
    const double dt = path.dt();
    GirsanovResult out;
    out.gamma.assign(n + 1, 1.0);
    out.log_increment.assign(n, 0.0);
    double cumulative_effort = 0.0;
    double log_gamma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = strategy(path.t[i], path.y[i], cumulative_effort);
        require_effort_in_range(a, p);
        const double eta = posterior_mean(path.y[i] - cumulative_effort, path.t[i], p);
        const double scaled = (eta + a) / p.sigma;
        out.log_increment[i] = scaled * path.dw[i] - 0.5 * scaled * scaled * dt;
        log_gamma += out.log_increment[i];
        out.gamma[i + 1] = std::exp(log_gamma);
        cumulative_effort += a * dt;
    }
    return out;
}

// Increments of the effort-dependent Brownian motion,
//   dW^a_i = dW^0_i - sigma^-1 f_i dt.
// Reconstructing f_i dt + sigma dW^a_i recovers dy_i.
inline std::vector<double> brownian_under_effort(const ReferencePath& path,
                                                 const EffortStrategy& strategy,
                                                 const ModelParams& p) {
    const std::size_t n = path.n_steps();
    const double dt = path.dt();
    std::vector<double> dwa(n);
    double cumulative_effort = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = strategy(path.t[i], path.y[i], cumulative_effort);
        require_effort_in_range(a, p);
        const double eta = posterior_mean(path.y[i] - cumulative_effort, path.t[i], p);
        const double f = eta + a;
        dwa[i] = path.dw[i] - (f / p.sigma) * dt;
        cumulative_effort += a * dt;
    }
    return dwa;
}

} // namespace contract
