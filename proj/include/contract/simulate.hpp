#pragma once

// Forward simulation of the contract state system
//   dEta = (sigma^-1/h_t) dW,   dv = [rho v - u] dt + sigma gamma dW,
//   dy   = (r y + eta + a - d) dt + sigma dW,
// agent-value estimation under arbitrary (including deviating) strategies,
// and the martingale / BSDE / incentive-compatibility checks.
//
// The promise v is integrated in log(-v): drift and loading are both
// proportional to v, so the sign invariant holds exactly. The belief is
// carried through its sufficient statistic X = output - recommended effort,
// which keeps eta_hat == posterior_mean(X, t) bit-exact along the path.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "contract/hjb.hpp"
#include "contract/measure.hpp"
#include "contract/model.hpp"
#include "contract/stats.hpp"

namespace contract {

struct SimPath {
    std::vector<double> t;       // n_steps + 1
    std::vector<double> dw;      // n_steps innovation increments
    std::vector<double> y;       // principal wealth, y_0 = 0
    std::vector<double> A;       // cumulative recommended effort
    std::vector<double> eta_hat; // posterior mean of quality
    std::vector<double> v;       // promised value, always < 0
    std::vector<double> w;       // wage; the final entry anchors the promise
    std::vector<double> d;       // dividend
    std::vector<double> a;       // effort
    std::vector<double> gamma;   // incentive loading

    std::size_t n_steps() const { return dw.size(); }
    double dt() const { return t[1] - t[0]; }
};

namespace detail {

// Smallest admissible |v|; reaching it means the promise collapsed, which
// the geometric dynamics cannot do and so signals a bug upstream.
inline constexpr double log_v_floor = -27.631021115928547; // log(1e-12)

struct PromiseCoeffs {
    double k, B, loading; // loading = sigma * lambda*theta * B
};

inline PromiseCoeffs promise_coeffs(double t, double eta, const GridSolution& sol,
                                    const ModelParams& p) {
    const double k = sol.k_at(t, eta);
    const double phi = sol.phi_at(t, eta);
    const double B = k + phi / (p.sigma * p.sigma * precision(t, p));
    return {k, B, p.sigma * p.risk_weight() * B};
}

} // namespace detail

// One trajectory of the contract under the optimal policy (a* = M).
inline SimPath simulate_contract(const ModelParams& p, const GridSolution& sol, double v0,
                                 std::size_t n_steps, std::uint64_t seed) {
    if (!(v0 < 0.0)) throw std::domain_error("simulate_contract: v0 must be negative");
    if (n_steps == 0) throw std::invalid_argument("simulate_contract: n_steps must be positive");
    p.validate();

    SimPath path;
    path.t.resize(n_steps + 1);
    path.dw.resize(n_steps);
    path.y.resize(n_steps + 1);
    path.A.resize(n_steps + 1);
    path.eta_hat.resize(n_steps + 1);
    path.v.resize(n_steps + 1);
    path.w.resize(n_steps + 1);
    path.d.resize(n_steps + 1);
    path.a.resize(n_steps + 1);
    path.gamma.resize(n_steps + 1);

    const double dt = p.horizon / static_cast<double>(n_steps);
    const double lt = p.risk_weight();
    auto rng = make_path_rng(seed, 0);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));

    double X = 0.0;            // sufficient statistic: output minus recommended effort
    double L = std::log(-v0);  // log(-v)
    double wealth = 0.0;
    double effort_acc = 0.0;

    for (std::size_t i = 0; i <= n_steps; ++i) {
        const double t_i = p.horizon * static_cast<double>(i) / static_cast<double>(n_steps);
        const double eta = posterior_mean(X, t_i, p);
        double v_i = -std::exp(L);
        const auto pc = detail::promise_coeffs(t_i, eta, sol, p);

        path.t[i] = t_i;
        path.y[i] = wealth;
        path.A[i] = effort_acc;
        path.eta_hat[i] = eta;
        path.a[i] = p.effort_cap;

        if (i == n_steps) {
            // Terminal wage delivers the promise: v_T = g(w_T) by construction.
            const double w_T = terminal_wage_for_value(v_i, p);
            v_i = terminal_agent_value(w_T, p);
            path.w[i] = w_T;
            path.v[i] = v_i;
            path.gamma[i] = lt * pc.B * v_i;
            path.d[i] = optimal_policies(t_i, wealth, v_i, eta, sol, p).dividend;
            break;
        }

        path.v[i] = v_i;
        path.gamma[i] = lt * pc.B * v_i;
        const auto pol = optimal_policies(t_i, wealth, v_i, eta, sol, p);
        path.w[i] = pol.wage;
        path.d[i] = pol.dividend;

        const double dW = normal(rng);
        path.dw[i] = dW;
        L += (p.rho + pc.k - 0.5 * pc.loading * pc.loading) * dt + pc.loading * dW;
        if (L <= detail::log_v_floor)
            throw SimulationError("promised value collapsed towards zero");
        X += eta * dt + p.sigma * dW;
        wealth += (p.r * wealth + eta + p.effort_cap - pol.dividend) * dt + p.sigma * dW;
        effort_acc += p.effort_cap * dt;
    }
    return path;
}

// Re-integrates the promise backward from v_T = g(w_T) through the stored
// loadings and innovations; returns max_i |v_re - v_stored|. The per-step
// coefficients are reconstructed from stored data (k = -u/v, loading =
// sigma gamma / v), so tampering with gamma shows up immediately.
inline double bsde_residual(const SimPath& path, const ModelParams& p) {
    const std::size_t n = path.n_steps();
    const double dt = path.dt();
    double L_re = std::log(-terminal_agent_value(path.w[n], p));
    double max_res = std::fabs(-std::exp(L_re) - path.v[n]);
    for (std::size_t i = n; i-- > 0;) {
        const double u_i = agent_utility(path.w[i], path.a[i], p);
        const double k_i = -u_i / path.v[i];
        const double b_i = p.sigma * path.gamma[i] / path.v[i];
        L_re -= (p.rho + k_i - 0.5 * b_i * b_i) * dt + b_i * path.dw[i];
        max_res = std::max(max_res, std::fabs(-std::exp(L_re) - path.v[i]));
    }
    return max_res;
}

struct BeliefStats {
    double sample_mean = 0.0;
    double sample_var = 0.0;
    double se_mean = 0.0;
    double se_var = 0.0;
    double target_mean = 0.0;
    double target_var = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;

    bool mean_within_3se() const { return std::fabs(sample_mean - target_mean) <= 3.0 * se_mean; }
    bool var_within_3se() const { return std::fabs(sample_var - target_var) <= 3.0 * se_var; }
};

// Terminal-belief moments across paths against the martingale targets
// E[eta_T] = m0 and Var[eta_T] = 1/h0 - 1/h_T.
inline BeliefStats belief_martingale_stats(const ModelParams& p, std::size_t n_paths,
                                           std::size_t n_steps, std::uint64_t seed) {
    p.validate();
    if (n_paths == 0 || n_steps == 0)
        throw std::invalid_argument("belief_martingale_stats: need paths and steps");
    const double dt = p.horizon / static_cast<double>(n_steps);
    std::vector<double> eta_T(n_paths);
    for (std::size_t path = 0; path < n_paths; ++path) {
        auto rng = make_path_rng(seed, path);
        std::normal_distribution<double> normal(0.0, std::sqrt(dt));
        double X = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double t_i = p.horizon * static_cast<double>(i) / static_cast<double>(n_steps);
            X += posterior_mean(X, t_i, p) * dt + p.sigma * normal(rng);
        }
        eta_T[path] = posterior_mean(X, p.horizon, p);
    }

    BeliefStats out;
    out.n_paths = n_paths;
    out.seed = seed;
    const double n = static_cast<double>(n_paths);
    out.sample_mean = pairwise_sum(eta_T) / n;
    std::vector<double> sq(n_paths), quart(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const double c = eta_T[i] - out.sample_mean;
        sq[i] = c * c;
        quart[i] = c * c * c * c;
    }
    out.sample_var = pairwise_sum(sq) / (n - 1.0);
    const double m4 = pairwise_sum(quart) / n;
    out.se_mean = std::sqrt(out.sample_var / n);
    out.se_var = std::sqrt(std::max(0.0, m4 - out.sample_var * out.sample_var) / n);
    out.target_mean = p.prior_mean;
    out.target_var = 1.0 / p.prior_precision - 1.0 / precision(p.horizon, p);
    return out;
}

inline EffortStrategy full_effort_strategy(const ModelParams& p) {
    return [cap = p.effort_cap](double, double, double) { return cap; };
}

inline EffortStrategy constant_effort_strategy(double level) {
    return [level](double, double, double) { return level; };
}

// Full effort until T/2, shirking afterwards.
inline EffortStrategy front_loaded_strategy(const ModelParams& p) {
    return [cap = p.effort_cap, half = 0.5 * p.horizon](double t, double, double) {
        return t < half ? cap : 0.0;
    };
}

// Agent's expected value when the true quality is drawn from the prior, the
// output carries the agent's actual effort, and the principal prices wages
// off the belief computed with the recommended cumulative effort M*t (the
// principal cannot observe deviations).
inline MCEstimate simulate_agent_value(const EffortStrategy& strategy, const ModelParams& p,
                                       const GridSolution& sol, double v0,
                                       std::size_t n_paths, std::size_t n_steps,
                                       std::uint64_t seed) {
    if (!(v0 < 0.0)) throw std::domain_error("simulate_agent_value: v0 must be negative");
    if (n_paths == 0 || n_steps == 0)
        throw std::invalid_argument("simulate_agent_value: need paths and steps");
    p.validate();

    const double dt = p.horizon / static_cast<double>(n_steps);
    const double lt = p.risk_weight();
    const double quality_sd = 1.0 / std::sqrt(p.prior_precision);

    std::vector<double> values(n_paths);
    for (std::size_t path = 0; path < n_paths; ++path) {
        auto rng = make_path_rng(seed, path);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double quality = p.prior_mean + quality_sd * normal(rng);

        double output = 0.0;
        double actual_effort = 0.0;
        double X = 0.0; // principal's statistic: output - M t
        double L = std::log(-v0);
        double value = 0.0;

        for (std::size_t i = 0; i < n_steps; ++i) {
            const double t_i = p.horizon * static_cast<double>(i) / static_cast<double>(n_steps);
            const double eta = posterior_mean(X, t_i, p);
            const double v_i = -std::exp(L);
            const auto pc = detail::promise_coeffs(t_i, eta, sol, p);
            const double wage = p.effort_cap - std::log(pc.k * v_i) / lt;

            const double a = strategy(t_i, output, actual_effort);
            require_effort_in_range(a, p);
            value += std::exp(-p.rho * t_i) * agent_utility(wage, a, p) * dt;

            const double dWp = std::sqrt(dt) * normal(rng);
            const double d_output = (quality + a) * dt + p.sigma * dWp;
            // Innovation as perceived by the principal under recommended effort.
            const double d_innov = (d_output - (eta + p.effort_cap) * dt) / p.sigma;
            output += d_output;
            actual_effort += a * dt;
            X += d_output - p.effort_cap * dt;
            L += (p.rho + pc.k - 0.5 * pc.loading * pc.loading) * dt + pc.loading * d_innov;
        }
        // Terminal wage anchors the promise: the payoff is g(w_T) = -e^L.
        value += std::exp(-p.rho * p.horizon) * (-std::exp(L));
        values[path] = value;
    }
    return estimate_from_samples(values, seed);
}

struct NamedStrategy {
    std::string name;
    EffortStrategy strategy;
};

struct IncentiveRow {
    std::string name;
    MCEstimate estimate;
    double combined_se = 0.0;
    bool pass = false;
};

struct IncentiveReport {
    MCEstimate full_effort;
    std::vector<IncentiveRow> deviations;
    bool all_pass() const {
        for (const auto& row : deviations)
            if (!row.pass) return false;
        return true;
    }
};

// Runs the full-effort benchmark and each deviation with common random
// numbers (identical per-path seeds and draw order); a deviation fails the
// implementability check if it beats full effort by more than three combined
// standard errors.
inline IncentiveReport incentive_test(const std::vector<NamedStrategy>& deviations,
                                      const ModelParams& p, const GridSolution& sol, double v0,
                                      std::size_t n_paths, std::size_t n_steps,
                                      std::uint64_t seed) {
    IncentiveReport report;
    report.full_effort =
        simulate_agent_value(full_effort_strategy(p), p, sol, v0, n_paths, n_steps, seed);
    for (const auto& dev : deviations) {
        IncentiveRow row;
        row.name = dev.name;
        row.estimate = simulate_agent_value(dev.strategy, p, sol, v0, n_paths, n_steps, seed);
        row.combined_se = std::sqrt(report.full_effort.standard_error * report.full_effort.standard_error +
                                    row.estimate.standard_error * row.estimate.standard_error);
        row.pass = report.full_effort.mean >= row.estimate.mean - 3.0 * row.combined_se;
        report.deviations.push_back(std::move(row));
    }
    return report;
}

} // namespace contract
