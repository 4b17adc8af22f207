#pragma once

// Model primitives of the contract economy: parameters, the Gaussian belief
// filter for the agent's unknown quality, CARA flow/terminal utilities, and
// the closed-form post-horizon consumption problem both parties retire into.

#include <cmath>
#include <stdexcept>
#include <string>

#include "contract/errors.hpp"

namespace contract {

// All scalar parameters of the economy. Aggregate on purpose; call
// validate() once at the boundary (config load, solver entry) and treat the
// struct as immutable afterwards.
struct ModelParams {
    double theta = 1.0;        // absolute risk aversion, > 0
    double lambda = 0.5;       // shared risk-awareness / effort weight, in (0,1)
    double rho = 0.5;          // discount rate, in (0,1)
    double r = 0.05;           // post-horizon return rate, > 0
    double sigma = 1.0;        // output volatility, > 0
    double effort_cap = 1.0;   // maximum effort M, > 0
    double horizon = 1.0;      // contract horizon T, > 0
    double prior_mean = 0.0;   // prior mean m0 of the quality
    double prior_precision = 1.0; // prior precision h0, > 0

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument(std::string(name) + " must be positive and finite");
        };
        positive(theta, "theta");
        positive(sigma, "sigma");
        positive(effort_cap, "M");
        positive(horizon, "T");
        positive(prior_precision, "h0");
        positive(r, "r");
        if (!(lambda > 0.0 && lambda < 1.0))
            throw std::invalid_argument("lambda must lie in (0,1)");
        if (!(rho > 0.0 && rho < 1.0))
            throw std::invalid_argument("rho must lie in (0,1)");
        if (!std::isfinite(prior_mean))
            throw std::invalid_argument("m0 must be finite");
    }

    double risk_weight() const { return lambda * theta; }
};

// Posterior (mean, precision) pair at a point in time.
struct BeliefState {
    double t = 0.0;
    double eta_hat = 0.0;
    double h = 1.0;
};

inline void require_effort_in_range(double a, const ModelParams& p) {
    if (!(a >= 0.0 && a <= p.effort_cap))
        throw std::domain_error("effort outside [0, M]");
}

// Posterior precision h_t = h0 + t / sigma^2. Strictly increasing in t.
inline double precision(double t, const ModelParams& p) {
    if (t < 0.0) throw std::domain_error("negative time");
    return p.prior_precision + t / (p.sigma * p.sigma);
}

// Posterior mean of the quality given the cumulated excess output y - A.
inline double posterior_mean(double y_minus_A, double t, const ModelParams& p) {
    if (t < 0.0) throw std::domain_error("negative time");
    const double h_t = precision(t, p);
    return (p.prior_precision * p.prior_mean + y_minus_A / (p.sigma * p.sigma)) / h_t;
}

inline BeliefState belief_state(double y_minus_A, double t, const ModelParams& p) {
    return BeliefState{t, posterior_mean(y_minus_A, t, p), precision(t, p)};
}

// Flow utility u(w,a) = -exp(-lambda*theta*(w - a)). Negative everywhere,
// increasing in the wage, decreasing in effort.
inline double agent_utility(double w, double a, const ModelParams& p) {
    require_effort_in_range(a, p);
    return -std::exp(-p.risk_weight() * (w - a));
}

// u_a = lambda*theta*u < 0: effort is costly.
inline double agent_utility_effort_derivative(double w, double a, const ModelParams& p) {
    return p.risk_weight() * agent_utility(w, a, p);
}

// Terminal value of retiring with wealth c and consuming optimally forever:
// V(c) = -exp((1-rho)/r - lambda*theta*r*c).
inline double post_horizon_value(double c, const ModelParams& p) {
    return -std::exp((1.0 - p.rho) / p.r - p.risk_weight() * p.r * c);
}

// Optimal retirement consumption rate b(c) = (rho-1)/(lambda*theta*r) + r*c.
inline double post_horizon_consumption(double c, const ModelParams& p) {
    return (p.rho - 1.0) / (p.risk_weight() * p.r) + p.r * c;
}

// Agent's terminal value as a function of the terminal wage.
inline double terminal_agent_value(double w_T, const ModelParams& p) {
    return post_horizon_value(w_T, p);
}

// Inverse of terminal_agent_value: the terminal wage that delivers a given
// (negative) promised value.
inline double terminal_wage_for_value(double v, const ModelParams& p) {
    if (!(v < 0.0)) throw std::domain_error("promised value must be negative");
    return ((1.0 - p.rho) / p.r - std::log(-v)) / (p.risk_weight() * p.r);
}

// Residual of the stationary post-horizon HJB
//   rho*V = max_b { -exp(-lambda*theta*b) + V'(c) (r c - b) }
// evaluated at the stated consumption rule b(c). Analytic V' keeps the
// evaluation free of differencing error.
inline double post_horizon_hjb_residual(double c, const ModelParams& p) {
    const double v = post_horizon_value(c, p);
    const double v_prime = -p.risk_weight() * p.r * v;
    const double b = post_horizon_consumption(c, p);
    const double bracket = -std::exp(-p.risk_weight() * b) + v_prime * (p.r * c - b);
    return std::fabs(p.rho * v - bracket);
}

} // namespace contract
