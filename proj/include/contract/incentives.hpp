#pragma once

// Agent-side incentive machinery: the Hamiltonian, the horizon factor phi,
// the forward-looking term p-tilde, and the incentive-compatibility
// parameter gamma in its primitive form and in the form induced by the
// principal's value-function guess e^{-lambda*theta*(w-a)} = k v.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>

#include "contract/model.hpp"

namespace contract {

// Inputs for the guess-form gamma. v < 0 and k < 0 are hard requirements:
// continuation values of exponential utilities are negative and the reduced
// HJB takes log(-k).
struct IncentiveInputs {
    double t = 0.0;
    double eta_hat = 0.0;
    double v = -1.0;   // promised continuation value
    double k = -1.0;   // guess coefficient
    double phi = 0.0;  // horizon factor, <= 0 while k < 0 on [t,T]

    void validate() const {
        if (!(v < 0.0)) throw std::domain_error("IncentiveInputs: v must be negative");
        if (!(k < 0.0)) throw std::domain_error("IncentiveInputs: k must be negative");
    }
};

// H = u(w,a) + gamma * (eta_hat + a); affine in gamma.
inline double hamiltonian(double eta_hat, double w, double a, double gamma,
                          const ModelParams& p) {
    return agent_utility(w, a, p) + gamma * (eta_hat + a);
}

// phi_t = 1 - exp( int_t^T (rho - k(s)) ds ) with the k path sampled on a
// uniform grid over [t,T]; composite trapezoid, matching the grid solver.
inline double phi_from_path(double t, std::span<const double> k_path, const ModelParams& p) {
    if (t > p.horizon) throw std::domain_error("phi: t beyond horizon");
    if (k_path.empty()) throw std::domain_error("phi: empty k path");
    if (k_path.size() == 1) return 0.0; // t == T, empty integral
    const std::size_t n = k_path.size() - 1;
    const double dt = (p.horizon - t) / static_cast<double>(n);
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        integral += 0.5 * dt * ((p.rho - k_path[i]) + (p.rho - k_path[i + 1]));
    return 1.0 - std::exp(integral);
}

using WageEffortPath = std::function<std::pair<double, double>(double)>;

// Deterministic-path version of the forward incentive term,
//   p~_t = (sigma^-2 / h_t) int_t^T e^{-rho (s-t)} u_a(w_s, a_s) ds,
// by composite trapezoid with n_intervals panels. Always <= 0.
inline double p_tilde(double t, const WageEffortPath& path, const ModelParams& p,
                      std::size_t n_intervals = 2000) {
    if (t > p.horizon) throw std::domain_error("p_tilde: t beyond horizon");
    if (n_intervals == 0) throw std::invalid_argument("p_tilde: n_intervals must be positive");
    if (t == p.horizon) return 0.0;
    const double dt = (p.horizon - t) / static_cast<double>(n_intervals);
    auto integrand = [&](double s) {
        const auto [w, a] = path(s);
        return std::exp(-p.rho * (s - t)) * agent_utility_effort_derivative(w, a, p);
    };
    double integral = 0.5 * (integrand(t) + integrand(p.horizon));
    for (std::size_t i = 1; i < n_intervals; ++i)
        integral += integrand(t + dt * static_cast<double>(i));
    integral *= dt;
    const double h_t = precision(t, p);
    return integral / (p.sigma * p.sigma * h_t);
}

// gamma = -u_a(w,a) + p~. With p~ = 0 this is the no-filtering limit -u_a.
inline double incentive_gamma(double w, double a, double p_tilde_val, const ModelParams& p) {
    return -agent_utility_effort_derivative(w, a, p) + p_tilde_val;
}

// gamma under the value-function guess:
//   gamma = lambda*theta * (k + sigma^-2 phi / h_t) * v,
// positive whenever k < 0, phi <= 0, v < 0.
inline double incentive_gamma_under_guess(const IncentiveInputs& in, const ModelParams& p) {
    in.validate();
    const double h_t = precision(in.t, p);
    const double bracket = in.k + in.phi / (p.sigma * p.sigma * h_t);
    return p.risk_weight() * bracket * in.v;
}

} // namespace contract
