#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace bubblenet::model {

// Parameters of the two price regimes plus the switch amplitude bound.
//
// Normal regime: log price is a Gaussian random walk with drift mu0 and
// volatility sigma0 per step. Bubble regime: p_t^{-n} is a Gaussian random
// walk with drift -n*mu1 and volatility n*sigma1 per step.
struct RegimeParams {
    double mu0 = 0.0;
    double sigma0 = 0.01;
    double mu1 = 0.001;
    double sigma1 = 0.01;
    double n = 0.5;
    double kappa = 0.6;

    // Throws InvalidArgument when an invariant is violated.
    void validate() const;
};

enum class SwitchDirection { bubble_end, bubble_start };

/// Log transition density of y_t given y_prev under the normal (GBM) regime.
double gbm_transition_logdensity(double y_t, double y_prev, double mu0, double sigma0);

/// Log transition density of y_t given y_prev while the bubble persists.
///
/// Obtained from the Gaussian law of p_t^{-n} by a change of variables to
/// y = ln p. The exponentials e^{-n y} are evaluated only while the exponent
/// stays within +-700; outside that range, or when the quadratic term
/// overflows, the result is -infinity rather than NaN.
double bubble_transition_logdensity(double y_t, double y_prev, double mu1, double sigma1, double n);

/// Log density of a regime switch. bubble_end has height |1/mu0| on
/// -kappa <= y_t < y_prev; bubble_start has height |1/mu1| on
/// y_prev <= y_t <= kappa. Outside the support the result is -infinity.
/// These heights are not normalized over the support.
double switch_logdensity(double y_t, double y_prev, SwitchDirection direction, const RegimeParams& params);

// Critical time p0^{-n} / (n mu) of the deterministic super-exponential path.
double critical_time(double p0, double mu, double n);

/// Deterministic finite-time-singularity price (n mu)^{-1/n} (t_c - t)^{-1/n}.
/// Throws SingularityError carrying t_c when t >= t_c.
double deterministic_fts_price(double t, double p0, double mu, double n);

struct SimulationConfig {
    double p0 = 1.0;
    double mu = 0.05;
    double sigma = 0.1;
    double n = 1.0;
    double dt = 1e-3;
    std::size_t max_steps = 1000;
    std::uint64_t seed = 0;
    // The path terminates once the bracketed denominator drops to this floor.
    double denominator_floor = 1e-12;
};

struct SimulatedPath {
    // log_prices[k] is ln p at time k*dt. When the path hits the critical
    // point, the final entry is the log price evaluated at the floor.
    std::vector<double> log_prices;
    bool hit_critical = false;
    std::optional<std::size_t> critical_time_index;
};

/// Samples a Brownian path on the grid k*dt and evaluates the closed-form
/// solution p(t) = [n mu (t_c - t) - n sigma W_t]^{-1/n} at every grid point.
/// For n = 0 the path is p0 exp(mu t + sigma W_t). Deterministic for a fixed seed.
SimulatedPath simulate_sa_path(const SimulationConfig& config);

struct InverseGaussian {
    double mean;
    double shape;

    double cdf(double x) const;
};

/// Law of the stochastic critical time: IG(p0^{-n}/(n mu), (p0^{-n}/(n sigma))^2).
InverseGaussian ig_params(double p0, double mu, double sigma, double n);

}  // namespace bubblenet::model
