#include "bubblenet/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "bubblenet/errors.hpp"

namespace bubblenet::model {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kExponentClamp = 700.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw InvalidArgument(std::string(name) + " must be finite");
    }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log Phi(-b) for b >= 0, stable in the far tail.
double log_normal_upper_tail(double b) {
    if (b < 30.0) {
        return std::log(0.5 * std::erfc(b / std::numbers::sqrt2));
    }
    const double inv2 = 1.0 / (b * b);
    return -0.5 * b * b - std::log(b) - kHalfLog2Pi + std::log1p(-inv2 + 3.0 * inv2 * inv2);
}

}  // namespace

void RegimeParams::validate() const {
    require_finite(mu0, "mu0");
    require_finite(mu1, "mu1");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InvalidArgument("sigma0 must be positive");
    if (!(sigma1 > 0.0) || !std::isfinite(sigma1)) throw InvalidArgument("sigma1 must be positive");
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("n must be positive");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidArgument("kappa must be positive");
    if (!(mu1 > 0.0)) throw InvalidArgument("mu1 must be positive");
}

double gbm_transition_logdensity(double y_t, double y_prev, double mu0, double sigma0) {
    require_finite(y_t, "y_t");
    require_finite(y_prev, "y_prev");
    require_finite(mu0, "mu0");
    require_finite(sigma0, "sigma0");
    if (!(sigma0 > 0.0)) throw InvalidArgument("sigma0 must be positive");
    const double z = (y_t - y_prev - mu0) / sigma0;
    return -kHalfLog2Pi - std::log(sigma0) - 0.5 * z * z;
}

double bubble_transition_logdensity(double y_t, double y_prev, double mu1, double sigma1, double n) {
    if (!(n > 0.0)) throw InvalidArgument("n must be positive");
    if (!(sigma1 > 0.0)) throw InvalidArgument("sigma1 must be positive");
    require_finite(y_t, "y_t");
    require_finite(y_prev, "y_prev");
    require_finite(mu1, "mu1");
    require_finite(sigma1, "sigma1");
    require_finite(n, "n");

    const double a_t = -n * y_t;
    const double a_prev = -n * y_prev;
    if (std::abs(a_t) > kExponentClamp || std::abs(a_prev) > kExponentClamp) {
        return kNegInf;
    }
    const double scale = n * sigma1;
    // e^{a_t} - e^{a_prev} without cancellation when n is tiny
    const double z = (std::exp(a_prev) * std::expm1(a_t - a_prev) + n * mu1) / scale;
    const double quad = z * z;
    if (!std::isfinite(quad)) {
        return kNegInf;
    }
    const double value = -kHalfLog2Pi - std::log(scale) - 0.5 * quad + std::log(n) + a_t;
    return std::isnan(value) ? kNegInf : value;
}

double switch_logdensity(double y_t, double y_prev, SwitchDirection direction, const RegimeParams& params) {
    require_finite(y_t, "y_t");
    require_finite(y_prev, "y_prev");
    if (!(params.kappa > 0.0)) throw InvalidArgument("kappa must be positive");
    const double kappa = params.kappa;
    if (direction == SwitchDirection::bubble_end) {
        if (params.mu0 == 0.0) throw InvalidArgument("bubble-end switch density undefined for mu0 = 0");
        const bool inside = -kappa <= y_t && y_t < y_prev;
        return inside ? -std::log(std::abs(params.mu0)) : kNegInf;
    }
    if (params.mu1 == 0.0) throw InvalidArgument("bubble-start switch density undefined for mu1 = 0");
    const bool inside = y_prev <= y_t && y_t <= kappa;
    return inside ? -std::log(std::abs(params.mu1)) : kNegInf;
}

double critical_time(double p0, double mu, double n) {
    if (!(p0 > 0.0) || !(mu > 0.0) || !(n > 0.0)) {
        throw InvalidArgument("critical time needs positive p0, mu and n");
    }
    return std::pow(p0, -n) / (n * mu);
}

double deterministic_fts_price(double t, double p0, double mu, double n) {
    const double tc = critical_time(p0, mu, n);
    if (!(t >= 0.0)) throw InvalidArgument("t must be non-negative");
    if (t >= tc) {
        throw SingularityError("price diverges at the critical time t_c = " + std::to_string(tc), tc);
    }
    if (t == 0.0) return p0;
    return std::pow(n * mu, -1.0 / n) * std::pow(tc - t, -1.0 / n);
}

SimulatedPath simulate_sa_path(const SimulationConfig& config) {
    if (!(config.p0 > 0.0)) throw InvalidArgument("p0 must be positive");
    if (!(config.mu > 0.0)) throw InvalidArgument("mu must be positive");
    if (!(config.sigma >= 0.0)) throw InvalidArgument("sigma must be non-negative");
    if (!(config.n >= 0.0)) throw InvalidArgument("n must be non-negative");
    if (!(config.dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (config.max_steps < 1) throw InvalidArgument("max_steps must be at least 1");
    if (!(config.denominator_floor > 0.0)) throw InvalidArgument("denominator floor must be positive");

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sqrt_dt = std::sqrt(config.dt);

    SimulatedPath path;
    path.log_prices.reserve(std::min<std::size_t>(config.max_steps + 1, 1u << 16));

    const double log_p0 = std::log(config.p0);
    double w = 0.0;

    if (config.n == 0.0) {
        path.log_prices.push_back(log_p0);
        for (std::size_t k = 1; k <= config.max_steps; ++k) {
            w += sqrt_dt * gauss(rng);
            const double t = static_cast<double>(k) * config.dt;
            path.log_prices.push_back(log_p0 + config.mu * t + config.sigma * w);
        }
        return path;
    }

    const double n = config.n;
    const double start = std::pow(config.p0, -n);  // n mu t_c
    path.log_prices.push_back(log_p0);
    for (std::size_t k = 1; k <= config.max_steps; ++k) {
        w += sqrt_dt * gauss(rng);
        const double t = static_cast<double>(k) * config.dt;
        const double denominator = start - n * config.mu * t - n * config.sigma * w;
        if (denominator <= config.denominator_floor) {
            path.log_prices.push_back(-std::log(config.denominator_floor) / n);
            path.hit_critical = true;
            path.critical_time_index = k;
            return path;
        }
        path.log_prices.push_back(-std::log(denominator) / n);
    }
    return path;
}

double InverseGaussian::cdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    const double root = std::sqrt(shape / x);
    const double first = normal_cdf(root * (x / mean - 1.0));
    const double log_second = 2.0 * shape / mean + log_normal_upper_tail(root * (x / mean + 1.0));
    return std::min(1.0, first + std::exp(log_second));
}

InverseGaussian ig_params(double p0, double mu, double sigma, double n) {
    if (!(p0 > 0.0) || !(mu > 0.0) || !(sigma > 0.0) || !(n > 0.0)) {
        throw InvalidArgument("inverse Gaussian parameters need positive p0, mu, sigma and n");
    }
    const double level = std::pow(p0, -n);
    const double ratio = level / (n * sigma);
    return InverseGaussian{level / (n * mu), ratio * ratio};
}

}  // namespace bubblenet::model
