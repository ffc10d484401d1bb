#include "bubblenet/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "bubblenet/errors.hpp"

namespace bubblenet::hmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogFloor = std::log(kDensityFloor);
constexpr double kExponentClamp = 700.0;
// Below this total posterior weight EM treats a regime as unoccupied.
constexpr double kMinRegimeWeight = 1e-10;

double floored(double log_density) { return std::max(log_density, kLogFloor); }

void check_alignment(const SmootherOutput& smoother, const LogPriceSeries& series) {
    if (smoother.pairwise.size() != series.size() || smoother.smoothed.size() != series.size()) {
        throw InvalidArgument("smoother output does not match the series length");
    }
}

double regime_weight(const SmootherOutput& smoother, int state) {
    double total = 0.0;
    for (std::size_t t = 1; t < smoother.pairwise.size(); ++t) {
        total += smoother.pairwise[t][state][state];
    }
    return total;
}

// p_t^{-n} for every t, or empty when some exponent leaves [-700, 700].
std::vector<double> inverse_powers(const LogPriceSeries& series, double n) {
    std::vector<double> z(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double a = -n * series[t];
        if (std::abs(a) > kExponentClamp) return {};
        z[t] = std::exp(a);
    }
    return z;
}

double sigma0_at(const SmootherOutput& smoother, const LogPriceSeries& series, double mu0) {
    double weight = 0.0;
    double acc = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double w = smoother.pairwise[t][0][0];
        const double e = series[t] - series[t - 1] - mu0;
        weight += w;
        acc += w * e * e;
    }
    return std::sqrt(acc / weight);
}

double sigma1_at(const SmootherOutput& smoother, std::span<const double> z, double mu1, double n) {
    double weight = 0.0;
    double acc = 0.0;
    for (std::size_t t = 1; t < z.size(); ++t) {
        const double w = smoother.pairwise[t][1][1];
        const double r = z[t] - z[t - 1] + n * mu1;
        weight += w;
        acc += w * r * r;
    }
    return std::sqrt(acc / (n * n * weight));
}

BubbleUpdate bubble_update_from_powers(const SmootherOutput& smoother, std::span<const double> z, double n) {
    double weight = 0.0;
    double acc = 0.0;
    for (std::size_t t = 1; t < z.size(); ++t) {
        const double w = smoother.pairwise[t][1][1];
        weight += w;
        acc += w * (z[t - 1] - z[t]);
    }
    const double mu1 = acc / (n * weight);
    return {mu1, sigma1_at(smoother, z, mu1, n)};
}

bool is_distribution(const StateProb& p) {
    return p[0] >= 0.0 && p[1] >= 0.0 && std::abs(p[0] + p[1] - 1.0) <= 1e-12;
}

}  // namespace

void ModelParams::validate() const {
    regime.validate();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            if (!(q[i][j] >= 0.0 && q[i][j] <= 1.0)) {
                throw InvalidArgument("transition probability q" + std::to_string(i) + std::to_string(j) +
                                      " outside [0,1]");
            }
        }
        if (std::abs(q[i][0] + q[i][1] - 1.0) > 1e-12) {
            throw InvalidArgument("row " + std::to_string(i) + " of q does not sum to 1");
        }
    }
}

StateProb ModelParams::stationary() const {
    const double into_bubble = q[0][1];
    const double out_of_bubble = q[1][0];
    const double total = into_bubble + out_of_bubble;
    if (total <= 0.0) return {0.5, 0.5};
    return {out_of_bubble / total, into_bubble / total};
}

std::vector<double> FilterOutput::bubble_probability() const {
    std::vector<double> out(filtered.size());
    std::transform(filtered.begin(), filtered.end(), out.begin(), [](const StateProb& p) { return p[1]; });
    return out;
}

std::vector<double> SmootherOutput::bubble_probability() const {
    std::vector<double> out(smoothed.size());
    std::transform(smoothed.begin(), smoothed.end(), out.begin(), [](const StateProb& p) { return p[1]; });
    return out;
}

std::vector<StatePair> transition_logdensities(const LogPriceSeries& series, const ModelParams& params) {
    const auto& rp = params.regime;
    std::vector<StatePair> out(series.size(), StatePair{});
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double y = series[t];
        const double prev = series[t - 1];
        auto& ld = out[t];
        ld[0][0] = floored(model::gbm_transition_logdensity(y, prev, rp.mu0, rp.sigma0));
        ld[1][1] = floored(model::bubble_transition_logdensity(y, prev, rp.mu1, rp.sigma1, rp.n));
        ld[1][0] = floored(model::switch_logdensity(y, prev, model::SwitchDirection::bubble_end, rp));
        ld[0][1] = floored(model::switch_logdensity(y, prev, model::SwitchDirection::bubble_start, rp));
    }
    return out;
}

LogPriceSeries geometric_average_filter(const LogPriceSeries& series, std::size_t window) {
    if (window == 0) throw InvalidArgument("averaging window must be positive");
    if (series.size() < window) {
        throw InsufficientData("series '" + series.asset_id() + "' has " + std::to_string(series.size()) +
                               " points, fewer than the averaging window " + std::to_string(window));
    }
    const auto y = series.log_prices();
    const auto dates = series.timestamps();
    std::vector<double> averaged;
    std::vector<Date> edges;
    averaged.reserve(series.size() - window + 1);
    for (std::size_t end = window - 1; end < series.size(); ++end) {
        const auto first = y.begin() + static_cast<std::ptrdiff_t>(end + 1 - window);
        const double sum = std::accumulate(first, first + static_cast<std::ptrdiff_t>(window), 0.0);
        averaged.push_back(sum / static_cast<double>(window));
        edges.push_back(dates[end]);
    }
    return LogPriceSeries(series.asset_id(), std::move(edges), std::move(averaged));
}

FilterOutput hamilton_filter(const LogPriceSeries& series, const ModelParams& params, StateProb initial) {
    params.validate();
    if (!is_distribution(initial)) {
        throw InvalidArgument("initial state distribution must be non-negative and sum to 1");
    }
    const auto logf = transition_logdensities(series, params);
    const auto& q = params.q;

    FilterOutput out;
    out.filtered.resize(series.size());
    out.pairwise.resize(series.size());
    out.filtered[0] = initial;
    out.pairwise[0] = StatePair{{{initial[0], 0.0}, {0.0, initial[1]}}};

    for (std::size_t t = 1; t < series.size(); ++t) {
        const StateProb& prev = out.filtered[t - 1];
        StatePair predicted{};
        double shift = kNegInf;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                predicted[i][j] = q[i][j] * prev[i];
                if (predicted[i][j] > 0.0) shift = std::max(shift, logf[t][i][j]);
            }
        }
        StatePair joint{};
        double normalizer = 0.0;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                joint[i][j] = predicted[i][j] > 0.0 ? predicted[i][j] * std::exp(logf[t][i][j] - shift) : 0.0;
                normalizer += joint[i][j];
            }
        }
        if (!(normalizer > 0.0) || !std::isfinite(normalizer) || !std::isfinite(shift)) {
            throw NumericalFailure("filter normalizer is zero or non-finite", t);
        }
        for (auto& row : joint) {
            for (double& v : row) v /= normalizer;
        }
        out.pairwise[t] = joint;
        out.filtered[t] = {joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]};
        out.loglik += shift + std::log(normalizer);
    }
    return out;
}

SmootherOutput kim_smoother(const FilterOutput& filter, const ModelParams& params, SmootherRule rule) {
    const std::size_t size = filter.filtered.size();
    if (size == 0 || filter.pairwise.size() != size) {
        throw InvalidArgument("filter output is empty or inconsistent");
    }
    const auto& q = params.q;
    SmootherOutput out;
    out.smoothed.resize(size);
    out.pairwise.resize(size);
    out.smoothed[size - 1] = filter.filtered[size - 1];

    for (std::size_t t = size - 1; t >= 1; --t) {
        const StateProb& later = out.smoothed[t];
        StatePair joint{};
        for (int j = 0; j < 2; ++j) {
            // Conditional law of s_{t-1} given s_t = j, as a 2-vector over i.
            StateProb weights{};
            double denominator = 0.0;
            for (int i = 0; i < 2; ++i) {
                weights[i] = rule == SmootherRule::exact_pairwise ? filter.pairwise[t][i][j]
                                                                  : filter.filtered[t - 1][i] * q[i][j];
                denominator += weights[i];
            }
            if (denominator > 0.0) {
                for (int i = 0; i < 2; ++i) joint[i][j] = weights[i] / denominator * later[j];
            } else if (later[j] > 0.0) {
                throw NumericalFailure("smoother backward ratio has a zero denominator", t);
            }
        }
        out.pairwise[t] = joint;
        // Rounding can push a two-term sum one ulp past 1.
        out.smoothed[t - 1] = {std::min(1.0, joint[0][0] + joint[0][1]), std::min(1.0, joint[1][0] + joint[1][1])};
    }
    out.pairwise[0] = StatePair{{{out.smoothed[0][0], 0.0}, {0.0, out.smoothed[0][1]}}};
    return out;
}

NormalUpdate update_normal_regime(const SmootherOutput& smoother, const LogPriceSeries& series) {
    check_alignment(smoother, series);
    const double weight = regime_weight(smoother, 0);
    if (!(weight > 0.0)) throw DegenerateRegime("normal regime has zero posterior weight", 0);
    double acc = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
        acc += smoother.pairwise[t][0][0] * (series[t] - series[t - 1]);
    }
    const double mu0 = acc / weight;
    return {mu0, sigma0_at(smoother, series, mu0)};
}

BubbleUpdate update_bubble_regime(const SmootherOutput& smoother, const LogPriceSeries& series, double n) {
    check_alignment(smoother, series);
    if (!(n > 0.0)) throw InvalidArgument("n must be positive");
    if (!(regime_weight(smoother, 1) > 0.0)) {
        throw DegenerateRegime("bubble regime has zero posterior weight", 1);
    }
    const auto z = inverse_powers(series, n);
    if (z.empty()) throw InvalidArgument("p^{-n} overflows for n = " + std::to_string(n));
    return bubble_update_from_powers(smoother, z, n);
}

StatePair update_transitions(const SmootherOutput& smoother) {
    StatePair counts{};
    for (std::size_t t = 1; t < smoother.pairwise.size(); ++t) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) counts[i][j] += smoother.pairwise[t][i][j];
        }
    }
    StatePair q{};
    for (int i = 0; i < 2; ++i) {
        const double row = counts[i][0] + counts[i][1];
        if (!(row > 0.0)) throw DegenerateRegime("state " + std::to_string(i) + " is never occupied", i);
        q[i][0] = counts[i][0] / row;
        q[i][1] = 1.0 - q[i][0];
    }
    return q;
}

MStepResult m_step(const SmootherOutput& smoother, const LogPriceSeries& series, double current_n) {
    const auto normal = update_normal_regime(smoother, series);
    const auto bubble = update_bubble_regime(smoother, series, current_n);
    return {normal.mu0, normal.sigma0, bubble.mu1, bubble.sigma1, update_transitions(smoother)};
}

double normal_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double mu0, double sigma0) {
    check_alignment(smoother, series);
    double total = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double w = smoother.pairwise[t][0][0];
        if (w != 0.0) total += w * model::gbm_transition_logdensity(series[t], series[t - 1], mu0, sigma0);
    }
    return total;
}

double bubble_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double mu1, double sigma1,
                        double n) {
    check_alignment(smoother, series);
    double total = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double w = smoother.pairwise[t][1][1];
        if (w != 0.0) {
            total += w * model::bubble_transition_logdensity(series[t], series[t - 1], mu1, sigma1, n);
        }
    }
    return total;
}

double transition_objective(const SmootherOutput& smoother, const StatePair& q) {
    double total = 0.0;
    for (std::size_t t = 1; t < smoother.pairwise.size(); ++t) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                const double w = smoother.pairwise[t][i][j];
                if (w != 0.0) total += w * std::log(q[i][j]);
            }
        }
    }
    return total;
}

double expected_complete_loglik(const SmootherOutput& smoother, const LogPriceSeries& series,
                                const ModelParams& params) {
    check_alignment(smoother, series);
    const auto logf = transition_logdensities(series, params);
    double total = transition_objective(smoother, params.q);
    for (std::size_t t = 1; t < series.size(); ++t) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) total += smoother.pairwise[t][i][j] * logf[t][i][j];
        }
    }
    const StateProb initial = params.stationary();
    for (int i = 0; i < 2; ++i) {
        if (smoother.smoothed[0][i] != 0.0) total += smoother.smoothed[0][i] * std::log(initial[i]);
    }
    return total;
}

double feedback_exponent_residual(const SmootherOutput& smoother, const LogPriceSeries& series, double n,
                                  double mu1, double sigma1) {
    check_alignment(smoother, series);
    const auto z = inverse_powers(series, n);
    if (z.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double scale = n * sigma1;
    double total = 0.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double w = smoother.pairwise[t][1][1];
        if (w == 0.0) continue;
        const double r = z[t] - z[t - 1] + n * mu1;
        const double dr = -z[t] * series[t] + z[t - 1] * series[t - 1] + mu1;
        total += w * (-(r * dr) / (scale * scale) + 1.0 / n - series[t]);
    }
    return total;
}

double profiled_bubble_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double n) {
    check_alignment(smoother, series);
    const auto z = inverse_powers(series, n);
    if (z.empty() || !(regime_weight(smoother, 1) > 0.0)) return kNegInf;
    const auto update = bubble_update_from_powers(smoother, z, n);
    if (!(update.sigma1 > 0.0) || !std::isfinite(update.sigma1)) return kNegInf;
    return bubble_objective(smoother, series, update.mu1, update.sigma1, n);
}

namespace {

struct ProfiledPoint {
    double n;
    double objective;
    double residual;
};

ProfiledPoint evaluate_profiled(const SmootherOutput& smoother, const LogPriceSeries& series, double n) {
    const auto z = inverse_powers(series, n);
    if (z.empty()) return {n, kNegInf, std::numeric_limits<double>::quiet_NaN()};
    const auto update = bubble_update_from_powers(smoother, z, n);
    if (!(update.sigma1 > 0.0) || !std::isfinite(update.sigma1)) {
        return {n, kNegInf, std::numeric_limits<double>::quiet_NaN()};
    }
    return {n, bubble_objective(smoother, series, update.mu1, update.sigma1, n),
            feedback_exponent_residual(smoother, series, n, update.mu1, update.sigma1)};
}

ExponentSolution finish(const SmootherOutput& smoother, const LogPriceSeries& series, double n, bool bracketed) {
    const auto update = update_bubble_regime(smoother, series, n);
    return {n, update.mu1, update.sigma1,
            feedback_exponent_residual(smoother, series, n, update.mu1, update.sigma1), bracketed};
}

}  // namespace

ExponentSolution solve_feedback_exponent(const SmootherOutput& smoother, const LogPriceSeries& series,
                                         ExponentSearch search) {
    check_alignment(smoother, series);
    if (!(search.n_min > 0.0) || !(search.n_max > search.n_min)) {
        throw InvalidArgument("n search interval must satisfy 0 < n_min < n_max");
    }
    if (!(regime_weight(smoother, 1) > 0.0)) {
        throw DegenerateRegime("bubble regime has zero posterior weight", 1);
    }

    constexpr std::size_t kGrid = 64;
    std::vector<ProfiledPoint> grid;
    grid.reserve(kGrid);
    const double log_lo = std::log(search.n_min);
    const double log_hi = std::log(search.n_max);
    for (std::size_t k = 0; k < kGrid; ++k) {
        const double n = k + 1 == kGrid ? search.n_max
                                        : std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) /
                                                                static_cast<double>(kGrid - 1));
        grid.push_back(evaluate_profiled(smoother, series, n));
    }

    // Local maxima of the profiled objective sit where the residual falls through zero.
    std::optional<ProfiledPoint> best_root;
    for (std::size_t k = 0; k + 1 < kGrid; ++k) {
        if (!(grid[k].residual > 0.0 && grid[k + 1].residual < 0.0)) continue;
        double lo = grid[k].n;
        double hi = grid[k + 1].n;
        ProfiledPoint mid = grid[k];
        for (int iter = 0; iter < 400; ++iter) {
            mid = evaluate_profiled(smoother, series, 0.5 * (lo + hi));
            if (std::abs(mid.residual) < 1e-8 || !std::isfinite(mid.residual)) break;
            if (mid.residual > 0.0) lo = mid.n; else hi = mid.n;
            if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        }
        if (std::isfinite(mid.objective) && (!best_root || mid.objective > best_root->objective)) {
            best_root = mid;
        }
    }
    if (best_root) return finish(smoother, series, best_root->n, true);

    // No interior maximum bracketed: golden-section around the best grid point.
    const auto best = std::max_element(grid.begin(), grid.end(), [](const auto& a, const auto& b) {
        return a.objective < b.objective;
    });
    if (!std::isfinite(best->objective)) {
        throw NumericalFailure("profiled bubble objective is not finite anywhere in the n search interval", 0);
    }
    const std::size_t idx = static_cast<std::size_t>(best - grid.begin());
    double a = grid[idx == 0 ? 0 : idx - 1].n;
    double b = grid[std::min(idx + 1, kGrid - 1)].n;
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = evaluate_profiled(smoother, series, c).objective;
    double fd = evaluate_profiled(smoother, series, d).objective;
    for (int iter = 0; iter < 200 && (b - a) > 1e-14 * b; ++iter) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = evaluate_profiled(smoother, series, c).objective;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = evaluate_profiled(smoother, series, d).objective;
        }
    }
    double n = 0.5 * (a + b);
    if (!(evaluate_profiled(smoother, series, n).objective >= best->objective)) n = best->n;
    return finish(smoother, series, n, false);
}

void EMConfig::validate() const {
    if (!(tolerance > 0.0)) throw InvalidArgument("EM tolerance must be positive");
    if (max_iterations < 1) throw InvalidArgument("EM needs at least one iteration");
    if (!(n_search.n_min > 0.0) || !(n_search.n_max > n_search.n_min)) {
        throw InvalidArgument("n search interval must satisfy 0 < n_min < n_max");
    }
    if (!(kappa > 0.0)) throw InvalidArgument("kappa must be positive");
    if (!(q00 >= 0.0 && q00 <= 1.0 && q11 >= 0.0 && q11 <= 1.0)) {
        throw InvalidArgument("initial q00 and q11 must lie in [0,1]");
    }
    if (!(initial_n > 0.0)) throw InvalidArgument("initial n must be positive");
}

namespace {

// mu1, sigma1 from the decrements of p^{-n} over the given steps, at n = params.regime.n.
void set_bubble_moments(ModelParams& params, const LogPriceSeries& series, const std::vector<std::size_t>& steps) {
    const double n0 = params.regime.n;
    double d_mean = 0.0;
    double z_mean = 0.0;
    std::vector<double> decrements;
    for (std::size_t t : steps) {
        const double z_prev = std::exp(-n0 * series[t - 1]);
        const double z_now = std::exp(-n0 * series[t]);
        decrements.push_back(z_prev - z_now);
        d_mean += z_prev - z_now;
        z_mean += z_prev;
    }
    const double count = static_cast<double>(steps.size());
    d_mean /= count;
    z_mean /= count;
    double d_var = 0.0;
    for (double d : decrements) d_var += (d - d_mean) * (d - d_mean);
    d_var /= count;

    double mu1 = d_mean / n0;
    double sigma1 = std::sqrt(d_var) / n0;
    if (!(mu1 > 0.0) || !std::isfinite(mu1)) mu1 = std::max(std::abs(mu1), 1e-6);
    if (!std::isfinite(mu1)) mu1 = 1e-6;
    if (!(sigma1 > 0.0) || !std::isfinite(sigma1)) sigma1 = params.regime.sigma0 * z_mean;
    if (!(sigma1 > 0.0) || !std::isfinite(sigma1)) sigma1 = 1e-3;
    params.regime.mu1 = mu1;
    params.regime.sigma1 = sigma1;
}

}  // namespace

ModelParams initial_params(const LogPriceSeries& series, const EMConfig& config) {
    config.validate();
    const std::size_t steps = series.size() - 1;
    std::vector<double> returns(steps);
    for (std::size_t t = 1; t < series.size(); ++t) returns[t - 1] = series[t] - series[t - 1];

    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(steps);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(steps);

    ModelParams params;
    params.regime.mu0 = mean != 0.0 ? mean : 1e-8;
    params.regime.sigma0 = std::max(std::sqrt(var), 1e-8);
    params.regime.n = config.initial_n;
    params.regime.kappa = config.kappa;
    params.q = StatePair{{{config.q00, 1.0 - config.q00}, {1.0 - config.q11, config.q11}}};

    // Top decile of returns, at least two of them.
    std::vector<std::size_t> order(steps);
    std::iota(order.begin(), order.end(), std::size_t{1});
    const std::size_t take = std::min(steps, std::max<std::size_t>(2, (steps + 9) / 10));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return returns[a - 1] > returns[b - 1]; });
    order.resize(take);
    set_bubble_moments(params, series, order);
    params.validate();
    return params;
}

std::vector<ModelParams> initial_candidates(const LogPriceSeries& series, const EMConfig& config) {
    std::vector<ModelParams> out{initial_params(series, config)};
    if (!config.multi_start) return out;
    ModelParams all = out.front();
    std::vector<std::size_t> steps(series.size() - 1);
    std::iota(steps.begin(), steps.end(), std::size_t{1});
    set_bubble_moments(all, series, steps);
    all.validate();
    out.push_back(all);
    return out;
}

namespace {

// One generalized M-step: every block is moved to its closed-form value when
// that does not lower the expected complete-data log-likelihood.
ModelParams improve(const SmootherOutput& smoother, const LogPriceSeries& series, const ModelParams& current,
                    const EMConfig& config) {
    ModelParams accepted = current;
    double accepted_value = expected_complete_loglik(smoother, series, accepted);

    auto try_accept = [&](const ModelParams& candidate) {
        try {
            candidate.validate();
        } catch (const InvalidArgument&) {
            return false;
        }
        const double value = expected_complete_loglik(smoother, series, candidate);
        if (value >= accepted_value) {
            accepted = candidate;
            accepted_value = value;
            return true;
        }
        return false;
    };

    if (regime_weight(smoother, 0) > kMinRegimeWeight) {
        const auto normal = update_normal_regime(smoother, series);
        ModelParams candidate = accepted;
        candidate.regime.mu0 = normal.mu0;
        candidate.regime.sigma0 = normal.sigma0;
        if (!try_accept(candidate)) {
            candidate = accepted;
            candidate.regime.sigma0 = sigma0_at(smoother, series, accepted.regime.mu0);
            try_accept(candidate);
        }
    }

    if (regime_weight(smoother, 1) > kMinRegimeWeight) {
        bool moved = false;
        try {
            const auto solution = solve_feedback_exponent(smoother, series, config.n_search);
            ModelParams candidate = accepted;
            candidate.regime.n = solution.n;
            candidate.regime.mu1 = solution.mu1;
            candidate.regime.sigma1 = solution.sigma1;
            moved = try_accept(candidate);
        } catch (const NumericalFailure&) {
        }
        if (!moved) {
            const auto z = inverse_powers(series, accepted.regime.n);
            if (!z.empty()) {
                ModelParams candidate = accepted;
                candidate.regime.sigma1 = sigma1_at(smoother, z, accepted.regime.mu1, accepted.regime.n);
                try_accept(candidate);
            }
        }
    }

    try {
        ModelParams candidate = accepted;
        candidate.q = update_transitions(smoother);
        try_accept(candidate);
    } catch (const DegenerateRegime&) {
    }
    return accepted;
}

}  // namespace

FitResult em_fit(const LogPriceSeries& series, const EMConfig& config) {
    config.validate();
    if (series.size() < 10) {
        throw InsufficientData("EM needs at least 10 points, series '" + series.asset_id() + "' has " +
                               std::to_string(series.size()));
    }
    std::optional<FitResult> best;
    std::exception_ptr first_error;
    for (const auto& start : initial_candidates(series, config)) {
        try {
            FitResult fit = em_fit(series, config, start);
            if (!best || fit.filter.loglik > best->filter.loglik) best = std::move(fit);
        } catch (const NumericalFailure&) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (!best) std::rethrow_exception(first_error);
    return std::move(*best);
}

FitResult em_fit(const LogPriceSeries& series, const EMConfig& config, const ModelParams& start) {
    config.validate();
    if (series.size() < 10) {
        throw InsufficientData("EM needs at least 10 points, series '" + series.asset_id() + "' has " +
                               std::to_string(series.size()));
    }
    start.validate();

    FitResult result;
    ModelParams params = start;
    double previous = 0.0;
    for (std::size_t k = 0; k < config.max_iterations; ++k) {
        FilterOutput filter;
        SmootherOutput smoother;
        try {
            filter = hamilton_filter(series, params, params.stationary());
            smoother = kim_smoother(filter, params, config.smoother_rule);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure("EM iteration " + std::to_string(k) + ": " + e.what(), e.step());
        }

        const double loglik = filter.loglik;
        double delta = 0.0;
        if (k > 0) {
            const double scale = std::abs(previous);
            delta = scale > 0.0 ? std::abs(loglik - previous) / scale : std::abs(loglik - previous);
        }
        result.trace.records.push_back({params, loglik, delta});
        result.trace.iterations = k + 1;
        result.params = params;
        result.filter = std::move(filter);
        result.smoother = std::move(smoother);

        if (k > 0 && delta <= config.tolerance) {
            result.trace.converged = true;
            return result;
        }
        if (k + 1 == config.max_iterations) break;

        params = improve(result.smoother, series, params, config);
        previous = loglik;
    }
    return result;
}

ProbabilitySeries bubble_series(const LogPriceSeries& series, std::span<const double> values) {
    if (values.size() != series.size()) {
        throw InvalidArgument("probability values do not match the series length");
    }
    std::vector<double> clipped(values.begin(), values.end());
    for (double& v : clipped) v = std::clamp(v, 0.0, 1.0);
    return ProbabilitySeries(series.asset_id(), {series.timestamps().begin(), series.timestamps().end()},
                             std::move(clipped));
}

double bubble_time_fraction(const ProbabilitySeries& probs) {
    if (probs.empty()) throw InsufficientData("bubble time fraction of an empty series");
    const auto v = probs.values();
    return 100.0 * std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ThresholdFractions threshold_fractions(const ProbabilitySeries& probs, double hi, double lo) {
    if (!(0.0 <= lo && lo < hi && hi <= 1.0)) throw InvalidArgument("thresholds must satisfy 0 <= lo < hi <= 1");
    if (probs.empty()) throw InsufficientData("threshold fractions of an empty series");
    const auto v = probs.values();
    const auto above = std::count_if(v.begin(), v.end(), [hi](double p) { return p > hi; });
    const auto below = std::count_if(v.begin(), v.end(), [lo](double p) { return p < lo; });
    const double size = static_cast<double>(v.size());
    return {100.0 * static_cast<double>(above) / size, 100.0 * static_cast<double>(below) / size};
}

}  // namespace bubblenet::hmm
