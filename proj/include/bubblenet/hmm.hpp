#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "bubblenet/model.hpp"
#include "bubblenet/series.hpp"

namespace bubblenet::hmm {

// 2x2 array indexed [previous state][current state]; state 0 is normal, 1 is bubble.
using StatePair = std::array<std::array<double, 2>, 2>;
using StateProb = std::array<double, 2>;

inline constexpr double kDensityFloor = 1e-300;

struct ModelParams {
    model::RegimeParams regime;
    // q[i][j] = P(s_t = j | s_{t-1} = i)
    StatePair q{{{0.95, 0.05}, {0.05, 0.95}}};

    void validate() const;
    // Stationary distribution of q; uniform when the chain never switches.
    StateProb stationary() const;
};

struct FilterOutput {
    // filtered[t] = P(s_t | y_0..y_t); entry 0 is the initial distribution.
    std::vector<StateProb> filtered;
    // pairwise[t][i][j] = P(s_{t-1} = i, s_t = j | y_0..y_t) for t >= 1.
    // Entry 0 is diag(initial) so every entry is a distribution.
    std::vector<StatePair> pairwise;
    double loglik = 0.0;

    std::vector<double> bubble_probability() const;
};

struct SmootherOutput {
    // smoothed[t] = P(s_t | y_0..y_T)
    std::vector<StateProb> smoothed;
    // pairwise[t][i][j] = P(s_{t-1} = i, s_t = j | y_0..y_T), the weights w_{(i,j);t}.
    // Entry 0 is diag(smoothed[0]).
    std::vector<StatePair> pairwise;

    std::vector<double> bubble_probability() const;
};

// Floored log transition densities ln max(f_ij(y_t | y_{t-1}), 1e-300) for t >= 1.
// Entry 0 is unused and zero. Pair (0,0) is the GBM density, (1,1) the bubble
// density, (1,0) bubble end and (0,1) bubble start.
std::vector<StatePair> transition_logdensities(const LogPriceSeries& series, const ModelParams& params);

/// Arithmetic mean of log prices over a trailing window, i.e. a geometric
/// average of prices. Output dates are the right edges of the windows.
LogPriceSeries geometric_average_filter(const LogPriceSeries& series, std::size_t window = 100);

/// Hamilton forward filter: prediction with q, update with the regime-pair
/// densities (floored at 1e-300), summation over the previous state.
FilterOutput hamilton_filter(const LogPriceSeries& series, const ModelParams& params, StateProb initial);

enum class SmootherRule {
    // Conditions the backward ratio on the pairwise filtered posterior at t+1,
    // which is exact when emissions depend on the state pair.
    exact_pairwise,
    // Conditions on the one-step prediction from P(s_t | y_0..y_t) only.
    kim_prediction,
};

/// Backward smoothing pass. Throws NumericalFailure naming the step when a
/// backward ratio has a zero denominator with non-zero smoothed mass.
SmootherOutput kim_smoother(const FilterOutput& filter, const ModelParams& params,
                            SmootherRule rule = SmootherRule::exact_pairwise);

// ---- M-step -------------------------------------------------------------

struct NormalUpdate {
    double mu0;
    double sigma0;
};

struct BubbleUpdate {
    double mu1;
    double sigma1;
};

/// Weighted return moments under w_{(0,0);t}. Throws DegenerateRegime on zero weight.
NormalUpdate update_normal_regime(const SmootherOutput& smoother, const LogPriceSeries& series);

/// mu1 from the weighted mean decrement of p^{-n}, then sigma1 around it,
/// both under w_{(1,1);t} at the given n. Throws DegenerateRegime on zero weight.
BubbleUpdate update_bubble_regime(const SmootherOutput& smoother, const LogPriceSeries& series, double n);

/// q_ij = sum_t w_{(i,j);t} / sum_t P(s_{t-1} = i | y_0..y_T).
StatePair update_transitions(const SmootherOutput& smoother);

struct MStepResult {
    double mu0;
    double sigma0;
    double mu1;
    double sigma1;
    StatePair q;
};

/// The closed-form updates at fixed n.
MStepResult m_step(const SmootherOutput& smoother, const LogPriceSeries& series, double current_n);

// ---- expected complete-data log-likelihood ------------------------------

// sum_t w_{(0,0);t} ln f_gbm(y_t | y_{t-1}; mu0, sigma0)
double normal_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double mu0, double sigma0);

// sum_t w_{(1,1);t} ln f_bubble(y_t | y_{t-1}; mu1, sigma1, n)
double bubble_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double mu1,
                        double sigma1, double n);

// sum_t sum_ij w_{(i,j);t} ln q_ij
double transition_objective(const SmootherOutput& smoother, const StatePair& q);

/// Every term of the expected complete-data log-likelihood under `params`:
/// regime densities, switch densities, transitions and the stationary initial
/// state. All densities are floored exactly as in the filter.
double expected_complete_loglik(const SmootherOutput& smoother, const LogPriceSeries& series,
                                const ModelParams& params);

// ---- feedback exponent --------------------------------------------------

/// Left-hand side of the first-order condition in n:
///   sum_t w_{(1,1);t} [ -(z_t - z_{t-1} + n mu1)(-z_t y_t + z_{t-1} y_{t-1} + mu1) / (n sigma1)^2
///                       + 1/n - y_t ],   z_t = p_t^{-n}.
double feedback_exponent_residual(const SmootherOutput& smoother, const LogPriceSeries& series, double n,
                                  double mu1, double sigma1);

/// Bubble objective with mu1 and sigma1 at their closed-form optimum for n.
/// Returns -infinity where p^{-n} leaves the representable range.
double profiled_bubble_objective(const SmootherOutput& smoother, const LogPriceSeries& series, double n);

struct ExponentSearch {
    double n_min = 1e-4;
    double n_max = 10.0;
};

struct ExponentSolution {
    double n;
    // Closed-form mu1 and sigma1 at n.
    double mu1;
    double sigma1;
    // First-order residual at (n, mu1, sigma1).
    double residual;
    // True when n is a root found inside a sign-change bracket; false for the
    // golden-section fallback.
    bool bracketed;
};

/// Solves the first-order condition in n with mu1 and sigma1 profiled out,
/// i.e. set to their closed forms at each candidate n. Brackets sign changes
/// on a log-spaced grid and bisects to |residual| < 1e-8; without a sign change
/// it maximizes the profiled objective by golden-section search.
ExponentSolution solve_feedback_exponent(const SmootherOutput& smoother, const LogPriceSeries& series,
                                         ExponentSearch search = {});

// ---- EM -----------------------------------------------------------------

struct EMConfig {
    double tolerance = 1e-4;
    std::size_t max_iterations = 500;
    ExponentSearch n_search;
    double kappa = 0.6;
    double q00 = 0.95;
    double q11 = 0.95;
    double initial_n = 0.5;
    SmootherRule smoother_rule = SmootherRule::exact_pairwise;
    // Also start from full-sample bubble moments and keep the better fit.
    bool multi_start = true;

    void validate() const;
};

struct IterationRecord {
    ModelParams params;
    double loglik;
    // |ln L_k - ln L_{k-1}| / |ln L_{k-1}|; 0 on the first iteration.
    double delta;
};

struct EMTrace {
    std::vector<IterationRecord> records;
    std::size_t iterations = 0;
    bool converged = false;
};

struct FitResult {
    ModelParams params;
    EMTrace trace;
    FilterOutput filter;
    SmootherOutput smoother;
};

// Starting point: full-sample return moments for the normal regime, the
// top-decile returns mapped through p^{-n} for the bubble regime.
ModelParams initial_params(const LogPriceSeries& series, const EMConfig& config);

// initial_params() first; with multi_start, a second point whose bubble
// moments come from every step mapped through p^{-n}.
std::vector<ModelParams> initial_candidates(const LogPriceSeries& series, const EMConfig& config);

/// Expectation-maximization fit of the regime-switching model.
///
/// Each iteration filters and smooths under the current parameters, then
/// updates the normal regime, the bubble regime (mu1, sigma1, n jointly) and
/// q. A block update is kept only when it does not lower the expected
/// complete-data log-likelihood, which keeps ln L non-decreasing. Stops when
/// the relative change of ln L is at most `tolerance`. Runs from every
/// initial candidate and returns the fit with the highest final ln L.
FitResult em_fit(const LogPriceSeries& series, const EMConfig& config = {});

/// Fit starting from explicit parameters instead of initial_params().
FitResult em_fit(const LogPriceSeries& series, const EMConfig& config, const ModelParams& start);

// ---- statistics ---------------------------------------------------------

ProbabilitySeries bubble_series(const LogPriceSeries& series, std::span<const double> values);

// 100 x mean probability.
double bubble_time_fraction(const ProbabilitySeries& probs);

struct ThresholdFractions {
    double high_percent;
    double low_percent;
};

// Percent of values strictly above `hi` and strictly below `lo`.
ThresholdFractions threshold_fractions(const ProbabilitySeries& probs, double hi = 0.9, double lo = 0.1);

}  // namespace bubblenet::hmm
