#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "bubblenet/errors.hpp"
#include "bubblenet/model.hpp"
#include "support/oracles.hpp"

using namespace bubblenet;
using namespace bubblenet::model;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

TEST(GbmDensity, StandardNormalAtMode) {
    EXPECT_NEAR(gbm_transition_logdensity(0, 0, 0, 1), -kHalfLog2Pi, 1e-15);
    EXPECT_NEAR(gbm_transition_logdensity(0.3 + 0.7, 0.3, 0.7, 1), -kHalfLog2Pi, 1e-15);
    EXPECT_NEAR(gbm_transition_logdensity(-2.5 - 0.02, -2.5, -0.02, 1), -kHalfLog2Pi, 1e-15);
}

TEST(GbmDensity, IntegratesToOne) {
    for (double sigma : {0.001, 0.01, 0.2, 1.5}) {
        for (double mu : {-0.01, 0.0, 0.003}) {
            const double y_prev = 0.4;
            const double total = oracle::integrate(
                [&](double y) { return std::exp(gbm_transition_logdensity(y, y_prev, mu, sigma)); },
                y_prev + mu - 10 * sigma, y_prev + mu + 10 * sigma);
            EXPECT_NEAR(total, 1.0, 1e-6) << "sigma=" << sigma << " mu=" << mu;
        }
    }
}

TEST(GbmDensity, RejectsBadArguments) {
    EXPECT_THROW(gbm_transition_logdensity(0, 0, 0, 0), InvalidArgument);
    EXPECT_THROW(gbm_transition_logdensity(std::nan(""), 0, 0, 1), InvalidArgument);
    EXPECT_THROW(gbm_transition_logdensity(0, INFINITY, 0, 1), InvalidArgument);
}

TEST(BubbleDensity, UnitCase) {
    EXPECT_NEAR(bubble_transition_logdensity(0, 0, 0, 1, 1), -kHalfLog2Pi, 1e-15);
}

TEST(BubbleDensity, MatchesChangeOfVariablesOracle) {
    oracle::RegimeParams p{0.0, 1.0, 0.01, 0.05, 0.5, 0.6, {}};
    for (double y_prev : {-3.0, -0.5, 0.0, 0.7}) {
        for (double dy : {-0.05, -0.01, 0.0, 0.02, 0.1}) {
            const double expected = oracle::log_pair_density(1, 1, y_prev + dy, y_prev, p);
            EXPECT_NEAR(bubble_transition_logdensity(y_prev + dy, y_prev, p.mu1, p.sigma1, p.n), expected,
                        1e-9 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST(BubbleDensity, IntegratesToOneOnReferenceCase) {
    // y as a function of z = e^{-n y}; the Gaussian in z has mean z_prev - n mu1, sd n sigma1
    const double mu1 = 0.01, sigma1 = 0.05, n = 0.5, y_prev = 0.0;
    const double mean = 1.0 - n * mu1, sd = n * sigma1;
    const double y_lo = -std::log(mean + 10 * sd) / n;
    const double y_hi = -std::log(mean - 10 * sd) / n;
    const double total = oracle::integrate(
        [&](double y) { return std::exp(bubble_transition_logdensity(y, y_prev, mu1, sigma1, n)); }, y_lo, y_hi);
    EXPECT_NEAR(total, 1.0, 1e-5);
}

TEST(BubbleDensity, ApproachesGbmAsExponentVanishes) {
    // The gap shrinks linearly in n; at 1e-6 it is below 1e-4 on [-1,1]^2.
    for (double mu1 : {0.0, 0.1}) {
        for (double sigma1 : {0.5, 1.0}) {
            double worst_small = 0.0, worst_large = 0.0;
            for (int i = 0; i <= 20; ++i) {
                for (int j = 0; j <= 20; ++j) {
                    const double y_t = -1.0 + 0.1 * i, y_prev = -1.0 + 0.1 * j;
                    const double g = gbm_transition_logdensity(y_t, y_prev, mu1, sigma1);
                    worst_small = std::max(worst_small,
                                           std::abs(bubble_transition_logdensity(y_t, y_prev, mu1, sigma1, 1e-6) - g));
                    worst_large = std::max(worst_large,
                                           std::abs(bubble_transition_logdensity(y_t, y_prev, mu1, sigma1, 1e-4) - g));
                }
            }
            EXPECT_LT(worst_small, 1e-4);
            EXPECT_LT(worst_large, 1e-2);
            EXPECT_LT(worst_small, worst_large);
        }
    }
}

TEST(BubbleDensity, SaturatesToMinusInfinity) {
    EXPECT_EQ(bubble_transition_logdensity(800, 0, 0.01, 0.05, 1), kNegInf);
    EXPECT_EQ(bubble_transition_logdensity(0, -800, 0.01, 0.05, 1), kNegInf);
    // far tail: finite quadratic, log density very negative but never NaN
    const double v = bubble_transition_logdensity(-300, 0, 0.01, 1e-3, 2);
    EXPECT_FALSE(std::isnan(v));
    EXPECT_THROW(bubble_transition_logdensity(0, 0, 0.01, 0.05, 0), InvalidArgument);
    EXPECT_THROW(bubble_transition_logdensity(0, 0, 0.01, 0, 1), InvalidArgument);
}

TEST(SwitchDensity, Examples) {
    RegimeParams p;
    p.kappa = 1.0;
    p.mu0 = 0.5;
    EXPECT_NEAR(switch_logdensity(0.01, 0.02, SwitchDirection::bubble_end, p), std::log(2.0), 1e-15);
    EXPECT_EQ(switch_logdensity(0.03, 0.02, SwitchDirection::bubble_end, p), kNegInf);
    p.mu1 = 0.25;
    EXPECT_NEAR(switch_logdensity(0.03, 0.02, SwitchDirection::bubble_start, p), std::log(4.0), 1e-15);
}

TEST(SwitchDensity, SupportEdges) {
    RegimeParams p;
    p.kappa = 0.6;
    p.mu0 = -0.25;
    p.mu1 = 0.1;
    // bubble end needs -kappa <= y_t < y_prev
    EXPECT_NEAR(switch_logdensity(-0.6, 0.0, SwitchDirection::bubble_end, p), std::log(4.0), 1e-15);
    EXPECT_EQ(switch_logdensity(-0.61, 0.0, SwitchDirection::bubble_end, p), kNegInf);
    EXPECT_EQ(switch_logdensity(0.0, 0.0, SwitchDirection::bubble_end, p), kNegInf);
    // bubble start needs y_prev <= y_t <= kappa
    EXPECT_NEAR(switch_logdensity(0.0, 0.0, SwitchDirection::bubble_start, p), std::log(10.0), 1e-14);
    EXPECT_NEAR(switch_logdensity(0.6, 0.0, SwitchDirection::bubble_start, p), std::log(10.0), 1e-14);
    EXPECT_EQ(switch_logdensity(0.61, 0.0, SwitchDirection::bubble_start, p), kNegInf);
    p.mu0 = 0.0;
    EXPECT_THROW(switch_logdensity(0.0, 0.1, SwitchDirection::bubble_end, p), InvalidArgument);
    p.mu1 = 0.0;
    EXPECT_THROW(switch_logdensity(0.1, 0.0, SwitchDirection::bubble_start, p), InvalidArgument);
}

TEST(FtsPrice, ClosedForms) {
    EXPECT_NEAR(deterministic_fts_price(0.5, 1, 1, 1), 2.0, 1e-12);
    EXPECT_NEAR(deterministic_fts_price(0.5, 1, 2, 0.5), 4.0, 1e-12);
    EXPECT_EQ(deterministic_fts_price(0.0, 3.7, 0.2, 1.3), 3.7);
    EXPECT_NEAR(critical_time(2, 1, 1), 0.5, 1e-15);
}

TEST(FtsPrice, IncreasingAndDivergent) {
    double prev = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double p = deterministic_fts_price(k * 1e-3, 1, 1, 1);
        EXPECT_GT(p, prev);
        prev = p;
    }
    EXPECT_GT(deterministic_fts_price(1.0 - 1e-9, 1, 1, 1), 1e8);
}

TEST(FtsPrice, SingularityCarriesCriticalTime) {
    try {
        deterministic_fts_price(1.0, 1, 1, 1);
        FAIL() << "expected SingularityError";
    } catch (const SingularityError& e) {
        EXPECT_DOUBLE_EQ(e.critical_time(), 1.0);
    }
    // p0 = 2 halves the critical time
    EXPECT_THROW(deterministic_fts_price(0.5, 2, 1, 1), SingularityError);
    EXPECT_GT(deterministic_fts_price(0.49, 2, 1, 1), 2.0);
}

TEST(Simulation, NoiselessPathFollowsDeterministicSolution) {
    SimulationConfig c;
    c.p0 = 1;
    c.mu = 1;
    c.sigma = 0;
    c.n = 1;
    c.dt = 1e-3;
    c.max_steps = 5000;
    const auto path = simulate_sa_path(c);
    ASSERT_TRUE(path.hit_critical);
    const std::size_t last = *path.critical_time_index;
    for (std::size_t k = 0; k < last; ++k) {
        const double p = deterministic_fts_price(static_cast<double>(k) * c.dt, 1, 1, 1);
        EXPECT_NEAR(path.log_prices[k], std::log(p), 1e-9) << k;
    }
}

TEST(Simulation, ZeroExponentIsGeometricBrownianMotion) {
    // Recover W from an n = 1 path with the same seed, then check the n = 0 path.
    SimulationConfig c;
    c.p0 = 1.5;
    c.mu = 0.1;
    c.sigma = 0.2;
    c.dt = 1e-3;
    c.max_steps = 500;
    c.seed = 42;
    c.n = 1;
    const auto fts = simulate_sa_path(c);
    c.n = 0;
    const auto gbm = simulate_sa_path(c);
    ASSERT_FALSE(fts.hit_critical);
    ASSERT_EQ(fts.log_prices.size(), gbm.log_prices.size());
    for (std::size_t k = 0; k < gbm.log_prices.size(); ++k) {
        const double t = static_cast<double>(k) * c.dt;
        const double w = (1.0 / c.p0 - c.mu * t - std::exp(-fts.log_prices[k])) / c.sigma;
        EXPECT_NEAR(gbm.log_prices[k], std::log(c.p0) + c.mu * t + c.sigma * w, 1e-9) << k;
    }
}

TEST(Simulation, DeterministicForSeed) {
    SimulationConfig c;
    c.max_steps = 2000;
    c.seed = 9;
    EXPECT_EQ(simulate_sa_path(c).log_prices, simulate_sa_path(c).log_prices);
    c.seed = 10;
    const auto other = simulate_sa_path(c);
    c.seed = 9;
    EXPECT_NE(simulate_sa_path(c).log_prices, other.log_prices);
}

TEST(Simulation, CriticalPathsArePositiveAndHitMoreOftenWithLongerHorizons) {
    SimulationConfig c;
    c.p0 = 1;
    c.mu = 0.5;
    c.sigma = 0.5;
    c.n = 1;
    c.dt = 1e-2;
    int hits_short = 0, hits_long = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        c.seed = seed;
        c.max_steps = 100;
        hits_short += simulate_sa_path(c).hit_critical;
        c.max_steps = 5000;
        const auto path = simulate_sa_path(c);
        hits_long += path.hit_critical;
        if (path.hit_critical) {
            ASSERT_LT(*path.critical_time_index, path.log_prices.size());
            for (double y : path.log_prices) {
                ASSERT_TRUE(std::isfinite(y));
                ASSERT_GT(std::exp(y), 0.0);
            }
        }
    }
    EXPECT_LE(hits_short, hits_long);
    EXPECT_GE(hits_long, 198);
}

TEST(Simulation, RejectsBadConfig) {
    SimulationConfig c;
    c.dt = 0;
    EXPECT_THROW(simulate_sa_path(c), InvalidArgument);
    c = {};
    c.max_steps = 0;
    EXPECT_THROW(simulate_sa_path(c), InvalidArgument);
    c = {};
    c.p0 = -1;
    EXPECT_THROW(simulate_sa_path(c), InvalidArgument);
}

TEST(InverseGaussianParams, Examples) {
    auto a = ig_params(1, 1, 1, 1);
    EXPECT_DOUBLE_EQ(a.mean, 1);
    EXPECT_DOUBLE_EQ(a.shape, 1);
    auto b = ig_params(1, 0.5, 1, 1);
    EXPECT_DOUBLE_EQ(b.mean, 2);
    EXPECT_DOUBLE_EQ(b.shape, 1);
    auto c = ig_params(2, 1, 1, 1);
    EXPECT_DOUBLE_EQ(c.mean, 0.5);
    EXPECT_DOUBLE_EQ(c.shape, 0.25);
    EXPECT_THROW(ig_params(1, 0, 1, 1), InvalidArgument);
}

TEST(InverseGaussianParams, CdfIsMonotoneAndNormalized) {
    const auto ig = ig_params(1, 0.05, 0.1, 1);
    double prev = 0.0;
    for (double x = 0.5; x < 400; x *= 1.2) {
        const double f = ig.cdf(x);
        EXPECT_GE(f, prev);
        prev = f;
    }
    EXPECT_NEAR(prev, 1.0, 1e-9);
    EXPECT_EQ(ig.cdf(0.0), 0.0);
}
