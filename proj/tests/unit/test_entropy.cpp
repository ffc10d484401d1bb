#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bubblenet/entropy.hpp"
#include "bubblenet/errors.hpp"
#include "support/oracles.hpp"

using namespace bubblenet;
using namespace bubblenet::te;

namespace {

std::vector<Date> days(std::size_t n) {
    std::vector<Date> d;
    for (std::size_t t = 0; t < n; ++t) d.push_back(Date(2006, 1, 2).plus_days(static_cast<int>(t)));
    return d;
}

ProbabilitySeries probs(const std::string& id, std::vector<double> v) { return {id, days(v.size()), std::move(v)}; }

// Bin centres, so discretize() returns the given bins.
ProbabilitySeries from_bins(const std::string& id, const std::vector<int>& bins, int b) {
    std::vector<double> v;
    for (int k : bins) v.push_back((k + 0.5) / b);
    return probs(id, v);
}

BinnedSeries uniform_bins(std::size_t n, int b, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, b - 1);
    BinnedSeries s;
    s.bin_count = b;
    for (std::size_t t = 0; t < n; ++t) s.bins.push_back(d(rng));
    return s;
}

// First-order chain that mostly stays in or next to its current bin.
std::vector<double> markov_probabilities(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v{0.5};
    while (v.size() < n) {
        const double step = u(rng) < 0.6 ? 0.0 : (u(rng) < 0.5 ? -0.1 : 0.1);
        v.push_back(std::clamp(v.back() + step, 0.05, 0.95));
    }
    return v;
}

}  // namespace

TEST(Discretize, BinEdges) {
    const std::vector<double> v{0.05, 0.10, 1.0, 0.999999, 0.0, 0.3, 0.7};
    const auto b = discretize(v, 10);
    EXPECT_EQ(b.bins, (std::vector<int>{0, 1, 9, 9, 0, 3, 7}));
    EXPECT_EQ(b.bin_count, 10);
    EXPECT_THROW(discretize(std::vector<double>{1.01}, 10), InvalidArgument);
    EXPECT_THROW(discretize(std::vector<double>{-0.01}, 10), InvalidArgument);
    EXPECT_THROW(discretize(std::vector<double>{0.5}, 1), InvalidArgument);
}

TEST(Discretize, EntriesWithinRange) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(1000);
    for (double& x : v) x = u(rng);
    for (int b : {2, 3, 10, 17}) {
        for (int k : discretize(v, b).bins) {
            EXPECT_GE(k, 0);
            EXPECT_LT(k, b);
        }
    }
}

TEST(TransferEntropy, HandBuiltThreeBinPair) {
    // counts: six occupied triples over seven transitions
    const BinnedSeries u{{0, 1, 2, 1, 0, 1, 2, 2}, 3};
    const BinnedSeries v{{1, 0, 1, 2, 2, 0, 1, 0}, 3};
    const double expected = (1.0 / 7.0) * std::log10(3.0) + (2.0 / 7.0) * std::log10(1.5);
    EXPECT_NEAR(transfer_entropy(u, v), expected, 1e-15);
    EXPECT_NEAR(sii(from_bins("x", v.bins, 3), from_bins("y", u.bins, 3), {3, 10.0, {}}), expected, 1e-15);
}

TEST(TransferEntropy, ConstantTargetIsZero) {
    std::mt19937_64 rng(4);
    const BinnedSeries u{std::vector<int>(200, 4), 10};
    EXPECT_EQ(transfer_entropy(u, uniform_bins(200, 10, rng)), 0.0);
    EXPECT_EQ(sii(probs("x", markov_probabilities(100, rng)), probs("y", std::vector<double>(100, 0.42))), 0.0);
}

TEST(TransferEntropy, IndependentAndCopiedPairs) {
    std::mt19937_64 rng(2718);
    const auto u = uniform_bins(10000, 10, rng);
    const auto v = uniform_bins(10000, 10, rng);
    EXPECT_LT(transfer_entropy(u, v), 0.02);

    BinnedSeries copy{{0}, 10};
    for (std::size_t t = 1; t < v.size(); ++t) copy.bins.push_back(v.bins[t - 1]);
    const double te = transfer_entropy(copy, v);
    EXPECT_GE(te, 0.95);
    EXPECT_LE(te, 1.0);
}

TEST(TransferEntropy, SelfInfluenceOfMarkovChainIsSmall) {
    std::mt19937_64 rng(12);
    const auto x = probs("x", markov_probabilities(2000, rng));
    EXPECT_LT(sii(x, x), 0.02);
}

TEST(TransferEntropy, MatchesBruteForceOracle) {
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<int> len(3, 50);
    for (int rep = 0; rep < 500; ++rep) {
        const int b = 2 + rep % 9;
        const auto n = static_cast<std::size_t>(len(rng));
        auto u = uniform_bins(n, b, rng);
        const auto v = uniform_bins(n, b, rng);
        if (rep % 3 == 0) {
            // some dependence so the value is not just noise
            for (std::size_t t = 1; t < n; ++t) {
                if (t % 2) u.bins[t] = v.bins[t - 1];
            }
        }
        for (double base : {10.0, 2.0, std::exp(1.0)}) {
            const double expected = oracle::brute_force_te(u.bins, v.bins, base);
            const auto detail = transfer_entropy_detail(JointHistogram::build(u, v), base);
            EXPECT_NEAR(detail.raw, expected, 1e-12) << rep;
            EXPECT_GE(transfer_entropy(u, v, base), 0.0);
        }
    }
}

TEST(TransferEntropy, InvariantUnderJointRelabeling) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        auto u = uniform_bins(300, 6, rng);
        auto v = uniform_bins(300, 6, rng);
        for (std::size_t t = 2; t < 300; t += 3) u.bins[t] = v.bins[t - 1];
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        BinnedSeries pu = u, pv = v;
        for (int& k : pu.bins) k = perm[k];
        for (int& k : pv.bins) k = perm[k];
        EXPECT_NEAR(transfer_entropy(pu, pv), transfer_entropy(u, v), 1e-14);
    }
}

TEST(JointHistogram, MarginalsAndNormalization) {
    std::mt19937_64 rng(5);
    const int b = 5;
    const auto u = uniform_bins(400, b, rng);
    const auto v = uniform_bins(400, b, rng);
    const auto h = JointHistogram::build(u, v);
    EXPECT_EQ(h.sample_size(), 399u);
    double triple = 0, np = 0, ps = 0, p = 0;
    for (int x = 0; x < b; ++x) {
        p += h.past(x);
        for (int y = 0; y < b; ++y) {
            np += h.now_past(x, y);
            ps += h.past_source(x, y);
            std::size_t over_now = 0, over_source = 0;
            for (int z = 0; z < b; ++z) {
                triple += h.triple(x, y, z);
                over_now += h.triple_count(z, x, y);
                over_source += h.triple_count(x, y, z);
            }
            EXPECT_EQ(over_now, h.past_source_count(x, y));
            EXPECT_EQ(over_source, h.now_past_count(x, y));
        }
    }
    EXPECT_NEAR(triple, 1.0, 1e-12);
    EXPECT_NEAR(np, 1.0, 1e-12);
    EXPECT_NEAR(ps, 1.0, 1e-12);
    EXPECT_NEAR(p, 1.0, 1e-12);
}

TEST(JointHistogram, RejectsMismatchedInput) {
    const BinnedSeries a{{0, 1, 0}, 2}, b{{0, 1}, 2}, c{{0, 1, 2}, 3};
    EXPECT_THROW(JointHistogram::build(a, b), InvalidArgument);
    EXPECT_THROW(JointHistogram::build(a, c), InvalidArgument);
    EXPECT_THROW(JointHistogram::build(b, b), InvalidArgument);
}

TEST(Sii, BubbleDaySubsampling) {
    std::mt19937_64 rng(9);
    std::vector<double> x = markov_probabilities(500, rng), y(500);
    y[0] = 0.5;
    for (std::size_t t = 1; t < 500; ++t) y[t] = x[t - 1];
    const auto px = probs("x", x), py = probs("y", y);
    SiiOptions opts;
    opts.bubble_day_threshold = 0.0;
    // a zero threshold keeps every transition
    EXPECT_DOUBLE_EQ(sii(px, py, opts), sii(px, py));
    opts.bubble_day_threshold = 0.5;
    std::vector<std::uint8_t> keep(500, 0);
    for (std::size_t t = 1; t < 500; ++t) keep[t] = x[t - 1] >= 0.5 && x[t] >= 0.5 && y[t - 1] >= 0.5 && y[t] >= 0.5;
    const auto h = JointHistogram::build(discretize(py), discretize(px), keep);
    EXPECT_EQ(sii(px, py, opts), transfer_entropy_detail(h).value);
}

TEST(Sii, AlignmentErrorNamesAssets) {
    const auto a = probs("alpha", {0.1, 0.2, 0.3});
    const ProbabilitySeries b("beta", {Date(2001, 1, 1), Date(2001, 1, 2), Date(2001, 1, 3)}, {0.1, 0.2, 0.3});
    try {
        sii(a, b);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
    }
}

TEST(SiiMatrixTest, ConstructionChecks) {
    EXPECT_THROW(SIIMatrix({"a", "b"}, {0, 1, 2}, ""), InvalidArgument);
    EXPECT_THROW(SIIMatrix({"a", "b"}, {0.1, 1, 2, 0}, ""), InvalidArgument);
    EXPECT_THROW(SIIMatrix({"a", "a"}, {0, 1, 2, 0}, ""), InvalidArgument);
    EXPECT_THROW(SIIMatrix({"a", "b"}, {0, NAN, 2, 0}, ""), InvalidArgument);
    const SIIMatrix m({"x", "y", "z"}, {0, 0.4, 0.2, 0.1, 0, 0, 0, 0.3, 0}, "w");
    EXPECT_DOUBLE_EQ(m("x", "y"), 0.4);
    EXPECT_THROW(m.index("q"), LookupError);
    EXPECT_THROW(nsii("x", "q", m), LookupError);
}

TEST(SiiMatrixTest, NsiiExamplesAndAntisymmetry) {
    const SIIMatrix m({"x", "y", "z"}, {0, 0.4, 0.2, 0.1, 0, 0, 0, 0.3, 0}, "w");
    EXPECT_NEAR(nsii("x", "y", m), 0.3, 1e-15);
    for (const auto& a : m.ids()) {
        EXPECT_EQ(nsii(a, a, m), 0.0);
        for (const auto& b : m.ids()) EXPECT_EQ(nsii(a, b, m), -nsii(b, a, m));
    }
}

TEST(SiiMatrixTest, EntriesMatchStandaloneAndOracle) {
    std::mt19937_64 rng(55);
    std::vector<ProbabilitySeries> assets;
    for (const char* id : {"a", "b", "c", "d", "e"}) assets.push_back(probs(id, markov_probabilities(300, rng)));
    const auto m = sii_matrix(assets);
    EXPECT_EQ(m.window(), assets[0].timestamps().front().iso() + ".." + assets[0].timestamps().back().iso());
    int pairs = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(m.at(i, i), 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            if (i == j) continue;
            ++pairs;
            EXPECT_EQ(m.at(i, j), sii(assets[i], assets[j]));
            const double oracle_value =
                oracle::brute_force_te(discretize(assets[j]).bins, discretize(assets[i]).bins, 10.0);
            EXPECT_NEAR(m.at(i, j), std::max(oracle_value, 0.0), 1e-12);
        }
    }
    EXPECT_EQ(pairs, 20);
}

TEST(SiiMatrixTest, IdenticalConstantSeriesGiveZeros) {
    std::vector<ProbabilitySeries> assets{probs("a", std::vector<double>(50, 0.3)),
                                          probs("b", std::vector<double>(50, 0.3))};
    const auto m = sii_matrix(assets);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(m.at(i, j), 0.0);
    }
    EXPECT_THROW(sii_matrix(std::span<const ProbabilitySeries>(assets.data(), 1)), InvalidArgument);
}
