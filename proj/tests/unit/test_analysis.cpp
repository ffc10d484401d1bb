#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "bubblenet/analysis.hpp"
#include "bubblenet/errors.hpp"
#include "support/oracles.hpp"

using namespace bubblenet;
using namespace bubblenet::analysis;

TEST(MaxLoss, Examples) {
    EXPECT_DOUBLE_EQ(max_loss(std::vector<double>{100, 80, 90, 60}), 40.0);
    EXPECT_EQ(max_loss(std::vector<double>{1, 2, 3, 4}), 0.0);
    // the drawdown after a later, higher peak is the larger one
    EXPECT_DOUBLE_EQ(max_loss(std::vector<double>{50, 40, 200, 150}), 25.0);
    EXPECT_THROW(max_loss(std::vector<double>{1, 0, 2}), InvalidArgument);
    EXPECT_THROW(max_loss(std::vector<double>{1}), InsufficientData);
}

TEST(MaxLoss, ScaleInvariantAndMatchesPairwiseDefinition) {
    std::mt19937_64 rng(6);
    std::lognormal_distribution<double> d(0.0, 0.3);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(30);
        for (double& x : v) x = d(rng);
        double drop = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            for (std::size_t j = i + 1; j < v.size(); ++j) drop = std::max(drop, v[i] - v[j]);
        }
        const double expected = 100.0 * drop / *std::max_element(v.begin(), v.end());
        EXPECT_NEAR(max_loss(v), expected, 1e-12);
        std::vector<double> scaled = v;
        for (double& x : scaled) x *= 37.5;
        EXPECT_NEAR(max_loss(scaled), max_loss(v), 1e-12);
    }
}

TEST(RankTransform, Examples) {
    EXPECT_EQ(rank_transform(std::vector<double>{3, 1, 2}), (std::vector<double>{3, 1, 2}));
    EXPECT_EQ(rank_transform(std::vector<double>{5, 5, 1}), (std::vector<double>{2.5, 2.5, 1}));
    EXPECT_EQ(rank_transform(std::vector<double>{7}), (std::vector<double>{1}));
}

TEST(RankTransform, SumIsTriangular) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> d(0, 5);
    for (std::size_t n = 1; n < 40; ++n) {
        std::vector<double> v(n);
        for (double& x : v) x = d(rng);
        const auto r = rank_transform(v);
        EXPECT_DOUBLE_EQ(std::accumulate(r.begin(), r.end(), 0.0), n * (n + 1) / 2.0);
    }
}

TEST(Ols, PerfectLine) {
    Eigen::VectorXd x(5), y(5);
    x << 0, 1, 2, 3, 4;
    y = 2 * x.array() + 1;
    const auto r = ols_regress(y, x);
    EXPECT_NEAR(r.coefficients[0].estimate, 2.0, 1e-12);
    EXPECT_NEAR(r.intercept->estimate, 1.0, 1e-12);
    EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
    EXPECT_EQ(r.coefficients[0].name, "x1");
}

TEST(Ols, OrthogonalRegressor) {
    Eigen::VectorXd x(4), y(4);
    x << -1, 1, -1, 1;
    y << 1, 1, 2, 2;
    const auto r = ols_regress(y, x);
    EXPECT_NEAR(r.coefficients[0].estimate, 0.0, 1e-14);
    EXPECT_NEAR(r.r_squared, 0.0, 1e-14);
}

TEST(Ols, MatchesNormalEquations) {
    std::mt19937_64 rng(777);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> cols(1, 4);
    for (int rep = 0; rep < 50; ++rep) {
        const int k = rep == 0 ? 3 : cols(rng);
        const int n = 20 + rep % 15;
        Eigen::MatrixXd X(n, k);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < k; ++j) X(i, j) = g(rng);
        }
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = 0.3 + X.row(i).sum() * 0.5 + g(rng);
        const bool intercept = rep % 5 != 4;
        const auto r = ols_regress(y, X, intercept);
        const auto o = oracle::normal_equations(y, X, intercept);
        const int offset = intercept ? 1 : 0;
        if (intercept) {
            EXPECT_NEAR(r.intercept->estimate, o.beta(0), 1e-8);
            EXPECT_NEAR(r.intercept->std_error, o.se(0), 1e-8);
        } else {
            EXPECT_FALSE(r.intercept.has_value());
        }
        for (int j = 0; j < k; ++j) {
            EXPECT_NEAR(r.coefficients[j].estimate, o.beta(j + offset), 1e-8);
            EXPECT_NEAR(r.coefficients[j].std_error, o.se(j + offset), 1e-8);
        }
        EXPECT_NEAR(r.r_squared, o.r2, 1e-8);
        EXPECT_NEAR(r.adj_r_squared, o.adj_r2, 1e-8);
        EXPECT_NEAR(r.f_statistic, o.f, 1e-8 * std::max(1.0, o.f));
        EXPECT_GE(r.r_squared, 0.0);
        EXPECT_LE(r.r_squared, 1.0);
        EXPECT_LE(r.adj_r_squared, r.r_squared);
        EXPECT_GE(r.f_statistic, 0.0);
        EXPECT_EQ(r.observations, static_cast<std::size_t>(n));

        // residuals orthogonal to every column and to the constant
        const Eigen::VectorXd e = r.residuals / y.norm();
        for (int j = 0; j < k; ++j) EXPECT_LT(std::abs(e.dot(X.col(j).normalized())), 1e-8);
        if (intercept) EXPECT_LT(std::abs(e.sum()), 1e-8);

        // p-values from an independent t distribution
        const double df = n - k - offset;
        boost::math::students_t t(df);
        for (const auto& c : r.coefficients) {
            const double p = 2 * boost::math::cdf(boost::math::complement(t, std::abs(c.estimate / c.std_error)));
            EXPECT_NEAR(c.p_value, p, 1e-10);
            EXPECT_EQ(c.stars, significance_stars(p));
        }
    }
}

TEST(Ols, CollinearityNamesColumn) {
    Eigen::MatrixXd X(6, 3);
    X << 1, 2, 3, 2, 1, 3, 3, 5, 8, 4, 4, 8, 5, 0, 5, 6, 1, 7;  // column 3 = column 1 + column 2
    Eigen::VectorXd y(6);
    y << 1, 2, 3, 4, 5, 7;
    try {
        ols_regress(y, X, true, {"a", "b", "c"});
        FAIL();
    } catch (const CollinearityError& e) {
        EXPECT_EQ(e.column(), 2u);
        EXPECT_NE(std::string(e.what()).find("c"), std::string::npos);
    }
    Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(6, 1);
    EXPECT_THROW(ols_regress(y, constant), CollinearityError);
}

TEST(Ols, TooFewObservations) {
    Eigen::MatrixXd X(3, 2);
    X << 1, 2, 3, 4, 5, 7;
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    EXPECT_THROW(ols_regress(y, X), InsufficientData);
    Eigen::VectorXd short_y(2);
    EXPECT_THROW(ols_regress(short_y, X), InvalidArgument);
}

TEST(Stars, Thresholds) {
    EXPECT_EQ(significance_stars(0.005), "***");
    EXPECT_EQ(significance_stars(0.03), "**");
    EXPECT_EQ(significance_stars(0.07), "*");
    EXPECT_EQ(significance_stars(0.2), "");
}

TEST(Correlation, IdenticalAndReversed) {
    const std::vector<double> x{1, 4, 2, 8, 5};
    const auto same = correlations(x, x);
    EXPECT_NEAR(same.pearson, 1.0, 1e-15);
    EXPECT_NEAR(same.spearman, 1.0, 1e-15);
    EXPECT_NEAR(same.kendall, 1.0, 1e-15);
    const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 9, 7, 3, 0};
    const auto rev = correlations(a, b);
    EXPECT_LE(rev.pearson, 0.0);
    EXPECT_NEAR(rev.spearman, -1.0, 1e-15);
    EXPECT_NEAR(rev.kendall, -1.0, 1e-15);
}

TEST(Correlation, SpearmanIsPearsonOnRanks) {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> d(0, 6);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> x(12), y(12);
        for (auto& v : x) v = d(rng);
        for (auto& v : y) v = d(rng);
        if (*std::min_element(x.begin(), x.end()) == *std::max_element(x.begin(), x.end())) continue;
        if (*std::min_element(y.begin(), y.end()) == *std::max_element(y.begin(), y.end())) continue;
        EXPECT_EQ(spearman(x, y), pearson(rank_transform(x), rank_transform(y)));
        const double k = kendall(x, y);
        EXPECT_GE(k, -1.0);
        EXPECT_LE(k, 1.0);
    }
}

TEST(Correlation, KendallTauBWithTies) {
    // pair counts straight from the tau-b definition
    const std::vector<double> x{1, 2, 2, 3, 4}, y{1, 3, 2, 2, 5};
    int c = 0, dis = 0, tx = 0, ty = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = i + 1; j < 5; ++j) {
            const double s = (x[i] - x[j]) * (y[i] - y[j]);
            if (x[i] == x[j] && y[i] != y[j]) ++tx;
            else if (y[i] == y[j] && x[i] != x[j]) ++ty;
            else if (s > 0) ++c;
            else if (s < 0) ++dis;
        }
    }
    const double expected = (c - dis) / std::sqrt(double(c + dis + tx) * double(c + dis + ty));
    EXPECT_NEAR(kendall(x, y), expected, 1e-15);
}

TEST(Correlation, ZeroVarianceIsUndefined) {
    const std::vector<double> flat{2, 2, 2}, x{1, 2, 3};
    EXPECT_THROW(pearson(flat, x), UndefinedCorrelation);
    EXPECT_THROW(spearman(x, flat), UndefinedCorrelation);
    EXPECT_THROW(kendall(flat, x), UndefinedCorrelation);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), InsufficientData);
    EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), InvalidArgument);
}
