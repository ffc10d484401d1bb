#include "bubblenet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "bubblenet/errors.hpp"

namespace bubblenet::analysis {

namespace {

// Relative pivot threshold below which a QR column counts as dependent.
constexpr double kRankTolerance = 1e-10;

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("correlation inputs differ in length");
    if (x.size() < 2) throw InsufficientData("correlation needs at least 2 observations");
}

Eigen::Index qr_rank(const Eigen::MatrixXd& a) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(kRankTolerance);
    return qr.rank();
}

}  // namespace

double max_loss(std::span<const double> values) {
    if (values.size() < 2) throw InsufficientData("max loss needs at least 2 values");
    double peak = 0.0;
    double top = 0.0;
    double drawdown = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        const double v = values[t];
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument("max loss needs positive values, got " + std::to_string(v) + " at index " +
                                  std::to_string(t));
        }
        peak = std::max(peak, v);
        top = std::max(top, v);
        drawdown = std::max(drawdown, peak - v);
    }
    return 100.0 * drawdown / top;
}

std::vector<double> rank_transform(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        // Ranks start..end-1 (0-based) share their mean, shifted to 1-based.
        const double shared = 0.5 * static_cast<double>(start + end + 1);
        for (std::size_t k = start; k < end; ++k) ranks[order[k]] = shared;
        start = end;
    }
    return ranks;
}

std::string significance_stars(double p_value) {
    if (p_value < 0.01) return "***";
    if (p_value < 0.05) return "**";
    if (p_value < 0.1) return "*";
    return "";
}

RegressionResult ols_regress(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool include_intercept,
                             std::vector<std::string> names) {
    const auto n = y.size();
    const auto k = X.cols();
    if (X.rows() != n) throw InvalidArgument("regressor rows do not match the response length");
    if (k < 1) throw InvalidArgument("regression needs at least one regressor");
    if (!(n > k + 1)) {
        throw InsufficientData("regression with " + std::to_string(k) + " regressors needs more than " +
                               std::to_string(k + 1) + " observations, got " + std::to_string(n));
    }
    if (names.empty()) {
        for (Eigen::Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names.size()) != k) throw InvalidArgument("one name per regressor column");
    if (!y.allFinite() || !X.allFinite()) throw InvalidArgument("regression inputs must be finite");

    const Eigen::Index offset = include_intercept ? 1 : 0;
    const Eigen::Index p = k + offset;
    Eigen::MatrixXd A(n, p);
    if (include_intercept) A.col(0).setOnes();
    A.rightCols(k) = X;

    // Name the first column that adds nothing to the span of those before it.
    if (qr_rank(A) < p) {
        for (Eigen::Index c = 0; c < p; ++c) {
            if (qr_rank(A.leftCols(c + 1)) < c + 1) {
                const std::string label = c < offset ? std::string("intercept") : names[c - offset];
                throw CollinearityError("regressor '" + label + "' is collinear with the preceding columns",
                                        static_cast<std::size_t>(c - offset));
            }
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(kRankTolerance);
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd residuals = y - A * beta;
    const double ssr = residuals.squaredNorm();
    const double df = static_cast<double>(n - p);

    // (A'A)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd perm = qr.colsPermutation();
    const Eigen::MatrixXd cov_unscaled = perm * (r_inv * r_inv.transpose()) * perm.transpose();
    const double sigma2 = ssr / df;

    const boost::math::students_t t_dist(df);
    auto coefficient = [&](Eigen::Index c, std::string name) {
        const double est = beta(c);
        const double se = std::sqrt(sigma2 * cov_unscaled(c, c));
        double t_stat = 0.0;
        double p_value = 1.0;
        if (se > 0.0) {
            t_stat = est / se;
            p_value = 2.0 * boost::math::cdf(boost::math::complement(t_dist, std::abs(t_stat)));
        } else if (est != 0.0) {
            t_stat = std::copysign(std::numeric_limits<double>::infinity(), est);
            p_value = 0.0;
        }
        return Coefficient{std::move(name), est, se, t_stat, p_value, significance_stars(p_value)};
    };

    RegressionResult out;
    out.observations = static_cast<std::size_t>(n);
    if (include_intercept) out.intercept = coefficient(0, "intercept");
    for (Eigen::Index j = 0; j < k; ++j) out.coefficients.push_back(coefficient(j + offset, names[j]));

    const double sst = include_intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
    if (!(sst > 0.0)) throw InvalidArgument("response has no variation to explain");
    out.r_squared = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
    const double dn = static_cast<double>(n);
    const double centred = include_intercept ? dn - 1.0 : dn;
    out.adj_r_squared = 1.0 - (1.0 - out.r_squared) * centred / df;
    const double explained = out.r_squared / static_cast<double>(k);
    const double unexplained = (1.0 - out.r_squared) / df;
    if (unexplained > 0.0) {
        out.f_statistic = explained / unexplained;
        const boost::math::fisher_f f_dist(static_cast<double>(k), df);
        out.f_p_value = boost::math::cdf(boost::math::complement(f_dist, out.f_statistic));
    } else {
        out.f_statistic = std::numeric_limits<double>::infinity();
        out.f_p_value = 0.0;
    }
    out.residuals = residuals;
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("Pearson correlation undefined: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = rank_transform(x);
    const auto ry = rank_transform(y);
    try {
        return pearson(rx, ry);
    } catch (const UndefinedCorrelation&) {
        throw UndefinedCorrelation("Spearman correlation undefined: zero variance");
    }
}

double kendall(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    long long concordant = 0;
    long long discordant = 0;
    long long tied_x = 0;
    long long tied_y = 0;
    long long pairs = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            ++pairs;
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0) ++tied_x;
            if (dy == 0.0) ++tied_y;
            if (dx == 0.0 || dy == 0.0) continue;
            if ((dx > 0.0) == (dy > 0.0)) ++concordant; else ++discordant;
        }
    }
    const double denom = std::sqrt(static_cast<double>(pairs - tied_x)) * std::sqrt(static_cast<double>(pairs - tied_y));
    if (!(denom > 0.0)) throw UndefinedCorrelation("Kendall tau-b undefined: a variable is constant");
    return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

CorrelationReport correlations(std::span<const double> x, std::span<const double> y) {
    return {pearson(x, y), spearman(x, y), kendall(x, y)};
}

}  // namespace bubblenet::analysis
