#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bubblenet::analysis {

/// 100 x largest peak-to-trough decline / series maximum.
double max_loss(std::span<const double> values);

/// Ascending ranks from 1; ties share the average rank.
std::vector<double> rank_transform(std::span<const double> values);

struct Coefficient {
    std::string name;
    double estimate;
    double std_error;
    double t_stat;
    double p_value;
    // "***" p < 0.01, "**" p < 0.05, "*" p < 0.1, else "".
    std::string stars;
};

struct RegressionResult {
    std::vector<Coefficient> coefficients;  // regressors only
    std::optional<Coefficient> intercept;
    double r_squared;
    double adj_r_squared;
    double f_statistic;
    double f_p_value;
    std::size_t observations;
    Eigen::VectorXd residuals;
};

std::string significance_stars(double p_value);

/// Least squares via column-pivoting Householder QR with classical standard
/// errors. `names` labels the columns of X (defaults to x1, x2, ...).
RegressionResult ols_regress(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool include_intercept = true,
                             std::vector<std::string> names = {});

struct CorrelationReport {
    double pearson;
    double spearman;
    double kendall;
};

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);
// Kendall tau-b.
double kendall(std::span<const double> x, std::span<const double> y);

CorrelationReport correlations(std::span<const double> x, std::span<const double> y);

}  // namespace bubblenet::analysis
