#pragma once

#include <Eigen/Dense>

#include <vector>

namespace latentreg {

/// Ordinary least squares with an intercept prepended to the design.
struct OlsResult {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd t_values;
  Eigen::VectorXd p_values;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double r_squared = 0.0;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  Eigen::Index n_obs = 0;
  Eigen::Index n_params = 0;
  double aic = 0.0;
  double ci_level = 0.95;

  Eigen::Index residual_df() const { return n_obs - n_params; }
};

struct WlsResult {
  Eigen::VectorXd coefficients;  // intercept first
  double weighted_rss = 0.0;
  double weight_sum = 0.0;
};

struct PcaResult {
  Eigen::MatrixXd components;  // n_components x p, orthonormal rows
  Eigen::MatrixXd scores;      // n x n_components
  Eigen::VectorXd explained_variance;
  Eigen::RowVectorXd column_means;
};

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
};

/// One agglomeration step: clusters `a` < `b` (identified by their smallest
/// member index) merged at average-linkage distance `height`.
struct Merge {
  Eigen::Index a = 0;
  Eigen::Index b = 0;
  double height = 0.0;
};

struct ClusterAssignment {
  std::vector<int> labels;
  int n_clusters = 0;
  std::vector<Merge> merges;
};

/// `alpha` is one minus the confidence level of the reported intervals.
OlsResult ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  double alpha = 0.05);

/// Gaussian AIC up to constants: n ln(RSS/n) + 2 (q + 2).
double gaussian_aic(double rss, Eigen::Index n, Eigen::Index n_mean_params);

WlsResult wls_fit(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::VectorXd>& w, double ridge_eps);

double weighted_mean_fit(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& w);

PcaResult pca(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index n_components);

TTestResult welch_t_test(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

double pearson_corr(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Average-linkage agglomeration of the columns of X under 1 - |corr|.
ClusterAssignment hierarchical_cluster(const Eigen::Ref<const Eigen::MatrixXd>& X, int n_clusters);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student t distribution.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double prob, double df);

}  // namespace latentreg
