#include "latentreg/numstat.hpp"

#include "latentreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace latentreg {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  return A;
}

}  // namespace

double gaussian_aic(double rss, Eigen::Index n, Eigen::Index n_mean_params) {
  const double nn = static_cast<double>(n);
  const double ratio = std::max(rss / nn, std::numeric_limits<double>::min());
  return nn * std::log(ratio) + 2.0 * static_cast<double>(n_mean_params + 1);
}

OlsResult ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  double alpha) {
  const auto n = X.rows();
  const auto q = X.cols();
  if (y.size() != n) throw ConfigError("ols_fit: X and y row counts differ");
  if (n <= q + 1) throw ConfigError("ols_fit: need more observations than parameters (n > q + 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ols_fit: alpha must lie in (0, 1)");

  const Eigen::MatrixXd A = with_intercept(X);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < q + 1) throw RuntimeError("ols_fit: singular design matrix");

  OlsResult r;
  r.n_obs = n;
  r.n_params = q + 1;
  r.ci_level = 1.0 - alpha;
  r.coefficients = qr.solve(y);
  r.residuals = y - A * r.coefficients;
  r.rss = r.residuals.squaredNorm();
  const double df = static_cast<double>(n - q - 1);
  const double sigma2 = r.rss / df;

  const Eigen::MatrixXd gram = A.transpose() * A;
  const Eigen::MatrixXd gram_inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(q + 1, q + 1));
  const double t_crit = student_t_quantile(1.0 - alpha / 2.0, df);

  r.standard_errors.resize(q + 1);
  r.t_values.resize(q + 1);
  r.p_values.resize(q + 1);
  r.ci_lower.resize(q + 1);
  r.ci_upper.resize(q + 1);
  for (Eigen::Index k = 0; k <= q; ++k) {
    const double se = std::sqrt(std::max(0.0, sigma2 * gram_inv(k, k)));
    const double b = r.coefficients(k);
    r.standard_errors(k) = se;
    if (se > 0.0) {
      r.t_values(k) = b / se;
      r.p_values(k) = student_t_two_sided_p(r.t_values(k), df);
    } else {
      r.t_values(k) = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
      r.p_values(k) = b == 0.0 ? 1.0 : 0.0;
    }
    r.ci_lower(k) = b - t_crit * se;
    r.ci_upper(k) = b + t_crit * se;
  }

  const double tss = (y.array() - y.mean()).square().sum();
  r.r_squared = tss > 0.0 ? std::clamp(1.0 - r.rss / tss, 0.0, 1.0) : 0.0;
  r.aic = gaussian_aic(r.rss, n, q + 1);
  return r;
}

WlsResult wls_fit(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::VectorXd>& w, double ridge_eps) {
  const auto n = X.rows();
  const auto q = X.cols();
  if (y.size() != n || w.size() != n) throw ConfigError("wls_fit: size mismatch");
  if (!(ridge_eps >= 0.0)) throw ConfigError("wls_fit: ridge_eps must be non-negative");
  if ((w.array() < 0.0).any()) throw ConfigError("wls_fit: weights must be non-negative");

  const Eigen::MatrixXd A = with_intercept(X);
  Eigen::MatrixXd gram = A.transpose() * w.asDiagonal() * A;
  for (Eigen::Index k = 1; k <= q; ++k) gram(k, k) += ridge_eps;
  const Eigen::VectorXd rhs = A.transpose() * w.cwiseProduct(y);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 1e-14 * pivots.maxCoeff()))
    throw RuntimeError("wls_fit: singular weighted Gram matrix");

  WlsResult r;
  r.coefficients = ldlt.solve(rhs);
  const Eigen::VectorXd resid = y - A * r.coefficients;
  r.weighted_rss = w.dot(resid.cwiseAbs2());
  r.weight_sum = w.sum();
  return r;
}

double weighted_mean_fit(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (y.size() != w.size()) throw ConfigError("weighted_mean_fit: size mismatch");
  const double total = w.sum();
  if (!(total > 0.0)) throw ConfigError("weighted_mean_fit: weights sum to zero");
  return w.dot(y) / total;
}

PcaResult pca(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index n_components) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n_components < 1 || n_components > std::min(n, p))
    throw ConfigError("pca: n_components must lie in [1, min(n, p)]");

  PcaResult r;
  r.column_means = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - r.column_means;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::MatrixXd& V = svd.matrixV();

  r.components = V.leftCols(n_components).transpose();
  for (Eigen::Index c = 0; c < n_components; ++c) {
    Eigen::Index arg = 0;
    r.components.row(c).cwiseAbs().maxCoeff(&arg);
    if (r.components(c, arg) < 0.0) r.components.row(c) *= -1.0;
  }
  r.scores = centered * r.components.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  r.explained_variance = svd.singularValues().head(n_components).cwiseAbs2() / denom;
  return r;
}

TTestResult welch_t_test(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const auto na = a.size();
  const auto nb = b.size();
  if (na < 2 || nb < 2) throw ConfigError("welch_t_test: each group needs at least 2 values");
  const double ma = a.mean();
  const double mb = b.mean();
  const double va = (a.array() - ma).square().sum() / static_cast<double>(na - 1);
  const double vb = (b.array() - mb).square().sum() / static_cast<double>(nb - 1);
  const double sa = va / static_cast<double>(na);
  const double sb = vb / static_cast<double>(nb);
  const double se2 = sa + sb;

  TTestResult r;
  if (!(se2 > 0.0)) {
    r.degrees_of_freedom = static_cast<double>(na + nb - 2);
    if (ma == mb) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_statistic = (ma - mb) / std::sqrt(se2);
  r.degrees_of_freedom =
      se2 * se2 / (sa * sa / static_cast<double>(na - 1) + sb * sb / static_cast<double>(nb - 1));
  r.p_value = student_t_two_sided_p(r.t_statistic, r.degrees_of_freedom);
  return r;
}

double pearson_corr(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("pearson_corr: need two equal-length vectors");
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double na = std::sqrt(ca.square().sum());
  const double nb = std::sqrt(cb.square().sum());
  if (!(na > 0.0) || !(nb > 0.0)) throw ConfigError("pearson_corr: constant input");
  return std::clamp((ca * cb).sum() / (na * nb), -1.0, 1.0);
}

ClusterAssignment hierarchical_cluster(const Eigen::Ref<const Eigen::MatrixXd>& X, int n_clusters) {
  const auto p = X.cols();
  if (n_clusters < 1 || n_clusters > p) throw ConfigError("hierarchical_cluster: n_clusters must lie in [1, p]");

  for (Eigen::Index i = 0; i < p; ++i)
    if (!((X.col(i).array() - X.col(i).mean()).square().sum() > 0.0))
      throw ConfigError("hierarchical_cluster: variable " + std::to_string(i) + " is constant");

  Eigen::MatrixXd dist(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < p; ++j)
      dist(i, j) = dist(j, i) = 1.0 - std::fabs(pearson_corr(X.col(i), X.col(j)));
  }

  // Slot s holds the cluster whose smallest member is s.
  std::vector<Eigen::Index> size(static_cast<std::size_t>(p), 1);
  std::vector<bool> active(static_cast<std::size_t>(p), true);
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) owner[static_cast<std::size_t>(i)] = i;

  ClusterAssignment out;
  for (Eigen::Index remaining = p; remaining > n_clusters; --remaining) {
    Eigen::Index best_a = -1;
    Eigen::Index best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < p; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      for (Eigen::Index b = a + 1; b < p; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        if (dist(a, b) < best) {
          best = dist(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    const auto sa = static_cast<double>(size[static_cast<std::size_t>(best_a)]);
    const auto sb = static_cast<double>(size[static_cast<std::size_t>(best_b)]);
    for (Eigen::Index k = 0; k < p; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == best_a || k == best_b) continue;
      const double merged = (sa * dist(k, best_a) + sb * dist(k, best_b)) / (sa + sb);
      dist(k, best_a) = dist(best_a, k) = merged;
    }
    active[static_cast<std::size_t>(best_b)] = false;
    size[static_cast<std::size_t>(best_a)] += size[static_cast<std::size_t>(best_b)];
    for (auto& o : owner)
      if (o == best_b) o = best_a;
    out.merges.push_back({best_a, best_b, best});
  }

  std::vector<int> label_of_slot(static_cast<std::size_t>(p), -1);
  int next = 0;
  for (Eigen::Index s = 0; s < p; ++s)
    if (active[static_cast<std::size_t>(s)]) label_of_slot[static_cast<std::size_t>(s)] = next++;
  out.n_clusters = next;
  out.labels.resize(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i)
    out.labels[static_cast<std::size_t>(i)] = label_of_slot[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])];
  return out;
}

}  // namespace latentreg
