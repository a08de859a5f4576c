#include "latentreg/localreg.hpp"

#include "latentreg/error.hpp"
#include "latentreg/numstat.hpp"

#include <algorithm>
#include <cmath>

namespace latentreg {

Eigen::Index KernelConfig::neighbours(Eigen::Index n) const {
  if (n < 2) throw ConfigError("localized regression needs at least 2 points");
  const auto k = static_cast<Eigen::Index>(std::llround(k_fraction * static_cast<double>(n)));
  return std::clamp<Eigen::Index>(k, 1, n - 1);
}

void KernelConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("kernel.sigma must be positive");
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw ConfigError("kernel.k_fraction must lie in (0, 1]");
  if (!(ridge_eps >= 0.0)) throw ConfigError("kernel.ridge_eps must be non-negative");
  if (!(rss_floor > 0.0)) throw ConfigError("kernel.rss_floor must be positive");
}

Eigen::MatrixXd pairwise_distances(const Eigen::Ref<const Eigen::MatrixXd>& Z) {
  const auto n = Z.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (Z.row(i) - Z.row(j)).norm();
  }
  return D;
}

Eigen::VectorXd adaptive_bandwidths(const Eigen::Ref<const Eigen::MatrixXd>& D, Eigen::Index k, double rss_floor,
                                    std::vector<Eigen::Index>* neighbour, Eigen::Index* degenerate) {
  const auto n = D.rows();
  if (D.cols() != n) throw ConfigError("adaptive_bandwidths: distance matrix must be square");
  if (k < 1 || k > n - 1) throw ConfigError("adaptive_bandwidths: k must lie in [1, n - 1]");
  Eigen::VectorXd h(n);
  if (neighbour) neighbour->assign(static_cast<std::size_t>(n), -1);
  Eigen::Index zero_count = 0;
  std::vector<std::pair<double, Eigen::Index>> row;
  row.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) row.emplace_back(D(i, j), j);
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    const auto [dist, j] = row[static_cast<std::size_t>(k - 1)];
    if (dist > 0.0) {
      h(i) = dist;
      if (neighbour) (*neighbour)[static_cast<std::size_t>(i)] = j;
    } else {
      h(i) = std::sqrt(rss_floor);
      ++zero_count;
    }
  }
  if (degenerate) *degenerate = zero_count;
  return h;
}

Eigen::MatrixXd kernel_weights(const Eigen::Ref<const Eigen::MatrixXd>& D, const Eigen::Ref<const Eigen::VectorXd>& bandwidths,
                               double sigma) {
  if (bandwidths.size() != D.rows()) throw ConfigError("kernel_weights: bandwidth count mismatch");
  if ((bandwidths.array() <= 0.0).any()) throw ConfigError("kernel_weights: bandwidths must be positive");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Eigen::MatrixXd W(D.rows(), D.cols());
  for (Eigen::Index i = 0; i < D.rows(); ++i)
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      const double u = D(i, j) / bandwidths(i);
      W(i, j) = std::exp(-u * u * inv);
    }
  return W;
}

double likelihood_ratio_term(double weight_sum, double rss_full, double rss_null, double rss_floor) {
  return 0.5 * weight_sum * (std::log(std::max(rss_full, rss_floor)) - std::log(std::max(rss_null, rss_floor)));
}

LocalFitBundle fit_local_models(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::MatrixXd>& W, const KernelConfig& cfg) {
  const auto n = Z.rows();
  const auto d = Z.cols();
  if (y.size() != n || W.rows() != n || W.cols() != n) throw ConfigError("fit_local_models: shape mismatch");

  LocalFitBundle b;
  b.Z = Z;
  b.W = W;
  b.B.resize(n, d + 1);
  b.null_intercepts.resize(n);
  b.llr.resize(n);
  b.rss_full.resize(n);
  b.rss_null.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd w = W.row(i).transpose();
    const WlsResult full = wls_fit(Z, y, w, cfg.ridge_eps);
    const double mu = weighted_mean_fit(y, w);
    b.B.row(i) = full.coefficients.transpose();
    b.null_intercepts(i) = mu;
    b.rss_full(i) = full.weighted_rss;
    b.rss_null(i) = w.dot((y.array() - mu).square().matrix());
    b.llr(i) = likelihood_ratio_term(full.weight_sum, b.rss_full(i), b.rss_null(i), cfg.rss_floor);
  }
  return b;
}

LocalFitBundle build_local_bundle(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const KernelConfig& cfg) {
  cfg.validate();
  const auto n = Z.rows();
  const Eigen::Index k = cfg.neighbours(n);
  Eigen::MatrixXd D = pairwise_distances(Z);
  Eigen::Index degenerate = 0;
  Eigen::VectorXd h = adaptive_bandwidths(D, k, cfg.rss_floor, nullptr, &degenerate);
  Eigen::MatrixXd W = kernel_weights(D, h, cfg.sigma);
  LocalFitBundle b = fit_local_models(Z, y, W, cfg);
  b.distances = std::move(D);
  b.bandwidths = std::move(h);
  b.k = k;
  b.degenerate_bandwidths = degenerate;
  return b;
}

double prediction_loss_gradient(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const KernelConfig& cfg, Eigen::MatrixXd& grad_Z) {
  const auto n = Z.rows();
  const auto d = Z.cols();
  const auto q = d + 1;
  if (y.size() != n) throw ConfigError("prediction_loss_gradient: shape mismatch");
  const Eigen::Index k = cfg.neighbours(n);

  const Eigen::MatrixXd D = pairwise_distances(Z);
  std::vector<Eigen::Index> nb;
  const Eigen::VectorXd h = adaptive_bandwidths(D, k, cfg.rss_floor, &nb);
  const Eigen::MatrixXd W = kernel_weights(D, h, cfg.sigma);

  Eigen::MatrixXd Xt(n, q);
  Xt.col(0).setOnes();
  Xt.rightCols(d) = Z;

  grad_Z = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd gW(n, n);
  const double scale = 1.0 / static_cast<double>(n);
  double loss = 0.0;

  Eigen::MatrixXd A(q, q);
  Eigen::VectorXd rhs(q), beta(q), ridge_grad(q), v(q);
  Eigen::VectorXd r(n), xv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto w = W.row(i).transpose();
    A.noalias() = Xt.transpose() * w.asDiagonal() * Xt;
    for (Eigen::Index c = 1; c < q; ++c) A(c, c) += cfg.ridge_eps;
    rhs.noalias() = Xt.transpose() * w.cwiseProduct(y);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
      throw RuntimeError("local fit: singular weighted Gram matrix");
    beta = ldlt.solve(rhs);
    r.noalias() = y - Xt * beta;
    const double S = w.sum();
    const double rss_full = w.dot(r.cwiseAbs2());
    const double mu = w.dot(y) / S;
    const Eigen::ArrayXd e0 = y.array() - mu;
    const double rss_null = (w.array() * e0.square()).sum();
    const double lf = std::log(std::max(rss_full, cfg.rss_floor));
    const double ln = std::log(std::max(rss_null, cfg.rss_floor));
    loss += 0.5 * S * (lf - ln);

    // Adjoints of the llr with respect to S and the two weighted RSS values.
    const double dS = scale * 0.5 * (lf - ln);
    const double dRf = rss_full > cfg.rss_floor ? scale * 0.5 * S / rss_full : 0.0;
    const double dRn = rss_null > cfg.rss_floor ? -scale * 0.5 * S / rss_null : 0.0;

    // RSS_null: mu is the exact weighted minimizer, so only the explicit
    // dependence on the weights survives.
    gW.row(i) = (dS + dRn * e0.square()).matrix().transpose();
    gW.row(i).array() += dRf * r.array().square().transpose();

    // RSS_full through beta = A^{-1} b. With the ridge on the slopes the
    // normal equations leave dRSS/dbeta = -2 R beta.
    ridge_grad.setZero();
    for (Eigen::Index c = 1; c < q; ++c) ridge_grad(c) = -2.0 * dRf * cfg.ridge_eps * beta(c);
    v = ldlt.solve(ridge_grad);
    xv.noalias() = Xt * v;
    gW.row(i).array() += (xv.array() * r.array()).transpose();
    // dL/dx_j = w_j (r_j v - (x_j . v) beta) - 2 dRf w_j r_j beta, restricted to the latent part.
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wj = w(j);
      if (wj == 0.0) continue;
      grad_Z.row(j) += wj * (r(j) * v.tail(d) - xv(j) * beta.tail(d) - 2.0 * dRf * r(j) * beta.tail(d)).transpose();
    }
  }

  // Kernel weights -> distances and bandwidths -> latent coordinates.
  Eigen::MatrixXd gD = Eigen::MatrixXd::Zero(n, n);
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    double gh = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double u = D(i, j) / h(i);
      const double gw = gW(i, j) * W(i, j);
      gD(i, j) += -gw * u * inv_s2 / h(i);
      gh += gw * u * u * inv_s2 / h(i);
    }
    const auto j = nb[static_cast<std::size_t>(i)];
    if (j >= 0) gD(i, j) += gh;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double g = gD(i, j) + gD(j, i);
      if (g == 0.0 || !(D(i, j) > 0.0)) continue;
      const Eigen::RowVectorXd dir = (Z.row(i) - Z.row(j)) / D(i, j);
      grad_Z.row(i) += g * dir;
      grad_Z.row(j) -= g * dir;
    }
  return loss * scale;
}

QueryFits fit_query_models(const Eigen::Ref<const Eigen::MatrixXd>& Z_ref, const Eigen::Ref<const Eigen::VectorXd>& y_ref,
                           const Eigen::Ref<const Eigen::MatrixXd>& Z_query, const KernelConfig& cfg) {
  cfg.validate();
  const auto n = Z_ref.rows();
  const auto m = Z_query.rows();
  if (Z_query.cols() != Z_ref.cols() || y_ref.size() != n) throw ConfigError("fit_query_models: shape mismatch");
  QueryFits out;
  out.B.resize(m, Z_ref.cols() + 1);
  out.bandwidths.resize(m);
  out.llr.resize(m);
  if (m == 0) return out;
  const Eigen::Index k = cfg.neighbours(n);
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  Eigen::VectorXd dist(n), w(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) dist(j) = (Z_query.row(i) - Z_ref.row(j)).norm();
    std::copy(dist.data(), dist.data() + n, sorted.begin());
    const auto rank = std::min<Eigen::Index>(k, n - 1);
    std::nth_element(sorted.begin(), sorted.begin() + rank, sorted.end());
    double h = sorted[static_cast<std::size_t>(rank)];
    if (!(h > 0.0)) h = std::sqrt(cfg.rss_floor);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = dist(j) / h;
      w(j) = std::exp(-u * u * inv);
    }
    const WlsResult full = wls_fit(Z_ref, y_ref, w, cfg.ridge_eps);
    const double mu = weighted_mean_fit(y_ref, w);
    const double rss_null = w.dot((y_ref.array() - mu).square().matrix());
    out.B.row(i) = full.coefficients.transpose();
    out.bandwidths(i) = h;
    out.llr(i) = likelihood_ratio_term(full.weight_sum, full.weighted_rss, rss_null, cfg.rss_floor);
  }
  return out;
}

}  // namespace latentreg
