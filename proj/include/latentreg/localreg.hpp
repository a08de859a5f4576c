#pragma once

#include <Eigen/Dense>

#include <vector>

namespace latentreg {

struct KernelConfig {
  double sigma = 1.0;
  double k_fraction = 0.10;
  double ridge_eps = 1e-6;
  double rss_floor = 1e-12;

  /// Neighbour order k = max(1, round(k_fraction * n)), capped at n - 1.
  Eigen::Index neighbours(Eigen::Index n) const;
  void validate() const;
};

/// Everything the localized regression computes for one latent configuration.
/// Row i of W and B belongs to patient i's local model.
struct LocalFitBundle {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd distances;
  Eigen::VectorXd bandwidths;
  Eigen::MatrixXd W;
  Eigen::MatrixXd B;  // n x (d + 1), intercept first
  Eigen::VectorXd null_intercepts;
  Eigen::VectorXd llr;  // per-patient -log(L_full / L_null)
  Eigen::VectorXd rss_full;
  Eigen::VectorXd rss_null;
  Eigen::Index k = 0;
  /// Patients whose k-th neighbour sits at distance 0 (bandwidth floored).
  Eigen::Index degenerate_bandwidths = 0;
};

Eigen::MatrixXd pairwise_distances(const Eigen::Ref<const Eigen::MatrixXd>& Z);

/// Distance from each row to its k-th nearest other row. A zero bandwidth is
/// replaced by sqrt(rss_floor) and counted in `degenerate`. `neighbour`, when
/// given, receives the index realizing each bandwidth.
Eigen::VectorXd adaptive_bandwidths(const Eigen::Ref<const Eigen::MatrixXd>& D, Eigen::Index k,
                                    double rss_floor = 1e-12, std::vector<Eigen::Index>* neighbour = nullptr,
                                    Eigen::Index* degenerate = nullptr);

/// W_ij = exp(-(D_ij / h_i)^2 / (2 sigma^2)); rows are not normalized.
Eigen::MatrixXd kernel_weights(const Eigen::Ref<const Eigen::MatrixXd>& D, const Eigen::Ref<const Eigen::VectorXd>& bandwidths,
                               double sigma);

/// Per-patient weighted fits of y on [1, Z] and on [1] under the rows of W.
LocalFitBundle fit_local_models(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::MatrixXd>& W, const KernelConfig& cfg);

/// distances -> bandwidths -> weights -> local fits.
LocalFitBundle build_local_bundle(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const KernelConfig& cfg);

/// Profile-likelihood ratio term (S/2) ln(RSS_full / RSS_null) with both RSS floored.
double likelihood_ratio_term(double weight_sum, double rss_full, double rss_null, double rss_floor);

/// Mean per-patient llr and its gradient with respect to Z.
double prediction_loss_gradient(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const KernelConfig& cfg, Eigen::MatrixXd& grad_Z);

/// Local models for query points weighted over reference points only.
/// The bandwidth of a query is the (k+1)-th smallest distance to the
/// reference set, so querying a reference point reproduces its own fit.
struct QueryFits {
  Eigen::MatrixXd B;
  Eigen::VectorXd bandwidths;
  Eigen::VectorXd llr;
};

QueryFits fit_query_models(const Eigen::Ref<const Eigen::MatrixXd>& Z_ref, const Eigen::Ref<const Eigen::VectorXd>& y_ref,
                           const Eigen::Ref<const Eigen::MatrixXd>& Z_query, const KernelConfig& cfg);

}  // namespace latentreg
