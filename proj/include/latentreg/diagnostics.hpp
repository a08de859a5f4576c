#pragma once

#include "latentreg/localreg.hpp"
#include "latentreg/numstat.hpp"
#include "latentreg/training.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace latentreg {

struct GlobalLatentModel {
  OlsResult ols;  // y on [1, Z]
  std::vector<std::string> latent_names;

  Eigen::Index latent_dim() const { return ols.coefficients.size() - 1; }
};

struct DeviationRecord {
  Eigen::Index patient = 0;
  Eigen::Index dim = 0;
  double delta = 0.0;
  bool flagged = false;
  int direction = 0;  // sign(delta) when flagged, otherwise 0
};

struct InteractionTest {
  std::string predictor;
  double coefficient = 0.0;
  double p_value = 1.0;
};

struct RmseContrast {
  double global_in = 0.0;
  double local_in = 0.0;
  double global_out = 0.0;
  double local_out = 0.0;

  double improvement_in() const { return global_in - local_in; }
  double improvement_out() const { return global_out - local_out; }
};

struct ClusterProfile {
  Eigen::VectorXd predictor_means;  // per original predictor
  Eigen::VectorXd cluster_means;    // per predictor cluster
};

struct SubgroupReport {
  std::vector<Eigen::Index> members;
  Eigen::Index dim = 0;
  int direction = 0;
  ClusterProfile zscore_profile;
  RmseContrast rmse;
  std::vector<InteractionTest> interaction_tests;
  /// Members also present in another reported subgroup.
  std::vector<Eigen::Index> overlap;
};

struct NamedVariable {
  std::string name;
  double t_statistic = 0.0;

  /// "NAME (t=-11.45)"
  std::string label() const;
};

struct DimAlignment {
  std::vector<Eigen::Index> reference_dim_of;  // run dim -> reference dim
  std::vector<int> sign;                       // per reference dim
  std::vector<double> correlation;             // |corr| per reference dim
  std::vector<bool> unstable;                  // per reference dim, |corr| < 0.2
};

struct StabilityTable {
  Eigen::MatrixXd rank_sd;         // patients x reference dims
  Eigen::VectorXd mean_rank_sd;    // per reference dim
  std::vector<DimAlignment> alignments;  // per run
};

/// Latent scores and local-minus-global slopes of one run, for stability analysis.
struct RunDeviations {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd delta;  // patients x dims
};

GlobalLatentModel fit_global(const Eigen::Ref<const Eigen::MatrixXd>& Z_train, const Eigen::Ref<const Eigen::VectorXd>& y_train,
                             double ci_level = 0.95, std::vector<std::string> latent_names = {});

/// One record per (patient, dim); flagged when the local slope lies strictly outside the CI.
std::vector<DeviationRecord> deviations(const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global);

/// patients x dims matrix of local-minus-global slopes.
Eigen::MatrixXd deviation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global);

/// Skeletons (members, dim, direction) sorted by size descending, then (dim, direction).
std::vector<SubgroupReport> form_subgroups(const std::vector<DeviationRecord>& records, std::size_t min_size = 5);

ClusterProfile zscore_profile(const Eigen::Ref<const Eigen::MatrixXd>& X_std, const std::vector<Eigen::Index>& members,
                              const ClusterAssignment& clusters);

/// Per latent dim, the top_k variables by |Welch t| between above- and below-median halves.
std::vector<std::vector<NamedVariable>> name_latent_dims(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                                         const Eigen::Ref<const Eigen::MatrixXd>& X_std,
                                                         const std::vector<std::string>& names, std::size_t top_k = 10,
                                                         std::vector<std::string>* notes = nullptr);

RmseContrast rmse_contrast(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global,
                           const std::vector<Eigen::Index>& members);

/// OLS of y on [1, x, g, x g] per predictor; reports the x g coefficient.
std::vector<InteractionTest> interaction_check(const Eigen::Ref<const Eigen::MatrixXd>& X_std,
                                               const Eigen::Ref<const Eigen::VectorXd>& y,
                                               const std::vector<Eigen::Index>& members,
                                               const std::vector<Eigen::Index>& predictors,
                                               const std::vector<std::string>& names);

struct TestProjection {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd B;
  std::vector<DeviationRecord> records;
  /// Per test patient, indices of the subgroups whose (dim, direction) they share.
  std::vector<std::vector<std::size_t>> assignments;
};

TestProjection project_test(const Autoencoder& model, const KernelConfig& kernel, const Dataset& train,
                            const Dataset& test, const GlobalLatentModel& global,
                            const std::vector<SubgroupReport>& subgroups);

/// Greedy max-|corr| matching of a run's latent columns to the reference run's.
DimAlignment align_dims(const Eigen::Ref<const Eigen::MatrixXd>& Z_ref, const Eigen::Ref<const Eigen::MatrixXd>& Z_run);

/// Rank 1 = largest |delta|; ties broken by patient index.
std::vector<Eigen::Index> deviation_ranks(const Eigen::Ref<const Eigen::VectorXd>& delta);

StabilityTable rank_stability(const std::vector<RunDeviations>& runs, std::size_t reference);

}  // namespace latentreg
