#pragma once

#include "latentreg/dataio.hpp"
#include "latentreg/numstat.hpp"
#include "latentreg/training.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace latentreg {

enum class BenchmarkMethod { Proposed, PlainAe, Pca };

std::string method_name(BenchmarkMethod m);

struct BenchmarkResult {
  BenchmarkMethod method = BenchmarkMethod::Pca;
  double r_squared = 0.0;
  Eigen::MatrixXd latent;
  std::string notes;
};

/// Global OLS R^2 of y on the first d principal component scores.
BenchmarkResult pca_baseline(const Dataset& train, Eigen::Index d = 4);

/// Reconstruction-only autoencoder: `config` with lambda_pred = lambda_reg = 0,
/// same architecture, epochs and seed (hence the same initialization).
BenchmarkResult plain_ae_baseline(const Dataset& train, const TrainConfig& config);

BenchmarkResult proposed_result(const Dataset& train, const Autoencoder& model);

/// Indices of the columns whose simple-regression slope has p < p_threshold.
std::vector<Eigen::Index> univariate_screen(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                            const Eigen::Ref<const Eigen::VectorXd>& y, double p_threshold);

struct TraceStep {
  std::string action;  // "remove" or "add"
  std::string term;
  double aic_before = 0.0;
  double aic_after = 0.0;
};

struct BackwardResult {
  std::vector<Eigen::Index> selected;  // in original column order
  std::vector<TraceStep> trace;
};

/// AIC of the OLS fit of y on the given columns (intercept only when empty).
double subset_aic(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const std::vector<Eigen::Index>& columns);

BackwardResult backward_eliminate(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const std::vector<Eigen::Index>& candidates, const std::vector<std::string>& names,
                                  double aic_improvement = 1.0);

using InteractionPair = std::pair<Eigen::Index, Eigen::Index>;

struct ForwardResult {
  std::vector<InteractionPair> interactions;  // in order of acceptance
  std::vector<TraceStep> trace;
  std::vector<std::string> notes;
};

ForwardResult forward_interactions(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const std::vector<Eigen::Index>& main_effects, const std::vector<std::string>& names,
                                   double aic_improvement = 2.0);

/// Mains followed by accepted products, as used for the final fit.
Eigen::MatrixXd stepwise_design(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& mains,
                                const std::vector<InteractionPair>& interactions);

struct StepwiseOptions {
  double screening_p = 0.10;
  double backward_threshold = 1.0;
  double forward_threshold = 2.0;
};

struct StepwiseModel {
  StepwiseOptions options;
  std::vector<Eigen::Index> screened;
  std::vector<Eigen::Index> main_effects;
  std::vector<InteractionPair> interactions;
  std::vector<std::string> term_names;  // "x1", "x1:x2", without the intercept
  OlsResult final_ols;
  std::vector<TraceStep> trace;
  std::vector<std::string> notes;
};

StepwiseModel stepwise(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<std::string>& names, const StepwiseOptions& options = {});

inline const std::vector<double>& screening_sweep() {
  static const std::vector<double> values{0.05, 0.10, 0.157};
  return values;
}

}  // namespace latentreg
