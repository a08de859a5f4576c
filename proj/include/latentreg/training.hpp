#pragma once

#include "latentreg/dataio.hpp"
#include "latentreg/localreg.hpp"
#include "latentreg/neural.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace latentreg {

struct TrainConfig {
  double lambda_rec = 1.0;
  double lambda_pred = 0.06;
  double lambda_reg = 0.3;
  int epochs = 300;
  double lr = 1e-4;
  int batches = 1;
  Eigen::Index d = 4;
  KernelConfig kernel;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LossComponents {
  double rec = 0.0;
  double pred = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

struct Autoencoder {
  MlpParams encoder;
  MlpParams decoder;

  /// Default architecture for p inputs and d latent dimensions, seeded.
  static Autoencoder initialize(Eigen::Index p, Eigen::Index d, std::uint64_t seed);

  Eigen::MatrixXd encode(const Eigen::Ref<const Eigen::MatrixXd>& X) const { return forward(encoder, X); }
  Eigen::MatrixXd decode(const Eigen::Ref<const Eigen::MatrixXd>& Z) const { return forward(decoder, Z); }
  Eigen::Index latent_dim() const { return encoder.output_dim(); }
};

struct AutoencoderGrads {
  MlpParams encoder;
  MlpParams decoder;
};

struct TrainedModel {
  Autoencoder model;
  TrainConfig config;
  /// Entry e holds the losses at the parameters used for the e-th update.
  std::vector<LossComponents> loss_history;
  LocalFitBundle final_bundle;
};

/// (1 / (n p)) ||X - X_hat||_F^2
double loss_rec(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& X_hat);

double loss_pred(const LocalFitBundle& bundle);

/// Sum over ordered pairs k != l of corr(z_k, z_l)^2. Constant columns contribute 0.
double loss_reg(const Eigen::Ref<const Eigen::MatrixXd>& Z);
double loss_reg_gradient(const Eigen::Ref<const Eigen::MatrixXd>& Z, Eigen::MatrixXd& grad_Z);

LossComponents composite_loss(const Eigen::Ref<const Eigen::MatrixXd>& X, const Autoencoder& model,
                              const Eigen::Ref<const Eigen::VectorXd>& y, const TrainConfig& config);

/// Composite loss and its gradient with respect to every network parameter.
LossComponents composite_gradient(const Eigen::Ref<const Eigen::MatrixXd>& X, const Autoencoder& model,
                                  const Eigen::Ref<const Eigen::VectorXd>& y, const TrainConfig& config,
                                  AutoencoderGrads& grads);

/// Full-batch Adam on the composite loss for a fixed number of epochs.
TrainedModel train(const Dataset& dataset, const TrainConfig& config);

/// Resumes from a given initialization (used for paired comparisons).
TrainedModel train_from(const Dataset& dataset, const TrainConfig& config, Autoencoder init);

struct SeedRun {
  std::uint64_t seed = 0;
  std::optional<TrainedModel> model;
  std::string error;
  double train_rec = 0.0;
  double test_rec = 0.0;
  double global_r2 = 0.0;
};

struct SeedStudy {
  std::vector<SeedRun> runs;
  /// Index of the successful run with the median training reconstruction loss.
  std::optional<std::size_t> representative;
};

SeedStudy seed_study(const Dataset& train, const Dataset& test, const TrainConfig& config,
                     const std::vector<std::uint64_t>& seeds);

/// Lower median of the successful runs' train_rec.
std::optional<std::size_t> select_representative(const std::vector<SeedRun>& runs);

}  // namespace latentreg
