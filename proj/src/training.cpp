#include "latentreg/training.hpp"

#include "latentreg/error.hpp"
#include "latentreg/numstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace latentreg {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool finite(const LossComponents& c) {
  return std::isfinite(c.rec) && std::isfinite(c.pred) && std::isfinite(c.reg) && std::isfinite(c.total);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda_rec >= 0.0 && lambda_pred >= 0.0 && lambda_reg >= 0.0))
    throw ConfigError("train: lambdas must be non-negative");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batches < 1) throw ConfigError("train.batches must be at least 1");
  if (d < 1) throw ConfigError("train.d must be at least 1");
  kernel.validate();
}

Autoencoder Autoencoder::initialize(Eigen::Index p, Eigen::Index d, std::uint64_t seed) {
  const Architecture arch = default_architecture(p, d);
  return {init_params(arch.encoder, mix_seed(seed, 1)), init_params(arch.decoder, mix_seed(seed, 2))};
}

double loss_rec(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::MatrixXd>& X_hat) {
  if (X.rows() != X_hat.rows() || X.cols() != X_hat.cols()) throw ConfigError("loss_rec: shape mismatch");
  if (X.size() == 0) return 0.0;
  return (X - X_hat).squaredNorm() / static_cast<double>(X.size());
}

double loss_pred(const LocalFitBundle& bundle) {
  if (bundle.llr.size() == 0) return 0.0;
  return bundle.llr.mean();
}

double loss_reg_gradient(const Eigen::Ref<const Eigen::MatrixXd>& Z, Eigen::MatrixXd& grad_Z) {
  const auto n = Z.rows();
  const auto d = Z.cols();
  grad_Z = Eigen::MatrixXd::Zero(n, d);
  if (n < 2 || d < 2) return 0.0;
  const Eigen::MatrixXd C = Z.rowwise() - Z.colwise().mean();
  const Eigen::VectorXd norms = C.colwise().norm().transpose();
  double loss = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!(norms(k) > 0.0)) continue;
    for (Eigen::Index l = k + 1; l < d; ++l) {
      if (!(norms(l) > 0.0)) continue;
      const double r = C.col(k).dot(C.col(l)) / (norms(k) * norms(l));
      loss += 2.0 * r * r;
      // d(2 r^2)/dr = 4 r; dr/dc_k = c_l / (|c_k||c_l|) - r c_k / |c_k|^2.
      const double g = 4.0 * r;
      grad_Z.col(k) += g * (C.col(l) / (norms(k) * norms(l)) - r * C.col(k) / (norms(k) * norms(k)));
      grad_Z.col(l) += g * (C.col(k) / (norms(k) * norms(l)) - r * C.col(l) / (norms(l) * norms(l)));
    }
  }
  return loss;
}

double loss_reg(const Eigen::Ref<const Eigen::MatrixXd>& Z) {
  Eigen::MatrixXd unused;
  return loss_reg_gradient(Z, unused);
}

LossComponents composite_loss(const Eigen::Ref<const Eigen::MatrixXd>& X, const Autoencoder& model,
                              const Eigen::Ref<const Eigen::VectorXd>& y, const TrainConfig& config) {
  const Eigen::MatrixXd Z = model.encode(X);
  LossComponents c;
  c.rec = loss_rec(X, model.decode(Z));
  c.pred = loss_pred(build_local_bundle(Z, y, config.kernel));
  c.reg = loss_reg(Z);
  c.total = config.lambda_rec * c.rec + config.lambda_pred * c.pred + config.lambda_reg * c.reg;
  if (!finite(c)) throw RuntimeError("composite_loss: non-finite loss component");
  return c;
}

LossComponents composite_gradient(const Eigen::Ref<const Eigen::MatrixXd>& X, const Autoencoder& model,
                                  const Eigen::Ref<const Eigen::VectorXd>& y, const TrainConfig& config,
                                  AutoencoderGrads& grads) {
  if (X.rows() != y.size()) throw ConfigError("composite_gradient: X and y row counts differ");
  ForwardCache enc_cache, dec_cache;
  const Eigen::MatrixXd Z = forward(model.encoder, X, enc_cache);
  const Eigen::MatrixXd X_hat = forward(model.decoder, Z, dec_cache);

  LossComponents c;
  c.rec = loss_rec(X, X_hat);
  const Eigen::MatrixXd g_hat = (config.lambda_rec * 2.0 / static_cast<double>(X.size())) * (X_hat - X);
  Eigen::MatrixXd g_Z;
  grads.decoder = backward(model.decoder, dec_cache, g_hat, &g_Z);

  Eigen::MatrixXd g_pred;
  c.pred = prediction_loss_gradient(Z, y, config.kernel, g_pred);
  g_Z += config.lambda_pred * g_pred;

  Eigen::MatrixXd g_reg;
  c.reg = loss_reg_gradient(Z, g_reg);
  g_Z += config.lambda_reg * g_reg;

  c.total = config.lambda_rec * c.rec + config.lambda_pred * c.pred + config.lambda_reg * c.reg;
  if (!finite(c)) throw RuntimeError("composite_gradient: non-finite loss component");
  grads.encoder = backward(model.encoder, enc_cache, g_Z);
  return c;
}

TrainedModel train_from(const Dataset& dataset, const TrainConfig& config, Autoencoder init) {
  config.validate();
  const auto n = dataset.n();
  if (n < 4) throw ConfigError("train: need at least 4 training rows");
  if (dataset.p() < config.d) throw ConfigError("train: latent dimension exceeds predictor count");
  if (n / config.batches < 4) throw ConfigError("train.batches leaves fewer than 4 rows per batch");

  TrainedModel out;
  out.config = config;
  out.model = std::move(init);
  AdamState enc_state = AdamState::for_params(out.model.encoder, config.lr);
  AdamState dec_state = AdamState::for_params(out.model.decoder, config.lr);
  out.loss_history.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 3));
  AutoencoderGrads grads;
  Eigen::MatrixXd Xb;
  Eigen::VectorXd yb;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    LossComponents epoch_loss;
    if (config.batches == 1) {
      epoch_loss = composite_gradient(dataset.X, out.model, dataset.y, config, grads);
      if (!finite(epoch_loss)) throw RuntimeError("train: non-finite loss at epoch " + std::to_string(epoch));
      adam_step(out.model.encoder, grads.encoder, enc_state);
      adam_step(out.model.decoder, grads.decoder, dec_state);
    } else {
      // Contiguous batches over a fresh seeded shuffle; local neighbourhoods are within-batch.
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (int b = 0; b < config.batches; ++b) {
        const Eigen::Index lo = n * b / config.batches;
        const Eigen::Index hi = n * (b + 1) / config.batches;
        Xb.resize(hi - lo, dataset.p());
        yb.resize(hi - lo);
        for (Eigen::Index r = lo; r < hi; ++r) {
          Xb.row(r - lo) = dataset.X.row(order[static_cast<std::size_t>(r)]);
          yb(r - lo) = dataset.y(order[static_cast<std::size_t>(r)]);
        }
        const LossComponents c = composite_gradient(Xb, out.model, yb, config, grads);
        if (!finite(c)) throw RuntimeError("train: non-finite loss at epoch " + std::to_string(epoch));
        const double share = static_cast<double>(hi - lo) / static_cast<double>(n);
        epoch_loss.rec += share * c.rec;
        epoch_loss.pred += share * c.pred;
        epoch_loss.reg += share * c.reg;
        epoch_loss.total += share * c.total;
        adam_step(out.model.encoder, grads.encoder, enc_state);
        adam_step(out.model.decoder, grads.decoder, dec_state);
      }
    }
    out.loss_history.push_back(epoch_loss);
  }
  out.final_bundle = build_local_bundle(out.model.encode(dataset.X), dataset.y, config.kernel);
  return out;
}

TrainedModel train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  return train_from(dataset, config, Autoencoder::initialize(dataset.p(), config.d, config.seed));
}

std::optional<std::size_t> select_representative(const std::vector<SeedRun>& runs) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].model) ok.push_back(i);
  if (ok.empty()) return std::nullopt;
  std::stable_sort(ok.begin(), ok.end(),
                   [&](std::size_t a, std::size_t b) { return runs[a].train_rec < runs[b].train_rec; });
  return ok[(ok.size() - 1) / 2];
}

SeedStudy seed_study(const Dataset& train_set, const Dataset& test_set, const TrainConfig& config,
                     const std::vector<std::uint64_t>& seeds) {
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seed_study: seeds must be distinct");
  SeedStudy study;
  for (const auto seed : seeds) {
    SeedRun run;
    run.seed = seed;
    try {
      TrainConfig cfg = config;
      cfg.seed = seed;
      TrainedModel m = train(train_set, cfg);
      const Eigen::MatrixXd Z = m.model.encode(train_set.X);
      run.train_rec = loss_rec(train_set.X, m.model.decode(Z));
      run.test_rec = test_set.n() > 0 ? loss_rec(test_set.X, m.model.decode(m.model.encode(test_set.X)))
                                      : std::numeric_limits<double>::quiet_NaN();
      run.global_r2 = ols_fit(Z, train_set.y).r_squared;
      run.model = std::move(m);
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    study.runs.push_back(std::move(run));
  }
  study.representative = select_representative(study.runs);
  return study;
}

}  // namespace latentreg
