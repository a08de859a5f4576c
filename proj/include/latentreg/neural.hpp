#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace latentreg {

enum class Activation { Tanh, Linear };

struct LayerSpec {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Activation activation = Activation::Linear;

  bool operator==(const LayerSpec&) const = default;
};

/// Affine map followed by an elementwise activation; weight is out x in.
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Activation activation = Activation::Linear;
};

struct MlpParams {
  std::vector<Layer> layers;

  std::vector<LayerSpec> specs() const;
  Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.back().weight.rows(); }
  Eigen::Index parameter_count() const;

  /// Same shapes, every entry zero.
  MlpParams zeros_like() const;
  MlpParams& operator+=(const MlpParams& other);
  MlpParams& operator*=(double scale);
};

struct Architecture {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
};

/// Encoder p -> 64 -> 16 -> d and its mirror image; hidden widths are clipped to p.
Architecture default_architecture(Eigen::Index p, Eigen::Index d);

void validate_specs(std::span<const LayerSpec> specs);

/// Glorot-uniform weights, zero biases.
MlpParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed);

/// Layer inputs/outputs retained for the backward pass. activations[0] is the
/// network input; activations[l + 1] is the output of layer l.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

/// Rows of X are samples.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X);
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, ForwardCache& cache);

/// Reverse-mode pass: given dLoss/dOutput returns dLoss/dParams, and
/// dLoss/dInput through `grad_input` when non-null.
MlpParams backward(const MlpParams& params, const ForwardCache& cache, const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                   Eigen::MatrixXd* grad_input = nullptr);

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& params, double lr);
};

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

}  // namespace latentreg
