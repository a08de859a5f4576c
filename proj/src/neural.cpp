#include "latentreg/neural.hpp"

#include "latentreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace latentreg {

std::vector<LayerSpec> MlpParams::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back({l.weight.cols(), l.weight.rows(), l.activation});
  return out;
}

Eigen::Index MlpParams::parameter_count() const {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  return total;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  for (const auto& l : layers)
    out.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size()),
                          l.activation});
  return out;
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  if (other.layers.size() != layers.size()) throw ConfigError("MlpParams: layer count mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

MlpParams& MlpParams::operator*=(double scale) {
  for (auto& l : layers) {
    l.weight *= scale;
    l.bias *= scale;
  }
  return *this;
}

Architecture default_architecture(Eigen::Index p, Eigen::Index d) {
  if (d < 1 || p < d) throw ConfigError("default_architecture: require p >= d >= 1");
  const Eigen::Index h1 = std::min<Eigen::Index>(64, p);
  const Eigen::Index h2 = std::min<Eigen::Index>(16, p);
  Architecture a;
  a.encoder = {{p, h1, Activation::Tanh}, {h1, h2, Activation::Tanh}, {h2, d, Activation::Linear}};
  a.decoder = {{d, h2, Activation::Tanh}, {h2, h1, Activation::Tanh}, {h1, p, Activation::Linear}};
  return a;
}

void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].in_dim < 1 || specs[k].out_dim < 1) throw ConfigError("layer dimensions must be positive");
    if (k > 0 && specs[k].in_dim != specs[k - 1].out_dim) throw ConfigError("layer dimensions do not chain");
  }
}

MlpParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
  validate_specs(specs);
  std::mt19937_64 rng(seed);
  MlpParams params;
  for (const auto& s : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Layer layer{Eigen::MatrixXd(s.out_dim, s.in_dim), Eigen::VectorXd::Zero(s.out_dim), s.activation};
    for (Eigen::Index r = 0; r < s.out_dim; ++r)
      for (Eigen::Index c = 0; c < s.in_dim; ++c) layer.weight(r, c) = unif(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, ForwardCache& cache) {
  if (params.layers.empty()) throw ConfigError("forward: empty network");
  if (X.cols() != params.input_dim()) throw ConfigError("forward: input width does not match network");
  cache.activations.clear();
  cache.activations.reserve(params.layers.size() + 1);
  cache.activations.emplace_back(X);
  for (const auto& layer : params.layers) {
    Eigen::MatrixXd h = cache.activations.back() * layer.weight.transpose();
    h.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::Tanh) h = h.array().tanh().matrix();
    cache.activations.push_back(std::move(h));
  }
  return cache.activations.back();
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  ForwardCache cache;
  return forward(params, X, cache);
}

MlpParams backward(const MlpParams& params, const ForwardCache& cache, const Eigen::Ref<const Eigen::MatrixXd>& grad_output,
                   Eigen::MatrixXd* grad_input) {
  const auto L = params.layers.size();
  if (cache.activations.size() != L + 1) throw ConfigError("backward: cache does not match network");
  if (grad_output.rows() != cache.activations.back().rows() || grad_output.cols() != cache.activations.back().cols())
    throw ConfigError("backward: gradient shape does not match network output");

  MlpParams grads = params.zeros_like();
  Eigen::MatrixXd upstream = grad_output;
  for (std::size_t k = L; k-- > 0;) {
    const auto& layer = params.layers[k];
    if (layer.activation == Activation::Tanh) {
      // d tanh(u)/du = 1 - tanh(u)^2, which is exactly 0 once tanh saturates.
      upstream.array() *= 1.0 - cache.activations[k + 1].array().square();
    }
    grads.layers[k].weight.noalias() = upstream.transpose() * cache.activations[k];
    grads.layers[k].bias = upstream.colwise().sum().transpose();
    if (k > 0 || grad_input) {
      Eigen::MatrixXd next = upstream * layer.weight;
      upstream = std::move(next);
    }
  }
  if (grad_input) *grad_input = std::move(upstream);
  return grads;
}

AdamState AdamState::for_params(const MlpParams& params, double lr) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.lr = lr;
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size())
    throw ConfigError("adam_step: shape mismatch");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    p.array() -= state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& p = params.layers[k];
    const auto& g = grads.layers[k];
    if (p.weight.rows() != g.weight.rows() || p.weight.cols() != g.weight.cols())
      throw ConfigError("adam_step: shape mismatch");
    update(p.weight, g.weight, state.first_moment.layers[k].weight, state.second_moment.layers[k].weight);
    update(p.bias, g.bias, state.first_moment.layers[k].bias, state.second_moment.layers[k].bias);
  }
}

}  // namespace latentreg
