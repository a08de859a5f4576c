#include "latentreg/error.hpp"
#include "latentreg/neural.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace latentreg;

namespace {

std::vector<Eigen::Index> dims(const std::vector<LayerSpec>& specs) {
  std::vector<Eigen::Index> out{specs.front().in_dim};
  for (const auto& s : specs) out.push_back(s.out_dim);
  return out;
}

double& entry(MlpParams& p, std::size_t layer, Eigen::Index flat, bool bias) {
  auto& l = p.layers[layer];
  return bias ? l.bias(flat) : l.weight.data()[flat];
}

// Max relative error between the analytic gradient and central differences of `loss`.
double fd_error(MlpParams params, const MlpParams& grad, const std::function<double(const MlpParams&)>& loss) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    for (bool bias : {false, true}) {
      const Eigen::Index count = bias ? params.layers[l].bias.size() : params.layers[l].weight.size();
      for (Eigen::Index k = 0; k < count; ++k) {
        double& v = entry(params, l, k, bias);
        const double keep = v;
        v = keep + h;
        const double up = loss(params);
        v = keep - h;
        const double down = loss(params);
        v = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = entry(const_cast<MlpParams&>(grad), l, k, bias);
        worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
      }
    }
  return worst;
}

double max_abs(const MlpParams& p) {
  double m = 0.0;
  for (const auto& l : p.layers) m = std::max({m, l.weight.cwiseAbs().maxCoeff(), l.bias.cwiseAbs().maxCoeff()});
  return m;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("default architecture") {
    const Architecture a = default_architecture(76, 4);
    CHECK(dims(a.encoder) == std::vector<Eigen::Index>{76, 64, 16, 4});
    CHECK(dims(a.decoder) == std::vector<Eigen::Index>{4, 16, 64, 76});
    CHECK(a.encoder[0].activation == Activation::Tanh);
    CHECK(a.encoder[1].activation == Activation::Tanh);
    CHECK(a.encoder[2].activation == Activation::Linear);
    CHECK(a.decoder[2].activation == Activation::Linear);

    CHECK(dims(default_architecture(8, 2).encoder) == std::vector<Eigen::Index>{8, 8, 8, 2});
    CHECK(dims(default_architecture(8, 2).decoder) == std::vector<Eigen::Index>{2, 8, 8, 8});
    const Architecture eq = default_architecture(3, 3);
    CHECK(eq.encoder.size() == 3);
    CHECK(eq.decoder.size() == 3);
    CHECK(dims(default_architecture(40, 4).encoder) == std::vector<Eigen::Index>{40, 40, 16, 4});
    CHECK_THROWS_AS(default_architecture(3, 4), ConfigError);
    CHECK_THROWS_AS(default_architecture(3, 0), ConfigError);
  }

  TEST_CASE("layer spec validation") {
    std::vector<LayerSpec> bad{{3, 4, Activation::Tanh}, {5, 2, Activation::Linear}};
    CHECK_THROWS_AS(validate_specs(bad), ConfigError);
    std::vector<LayerSpec> zero{{0, 4, Activation::Tanh}};
    CHECK_THROWS_AS(validate_specs(zero), ConfigError);
  }

  TEST_CASE("init is seeded Glorot uniform with zero biases") {
    const auto specs = default_architecture(20, 3).encoder;
    const MlpParams a = init_params(specs, 7);
    const MlpParams b = init_params(specs, 7);
    const MlpParams c = init_params(specs, 8);
    bool differs = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      CHECK(a.layers[l].weight == b.layers[l].weight);
      CHECK(a.layers[l].bias.isZero(0.0));
      differs = differs || a.layers[l].weight != c.layers[l].weight;
      const double limit = std::sqrt(6.0 / static_cast<double>(specs[l].in_dim + specs[l].out_dim));
      CHECK(a.layers[l].weight.cwiseAbs().maxCoeff() <= limit);
      CHECK(a.layers[l].weight.rows() == specs[l].out_dim);
      CHECK(a.layers[l].weight.cols() == specs[l].in_dim);
    }
    CHECK(differs);
    CHECK(a.specs() == specs);
    CHECK(a.parameter_count() == 20 * 20 + 20 + 20 * 16 + 16 + 16 * 3 + 3);
  }

  TEST_CASE("forward examples") {
    const auto specs = default_architecture(6, 2).encoder;
    const MlpParams z = init_params(specs, 1).zeros_like();
    CHECK(forward(z, testing::random_matrix(4, 6, 1)).isZero(0.0));

    MlpParams id;
    id.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::Linear});
    const Eigen::MatrixXd X = testing::random_matrix(5, 3, 2);
    CHECK(forward(id, X) == X);
    CHECK_THROWS_AS(forward(id, testing::random_matrix(5, 4, 2)), ConfigError);
  }

  TEST_CASE("forward matches hand evaluation") {
    MlpParams p;
    p.layers.push_back({testing::random_matrix(4, 3, 11), testing::random_vector(4, 12), Activation::Tanh});
    p.layers.push_back({testing::random_matrix(2, 4, 13), testing::random_vector(2, 14), Activation::Linear});
    const Eigen::MatrixXd X = testing::random_matrix(3, 3, 15);
    const Eigen::MatrixXd out = forward(p, X);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd h(4);
      for (int a = 0; a < 4; ++a) {
        double s = p.layers[0].bias(a);
        for (int b = 0; b < 3; ++b) s += p.layers[0].weight(a, b) * X(i, b);
        h(a) = std::tanh(s);
      }
      for (int o = 0; o < 2; ++o) {
        double s = p.layers[1].bias(o);
        for (int a = 0; a < 4; ++a) s += p.layers[1].weight(o, a) * h(a);
        CHECK(std::abs(out(i, o) - s) < 1e-12);
      }
    }
    ForwardCache cache;
    CHECK(forward(p, X, cache) == out);
    CHECK(cache.activations.size() == 3);
    CHECK(cache.activations.back() == out);
  }

  TEST_CASE("linear layer gradient in closed form") {
    MlpParams p;
    p.layers.push_back({testing::random_matrix(2, 3, 21), Eigen::VectorXd::Zero(2), Activation::Linear});
    const Eigen::MatrixXd X = testing::random_matrix(6, 3, 22);
    ForwardCache cache;
    const Eigen::MatrixXd out = forward(p, X, cache);
    Eigen::MatrixXd gin;
    const MlpParams g = backward(p, cache, out, &gin);
    // L = |X W^T|^2 / 2  =>  dL/dW = (X W^T)^T X, dL/db = column sums, dL/dX = X W^T W
    CHECK((g.layers[0].weight - out.transpose() * X).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.layers[0].bias - out.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((gin - out * p.layers[0].weight).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("backprop agrees with finite differences") {
    const auto specs = default_architecture(5, 2).encoder;
    const MlpParams p = init_params(specs, 3);
    const Eigen::MatrixXd X = testing::random_matrix(7, 5, 31);
    const Eigen::MatrixXd T = testing::random_matrix(7, 2, 32);
    auto loss = [&](const MlpParams& q) { return 0.5 * (forward(q, X) - T).squaredNorm() + forward(q, X).array().sin().sum(); };
    ForwardCache cache;
    const Eigen::MatrixXd out = forward(p, X, cache);
    const MlpParams g = backward(p, cache, (out - T).array() + out.array().cos().array());
    CHECK(fd_error(p, g, loss) < 1e-7);
  }

  TEST_CASE("gradient of a sum is the sum of gradients") {
    const MlpParams p = init_params(default_architecture(6, 3).decoder, 4);
    const Eigen::MatrixXd X = testing::random_matrix(9, 3, 41);
    ForwardCache cache;
    forward(p, X, cache);
    const Eigen::MatrixXd g1 = testing::random_matrix(9, 6, 42);
    const Eigen::MatrixXd g2 = testing::random_matrix(9, 6, 43);
    MlpParams sum = backward(p, cache, g1);
    sum += backward(p, cache, g2);
    MlpParams joint = backward(p, cache, g1 + g2);
    joint *= -1.0;
    joint += sum;
    CHECK(max_abs(joint) < 1e-10);
  }

  TEST_CASE("an unused parameter has exactly zero gradient") {
    MlpParams p = init_params(default_architecture(4, 2).encoder, 5);
    const Eigen::MatrixXd X = testing::random_matrix(6, 4, 51);
    ForwardCache cache;
    forward(p, X, cache);
    Eigen::MatrixXd go = Eigen::MatrixXd::Zero(6, 2);
    go.col(0).setOnes();  // loss ignores output 1
    const MlpParams g = backward(p, cache, go);
    CHECK(g.layers.back().weight.row(1).isZero(0.0));
    CHECK(g.layers.back().bias(1) == 0.0);
  }

  TEST_CASE("tanh saturation stays finite") {
    MlpParams p;
    p.layers.push_back({Eigen::MatrixXd::Constant(3, 2, 50.0), Eigen::VectorXd::Zero(3), Activation::Tanh});
    p.layers.push_back({Eigen::MatrixXd::Ones(1, 3), Eigen::VectorXd::Zero(1), Activation::Linear});
    Eigen::MatrixXd X(2, 2);
    X << 30, 30, -40, -25;
    ForwardCache cache;
    const Eigen::MatrixXd out = forward(p, X, cache);
    CHECK(out.allFinite());
    CHECK(std::abs(out(0, 0) - 3.0) < 1e-12);
    const MlpParams g = backward(p, cache, Eigen::MatrixXd::Ones(2, 1));
    CHECK(g.layers[0].weight.allFinite());
    CHECK(g.layers[0].weight.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
      MlpParams p = init_params(default_architecture(5, 2).encoder, 6);
      const MlpParams before = p;
      AdamState s = AdamState::for_params(p, 1e-3);
      for (int i = 0; i < 3; ++i) adam_step(p, p.zeros_like(), s);
      for (std::size_t l = 0; l < p.layers.size(); ++l) CHECK(p.layers[l].weight == before.layers[l].weight);
      CHECK(s.step_count == 3);
    }
    SUBCASE("first step moves each entry by lr against the gradient sign") {
      MlpParams p = init_params(default_architecture(5, 2).encoder, 6);
      const MlpParams before = p;
      MlpParams g = p.zeros_like();
      g.layers[0].weight.setConstant(3.0);
      g.layers[1].weight.setConstant(-0.01);
      AdamState s = AdamState::for_params(p, 1e-3);
      adam_step(p, g, s);
      // m_hat = g, v_hat = g^2 => step = lr g / (|g| + eps)
      const double e0 = 1e-3 * 3.0 / (3.0 + 1e-8);
      const double e1 = 1e-3 * 0.01 / (0.01 + 1e-8);
      CHECK(((before.layers[0].weight - p.layers[0].weight).array() - e0).abs().maxCoeff() < 1e-15);
      CHECK(((p.layers[1].weight - before.layers[1].weight).array() - e1).abs().maxCoeff() < 1e-15);
      CHECK(p.layers[2].weight == before.layers[2].weight);
    }
    SUBCASE("second step matches the bias-corrected recursion") {
      MlpParams p;
      p.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), Activation::Linear});
      AdamState s = AdamState::for_params(p, 0.1);
      MlpParams g = p.zeros_like();
      g.layers[0].weight(0, 0) = 2.0;
      adam_step(p, g, s);
      g.layers[0].weight(0, 0) = -1.0;
      adam_step(p, g, s);
      double m = 0.0, v = 0.0, x = 0.0;
      for (int t = 1; t <= 2; ++t) {
        const double gt = t == 1 ? 2.0 : -1.0;
        m = 0.9 * m + 0.1 * gt;
        v = 0.999 * v + 0.001 * gt * gt;
        x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      }
      CHECK(p.layers[0].weight(0, 0) == doctest::Approx(x).epsilon(1e-14));
    }
    SUBCASE("identical runs give identical trajectories") {
      auto run = [] {
        MlpParams p = init_params(default_architecture(5, 2).encoder, 9);
        AdamState s = AdamState::for_params(p, 1e-2);
        const Eigen::MatrixXd X = testing::random_matrix(8, 5, 61);
        for (int i = 0; i < 5; ++i) {
          ForwardCache c;
          const Eigen::MatrixXd out = forward(p, X, c);
          adam_step(p, backward(p, c, out), s);
        }
        return p;
      };
      const MlpParams a = run(), b = run();
      for (std::size_t l = 0; l < a.layers.size(); ++l) CHECK(a.layers[l].weight == b.layers[l].weight);
    }
  }
}
