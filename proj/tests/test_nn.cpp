#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "vhslice/nn.hpp"

using namespace vhslice::nn;

TEST(Mlp, ZeroNetGivesZeroOutput) {
  auto net = Mlp::zeros({4, 8, 3});
  Vector x = Vector::Random(4);
  EXPECT_TRUE(net.forward(x).isZero(0.0));
}

TEST(Mlp, IdentityLinearNetReturnsInput) {
  auto net = Mlp::zeros({5, 5});
  net.layer(0).weight = Matrix::Identity(5, 5);
  Vector x(5);
  x << 1.0, -2.0, 3.5, 0.0, -7.25;
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, ForwardMatchesLoopOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Mlp net({6, 9, 7, 2}, seed);
    std::vector<double> x{0.3, -1.2, 0.8, 2.0, -0.4, 0.05};
    const auto want = oracle::forward(net, x);
    const Vector got = net.forward(Vector(Eigen::Map<Vector>(x.data(), 6)));
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got(static_cast<Eigen::Index>(i)), want[i], 1e-12);
    const Matrix p = net.predict(Matrix(Eigen::Map<Matrix>(x.data(), 6, 1)));
    EXPECT_EQ(p.col(0), got);
  }
}

TEST(Mlp, ShapeErrors) {
  Mlp net({3, 4, 2}, 1);
  EXPECT_THROW(net.forward(Vector(Vector::Zero(2))), std::invalid_argument);
  auto g = net.make_grads();
  EXPECT_THROW(net.backward(Matrix::Zero(2, 1), g), std::logic_error);
  net.forward(Vector(Vector::Zero(3)));
  EXPECT_THROW(net.backward(Matrix::Zero(3, 1), g), std::invalid_argument);
  EXPECT_THROW(Mlp({3}, 1), std::invalid_argument);
}

TEST(Backprop, LinearQuadraticClosedForm) {
  Mlp net({3, 2}, 4);
  Vector x(3), y(2);
  x << 1.0, -2.0, 0.5;
  y << 0.25, 1.0;
  const Vector out = net.forward(x);
  // loss = |Wx + b - y|^2, dL/dW = 2 (Wx + b - y) x^T
  const Vector r = out - y;
  auto g = net.make_grads();
  net.backward(2.0 * r, g);
  const Matrix want = 2.0 * r * x.transpose();
  EXPECT_TRUE(g.weight[0].isApprox(want, 1e-14));
  EXPECT_TRUE(g.bias[0].isApprox(2.0 * r, 1e-14));
}

TEST(Backprop, FiniteDifferenceOnTwentyNets) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) EXPECT_LT(oracle::gradcheck_error(seed), 1e-4) << seed;
}

TEST(Backprop, ZeroUpstreamGivesZeroGradients) {
  Mlp net({4, 6, 2}, 2);
  net.forward(Matrix(Matrix::Random(4, 5)));
  auto g = net.make_grads();
  const Matrix dx = net.backward(Matrix::Zero(2, 5), g);
  for (const auto& w : g.weight) EXPECT_TRUE(w.isZero(0.0));
  for (const auto& b : g.bias) EXPECT_TRUE(b.isZero(0.0));
  EXPECT_TRUE(dx.isZero(0.0));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  Mlp net({2, 2}, 3);
  const Mlp before = net;
  Adam opt(net, {1e-3, 0.9, 0.999, 1e-8});
  auto g = net.make_grads();
  g.weight[0] << 0.5, -2.0, 3.0, -0.01;
  g.bias[0] << 7.0, -7.0;
  opt.step(net, g);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double delta = net.layer(0).weight.data()[i] - before.layer(0).weight.data()[i];
    const double sign = g.weight[0].data()[i] > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(delta, -1e-3 * sign, 1e-8);
  }
  EXPECT_NEAR(net.layer(0).bias(0) - before.layer(0).bias(0), -1e-3, 1e-8);
  EXPECT_NEAR(net.layer(0).bias(1) - before.layer(0).bias(1), 1e-3, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Mlp net({3, 5, 1}, 9);
  const Mlp before = net;
  Adam opt(net, {});
  auto g = net.make_grads();
  for (int i = 0; i < 5; ++i) opt.step(net, g);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(net.layer(l).weight, before.layer(l).weight);
    EXPECT_EQ(net.layer(l).bias, before.layer(l).bias);
  }
}

TEST(Adam, RunsAreBitIdentical) {
  auto run = [] {
    Mlp net({3, 8, 2}, 5);
    Adam opt(net, {});
    Matrix x = Matrix::Ones(3, 4);
    for (int i = 0; i < 50; ++i) {
      const Matrix y = net.forward(x);
      auto g = net.make_grads();
      net.backward(y, g);
      opt.step(net, g);
      x *= 0.9;
    }
    return to_json(net).dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Polyak, RateOneCopiesOnline) {
  Mlp t({3, 4, 2}, 1), o({3, 4, 2}, 2);
  polyak_update(t, o, 1.0);
  for (std::size_t l = 0; l < t.num_layers(); ++l) EXPECT_EQ(t.layer(l).weight, o.layer(l).weight);
}

TEST(Polyak, RateZeroKeepsTarget) {
  Mlp t({3, 4, 2}, 1), o({3, 4, 2}, 2);
  const Mlp before = t;
  polyak_update(t, o, 0.0);
  for (std::size_t l = 0; l < t.num_layers(); ++l) EXPECT_EQ(t.layer(l).weight, before.layer(l).weight);
}

TEST(Polyak, GeometricConvergenceFromConstants) {
  auto t = Mlp::zeros({2, 2});
  auto o = Mlp::zeros({2, 2});
  t.layer(0).weight.setConstant(1.0);
  o.layer(0).weight.setConstant(3.0);
  const double z = 0.005;
  for (int n = 1; n <= 1000; ++n) {
    polyak_update(t, o, z);
    const double want = 3.0 - 2.0 * std::pow(1.0 - z, n);
    ASSERT_NEAR(t.layer(0).weight(0, 0), want, 1e-12) << n;
  }
}

TEST(Polyak, IsAContraction) {
  Mlp t({4, 6, 3}, 11), o({4, 6, 3}, 12);
  auto dist = [&] {
    double s = 0.0;
    for (std::size_t l = 0; l < t.num_layers(); ++l)
      s += (t.layer(l).weight - o.layer(l).weight).squaredNorm() + (t.layer(l).bias - o.layer(l).bias).squaredNorm();
    return std::sqrt(s);
  };
  const double d0 = dist();
  polyak_update(t, o, 0.005);
  EXPECT_NEAR(dist(), 0.995 * d0, 1e-12 * d0);
  EXPECT_THROW(polyak_update(t, Mlp({4, 5, 3}, 1), 0.1), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExact) {
  Mlp net({10, 16, 16, 2}, 77);
  const auto path = (std::filesystem::temp_directory_path() / "vhslice_nn_ckpt.json").string();
  save_checkpoint(net, path);
  const Mlp back = load_checkpoint(path);
  ASSERT_EQ(back.sizes(), net.sizes());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(back.layer(l).weight, net.layer(l).weight);
    EXPECT_EQ(back.layer(l).bias, net.layer(l).bias);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), vhslice::Error);
}
