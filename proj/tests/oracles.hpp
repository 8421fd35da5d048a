#pragma once

// Independent reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "vhslice/nn.hpp"

namespace oracle {

// Greedy form of largest remainder: start from the floors and hand out one RB
// at a time to the user with the largest exact deficit b*N - n*total (lowest
// index on ties).
inline std::vector<int> proportional(int n_rb, const std::vector<std::int64_t>& b) {
  std::vector<int> n(b.size(), 0);
  std::int64_t total = 0;
  for (auto v : b) total += v;
  if (total == 0) return n;
  int given = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    n[i] = static_cast<int>(b[i] * n_rb / total);
    given += n[i];
  }
  while (given < n_rb) {
    std::size_t best = 0;
    std::int64_t best_def = std::numeric_limits<std::int64_t>::min();
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::int64_t def = b[i] * n_rb - static_cast<std::int64_t>(n[i]) * total;
      if (def > best_def) {
        best_def = def;
        best = i;
      }
    }
    ++n[best];
    ++given;
  }
  return n;
}

// Scalar reward with every threshold written out; vh selects the
// video-haptic variant, otherwise the baseline.
inline double reward(bool vh, double rh, double rv, double lh, double lv, double th, double tv, double worst,
                     double c) {
  double r = 0.0;
  if (rh < 0.2e6) r -= (0.2e6 - rh) / 0.2e6;
  if (rv < 4e6) r -= (4e6 - rv) / 4e6;
  if (lh > 1e-5) r -= (lh - 1e-5) / (c * 1e-5);
  if (lv > 1e-1) r -= (lv - 1e-1) / (c * 1e-1);
  if (vh) {
    if (worst > 10.0) r -= (worst - 10.0) / 20.0;
    const double d = tv > th ? tv - th : th - tv;
    if (d > 50.0) r -= (d - 50.0) / 50.0;
  } else if (th > 1.0) {
    r -= (th - 1.0) / 20.0;
  }
  return r;
}

// Plain-loop forward pass, no Eigen expressions.
inline std::vector<double> forward(const vhslice::nn::Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& d = net.layer(l);
    std::vector<double> y(static_cast<std::size_t>(d.weight.rows()));
    for (Eigen::Index i = 0; i < d.weight.rows(); ++i) {
      double s = d.bias(i);
      for (Eigen::Index j = 0; j < d.weight.cols(); ++j) s += d.weight(i, j) * x[static_cast<std::size_t>(j)];
      if (l + 1 < net.num_layers() && s < 0.0) s = 0.0;
      y[static_cast<std::size_t>(i)] = s;
    }
    x = std::move(y);
  }
  return x;
}

// Max relative error between backprop and central differences (h = 1e-5) of
// the loss sum(c .* net(X)) over every parameter of one random net with at most
// three layers of at most 16 units.
inline double gradcheck_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(1, 16), depth(1, 3);
  std::vector<int> sizes{width(rng)};
  const int layers = depth(rng);
  for (int l = 0; l < layers; ++l) sizes.push_back(width(rng));
  vhslice::nn::Mlp net(sizes, seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (Eigen::Index i = 0; i < net.layer(l).bias.size(); ++i) net.layer(l).bias(i) = 0.1 * nd(rng);
  const int batch = 3;
  vhslice::nn::Matrix x(sizes.front(), batch), c(sizes.back(), batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = nd(rng);

  auto loss = [&](vhslice::nn::Mlp& n) { return n.predict(x).cwiseProduct(c).sum(); };
  net.forward(x);
  auto grads = net.make_grads();
  net.backward(c, grads);

  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double up = loss(net);
    p = keep - h;
    const double down = loss(net);
    p = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& d = net.layer(l);
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) check(d.weight.data()[i], grads.weight[l].data()[i]);
    for (Eigen::Index i = 0; i < d.bias.size(); ++i) check(d.bias.data()[i], grads.bias[l].data()[i]);
  }
  return worst;
}

}  // namespace oracle
