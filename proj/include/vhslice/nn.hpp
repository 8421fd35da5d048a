#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhslice/common.hpp"

// Minimal dense network core: ReLU hidden layers, linear output, hand-written
// backprop, Adam and Polyak averaging. Batches are column-major: one sample
// per column.
namespace vhslice::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dense {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
  }
};

class Mlp {
 public:
  Mlp() = default;

  // He-scaled normal weights, zero biases.
  Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
    check_sizes();
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      Dense d;
      d.weight.resize(sizes_[l + 1], sizes_[l]);
      d.bias = Vector::Zero(sizes_[l + 1]);
      const double scale = std::sqrt(2.0 / sizes_[l]);
      for (Eigen::Index j = 0; j < d.weight.cols(); ++j)
        for (Eigen::Index i = 0; i < d.weight.rows(); ++i)
          d.weight(i, j) = scale * standard_normal(rng);
      layers_.push_back(std::move(d));
    }
  }

  static Mlp zeros(std::vector<int> sizes) {
    Mlp m;
    m.sizes_ = std::move(sizes);
    m.check_sizes();
    for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l)
      m.layers_.push_back({Matrix::Zero(m.sizes_[l + 1], m.sizes_[l]), Vector::Zero(m.sizes_[l + 1])});
    return m;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  Dense& layer(std::size_t i) { return layers_.at(i); }
  const Dense& layer(std::size_t i) const { return layers_.at(i); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& d : layers_) n += static_cast<std::size_t>(d.weight.size() + d.bias.size());
    return n;
  }

  // Forward pass that records activations for a following backward().
  Matrix forward(const Matrix& x) {
    check_input(x);
    inputs_.resize(layers_.size());
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      inputs_[l] = a;
      a = layers_[l].weight * inputs_[l];
      a.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) a = a.cwiseMax(0.0);
    }
    cached_ = true;
    return a;
  }

  Vector forward(const Vector& x) {
    Matrix m = forward(Matrix(x));
    return m.col(0);
  }

  // Stateless forward pass; safe to call concurrently on a shared instance.
  Matrix predict(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = l + 1 < layers_.size() ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  MlpGrads make_grads() const {
    MlpGrads g;
    for (const auto& d : layers_) {
      g.weight.push_back(Matrix::Zero(d.weight.rows(), d.weight.cols()));
      g.bias.push_back(Vector::Zero(d.bias.size()));
    }
    return g;
  }

  // Adds d(loss)/d(params) into `grads` given d(loss)/d(output) from the last
  // forward(), and returns d(loss)/d(input).
  Matrix backward(const Matrix& upstream, MlpGrads& grads) const {
    if (!cached_) throw std::logic_error("Mlp::backward called before forward");
    if (upstream.rows() != output_size() || upstream.cols() != inputs_.front().cols())
      throw std::invalid_argument("Mlp::backward: upstream shape mismatch");
    Matrix g = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      grads.weight[l].noalias() += g * inputs_[l].transpose();
      grads.bias[l] += g.rowwise().sum();
      Matrix down = layers_[l].weight.transpose() * g;
      if (l > 0) down = down.cwiseProduct((inputs_[l].array() > 0.0).cast<double>().matrix());
      g = std::move(down);
    }
    return g;
  }

  bool same_shape(const Mlp& other) const { return sizes_ == other.sizes_; }

  bool all_finite() const {
    for (const auto& d : layers_)
      if (!d.weight.allFinite() || !d.bias.allFinite()) return false;
    return true;
  }

 private:
  void check_sizes() const {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
  void check_input(const Matrix& x) const {
    if (x.rows() != input_size())
      throw std::invalid_argument("Mlp: input has " + std::to_string(x.rows()) + " rows, expected " +
                                  std::to_string(input_size()));
  }

  std::vector<int> sizes_;
  std::vector<Dense> layers_;
  std::vector<Matrix> inputs_;  // input of each layer, post-activation
  bool cached_ = false;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over all parameters of one Mlp.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg), m_(net.make_grads()), v_(net.make_grads()) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  void step(Mlp& net, const MlpGrads& g) {
    if (g.weight.size() != net.num_layers() || m_.weight.size() != net.num_layers())
      throw std::invalid_argument("Adam::step: shape mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto& d = net.layer(l);
      if (g.weight[l].rows() != d.weight.rows() || g.weight[l].cols() != d.weight.cols() ||
          g.bias[l].size() != d.bias.size())
        throw std::invalid_argument("Adam::step: shape mismatch");
      update(d.weight, m_.weight[l], v_.weight[l], g.weight[l], c1, c2);
      update(d.bias, m_.bias[l], v_.bias[l], g.bias[l], c1, c2);
    }
  }

 private:
  template <typename P, typename G>
  void update(P& p, P& m, P& v, const G& g, double c1, double c2) const {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }

  AdamConfig cfg_;
  MlpGrads m_;
  MlpGrads v_;
  std::int64_t t_ = 0;
};

// Adam for a single scalar parameter (the entropy coefficient's log).
class ScalarAdam {
 public:
  ScalarAdam() = default;
  explicit ScalarAdam(AdamConfig cfg) : cfg_(cfg) {}

  void step(double& p, double g) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g * g;
    const double mh = m_ / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const double vh = v_ / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    p -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
  }

 private:
  AdamConfig cfg_;
  double m_ = 0.0;
  double v_ = 0.0;
  std::int64_t t_ = 0;
};

// target <- (1 - rate) * target + rate * online
inline void polyak_update(Mlp& target, const Mlp& online, double rate) {
  if (!target.same_shape(online)) throw std::invalid_argument("polyak_update: architecture mismatch");
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("polyak_update: rate must be in [0, 1]");
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    auto& t = target.layer(l);
    const auto& o = online.layer(l);
    t.weight = (1.0 - rate) * t.weight + rate * o.weight;
    t.bias = (1.0 - rate) * t.bias + rate * o.bias;
  }
}

// Checkpoint layout: {"sizes": [...], "layers": [{"weight": row-major, "bias": [...]}]}.
// Doubles are written in shortest round-trip form, so load(save(x)) == x bit-for-bit.
inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json j;
  j["sizes"] = net.sizes();
  j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& d = net.layer(l);
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(d.weight.size()));
    for (Eigen::Index i = 0; i < d.weight.rows(); ++i)
      for (Eigen::Index k = 0; k < d.weight.cols(); ++k) w.push_back(d.weight(i, k));
    std::vector<double> b(d.bias.data(), d.bias.data() + d.bias.size());
    j["layers"].push_back({{"weight", w}, {"bias", b}});
  }
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net = Mlp::zeros(j.at("sizes").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_layers()) throw Error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& d = net.layer(l);
    const auto w = layers[l].at("weight").get<std::vector<double>>();
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(d.weight.size()) ||
        b.size() != static_cast<std::size_t>(d.bias.size()))
      throw Error("checkpoint: parameter count mismatch in layer " + std::to_string(l));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < d.weight.rows(); ++i)
      for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(i, c) = w[k++];
    for (Eigen::Index i = 0; i < d.bias.size(); ++i) d.bias(i) = b[static_cast<std::size_t>(i)];
  }
  return net;
}

inline void save_checkpoint(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json(net).dump() << '\n';
}

inline Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return mlp_from_json(nlohmann::json::parse(in));
}

}  // namespace vhslice::nn
