#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhslice/common.hpp"
#include "vhslice/nn.hpp"

namespace vhslice {

// Inter-slice split. raw is the policy output in [-1, 1].
struct SlicingAction {
  double raw = 0.0;
  int haptic_rbs = 0;
  int video_rbs = 0;
};

// n_h = clamp(round((a + 1) / 2 * N), rb_min, N - rb_min); n_v = N - n_h.
inline SlicingAction map_action(double raw, int n_rb, int rb_min) {
  if (rb_min < 0 || 2 * rb_min > n_rb) throw std::invalid_argument("map_action: bad rb_min");
  const double a = std::clamp(raw, -1.0, 1.0);
  const long n = std::lround((a + 1.0) / 2.0 * n_rb);
  const int h = static_cast<int>(std::clamp<long>(n, rb_min, n_rb - rb_min));
  return {raw, h, n_rb - h};
}

struct Transition {
  std::vector<double> obs;
  double action = 0.0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

struct Batch {
  nn::Matrix obs;       // obs_dim x B
  nn::Vector action;    // B
  nn::Vector reward;    // B
  nn::Matrix next_obs;  // obs_dim x B
  nn::Vector done;      // B, 1.0 for terminal
  Eigen::Index size() const { return action.size(); }
};

// Ring buffer of transitions with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t obs_dim, std::size_t capacity) : obs_dim_(obs_dim), capacity_(capacity) {
    if (obs_dim == 0 || capacity == 0) throw std::invalid_argument("ReplayBuffer: zero size");
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t next_slot() const { return head_; }

  void store(const Transition& t) {
    if (t.obs.size() != obs_dim_ || t.next_obs.size() != obs_dim_)
      throw std::invalid_argument("ReplayBuffer::store: observation size mismatch");
    if (size_ < capacity_) {
      obs_.insert(obs_.end(), t.obs.begin(), t.obs.end());
      next_obs_.insert(next_obs_.end(), t.next_obs.begin(), t.next_obs.end());
      action_.push_back(t.action);
      reward_.push_back(t.reward);
      done_.push_back(t.done ? 1.0 : 0.0);
      ++size_;
    } else {
      std::copy(t.obs.begin(), t.obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(head_ * obs_dim_));
      std::copy(t.next_obs.begin(), t.next_obs.end(),
                next_obs_.begin() + static_cast<std::ptrdiff_t>(head_ * obs_dim_));
      action_[head_] = t.action;
      reward_[head_] = t.reward;
      done_[head_] = t.done ? 1.0 : 0.0;
    }
    head_ = (head_ + 1) % capacity_;
  }

  Transition at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("ReplayBuffer::at");
    Transition t;
    t.obs.assign(obs_.begin() + static_cast<std::ptrdiff_t>(i * obs_dim_),
                 obs_.begin() + static_cast<std::ptrdiff_t>((i + 1) * obs_dim_));
    t.next_obs.assign(next_obs_.begin() + static_cast<std::ptrdiff_t>(i * obs_dim_),
                      next_obs_.begin() + static_cast<std::ptrdiff_t>((i + 1) * obs_dim_));
    t.action = action_[i];
    t.reward = reward_[i];
    t.done = done_[i] != 0.0;
    return t;
  }

  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0 || size_ < batch_size)
      throw std::length_error("ReplayBuffer::sample: buffer holds " + std::to_string(size_) +
                              " transitions, batch needs " + std::to_string(batch_size));
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx)
      i = std::min(size_ - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(size_)));
    return idx;
  }

  Batch sample(std::size_t batch_size, Rng& rng) const {
    const auto idx = sample_indices(batch_size, rng);
    const auto d = static_cast<Eigen::Index>(obs_dim_);
    const auto n = static_cast<Eigen::Index>(batch_size);
    Batch b{nn::Matrix(d, n), nn::Vector(n), nn::Vector(n), nn::Matrix(d, n), nn::Vector(n)};
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto i = idx[static_cast<std::size_t>(c)];
      for (Eigen::Index r = 0; r < d; ++r) {
        b.obs(r, c) = obs_[i * obs_dim_ + static_cast<std::size_t>(r)];
        b.next_obs(r, c) = next_obs_[i * obs_dim_ + static_cast<std::size_t>(r)];
      }
      b.action(c) = action_[i];
      b.reward(c) = reward_[i];
      b.done(c) = done_[i];
    }
    return b;
  }

 private:
  std::size_t obs_dim_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  std::vector<double> obs_, next_obs_, action_, reward_, done_;
};

struct SacConfig {
  std::vector<int> hidden{512, 512, 256};
  std::size_t batch_size = 1024;
  double learning_rate = 1e-4;
  double gamma = 0.99;
  double polyak_rate = 0.005;
  std::size_t buffer_capacity = 1'000'000;
  bool auto_entropy = true;
  double initial_lambda = 0.2;  // also the fixed value when auto_entropy is off
  double target_entropy = -1.0;  // -(action dimension)
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden.empty()) throw ConfigError("sac.hidden: need at least one hidden layer");
    for (int h : hidden)
      if (h <= 0) throw ConfigError("sac.hidden: sizes must be > 0");
    if (batch_size == 0) throw ConfigError("sac.batch_size: must be > 0");
    if (learning_rate < 0.0) throw ConfigError("sac.learning_rate: must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("sac.gamma: must be in [0, 1]");
    if (polyak_rate < 0.0 || polyak_rate > 1.0) throw ConfigError("sac.polyak_rate: must be in [0, 1]");
    if (buffer_capacity == 0) throw ConfigError("sac.buffer_capacity: must be > 0");
    if (auto_entropy ? !(initial_lambda > 0.0) : initial_lambda < 0.0)
      throw ConfigError("sac.initial_lambda: must be > 0 (>= 0 when fixed)");
    if (!(log_std_max > log_std_min)) throw ConfigError("sac.log_std: max must exceed min");
  }
};

// Soft Bellman target for one sample.
inline double soft_bellman_target(double reward, bool done, double gamma, double q1, double q2,
                                  double lambda, double log_prob) {
  return reward + gamma * (done ? 0.0 : 1.0) * (std::min(q1, q2) - lambda * log_prob);
}

struct LossReport {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double lambda_loss = 0.0;
  double lambda = 0.0;
  double mean_log_prob = 0.0;
};

// Soft actor-critic over a single continuous action in [-1, 1]:
// tanh-squashed Gaussian actor, twin critics with Polyak-averaged targets and
// an entropy coefficient tuned toward target_entropy.
class SacAgent {
 public:
  enum class Mode { stochastic, deterministic };

  SacAgent(std::size_t obs_dim, SacConfig cfg)
      : cfg_(std::move(cfg)), obs_dim_(obs_dim), buffer_(obs_dim, cfg_.buffer_capacity) {
    cfg_.validate();
    const int d = static_cast<int>(obs_dim);
    actor_ = nn::Mlp(layer_sizes(d, 2), derive_seed(cfg_.seed, 1));
    critic1_ = nn::Mlp(layer_sizes(d + 1, 1), derive_seed(cfg_.seed, 2));
    critic2_ = nn::Mlp(layer_sizes(d + 1, 1), derive_seed(cfg_.seed, 3));
    target1_ = critic1_;
    target2_ = critic2_;
    const nn::AdamConfig adam{cfg_.learning_rate};
    actor_opt_ = nn::Adam(actor_, adam);
    critic1_opt_ = nn::Adam(critic1_, adam);
    critic2_opt_ = nn::Adam(critic2_, adam);
    lambda_opt_ = nn::ScalarAdam(adam);
    log_lambda_ = cfg_.initial_lambda > 0.0 ? std::log(cfg_.initial_lambda)
                                            : -std::numeric_limits<double>::infinity();
  }

  const SacConfig& config() const { return cfg_; }
  std::size_t obs_dim() const { return obs_dim_; }
  double lambda() const { return std::exp(log_lambda_); }
  double log_lambda() const { return log_lambda_; }
  std::int64_t updates() const { return updates_; }

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic(int i) { return i == 0 ? critic1_ : critic2_; }
  nn::Mlp& target_critic(int i) { return i == 0 ? target1_ : target2_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic(int i) const { return i == 0 ? critic1_ : critic2_; }
  const nn::Mlp& target_critic(int i) const { return i == 0 ? target1_ : target2_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  void store(const Transition& t) { buffer_.store(t); }
  Batch sample(std::size_t batch_size, Rng& rng) const { return buffer_.sample(batch_size, rng); }

  // Raw action in [-1, 1]. Stochastic mode draws from the squashed Gaussian;
  // deterministic mode returns tanh(mean).
  double act(std::span<const double> obs, Mode mode, Rng& rng) const {
    if (obs.size() != obs_dim_) throw std::invalid_argument("SacAgent::act: observation size mismatch");
    nn::Matrix x(static_cast<Eigen::Index>(obs_dim_), 1);
    for (std::size_t i = 0; i < obs_dim_; ++i) x(static_cast<Eigen::Index>(i), 0) = obs[i];
    const nn::Matrix out = actor_.predict(x);
    if (mode == Mode::deterministic) return std::tanh(out(0, 0));
    const double eps = standard_normal(rng);
    return std::tanh(out(0, 0) + std::exp(log_std(out(1, 0))) * eps);
  }

  // Policy sample for every column of `obs` with the supplied noise.
  struct PolicySample {
    nn::Vector mean, raw_std, log_std, noise, pre_tanh, action, log_prob;
  };

  PolicySample policy_sample(const nn::Matrix& actor_out, const nn::Vector& noise) const {
    const Eigen::Index n = actor_out.cols();
    PolicySample p;
    p.mean = actor_out.row(0).transpose();
    p.raw_std = actor_out.row(1).transpose();
    p.noise = noise;
    p.log_std.resize(n);
    p.pre_tanh.resize(n);
    p.action.resize(n);
    p.log_prob.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p.log_std(i) = log_std(p.raw_std(i));
      p.pre_tanh(i) = p.mean(i) + std::exp(p.log_std(i)) * noise(i);
      p.action(i) = std::tanh(p.pre_tanh(i));
      p.log_prob(i) = squashed_log_prob(p.pre_tanh(i), p.log_std(i), noise(i));
    }
    return p;
  }

  // log N(u; mu, sigma) - log(1 - tanh(u)^2) with u = mu + sigma * eps, in a
  // form that stays finite for large |u|.
  static double squashed_log_prob(double pre_tanh, double log_std, double eps) {
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    const double gaussian = -0.5 * eps * eps - log_std - kHalfLog2Pi;
    const double log_one_minus_tanh2 =
        2.0 * (std::log(2.0) - pre_tanh - softplus(-2.0 * pre_tanh));
    return gaussian - log_one_minus_tanh2;
  }

  nn::Vector critic_targets(const Batch& batch, Rng& rng) const {
    if (batch.size() == 0) throw std::invalid_argument("critic_targets: empty batch");
    const Eigen::Index n = batch.size();
    nn::Vector noise(n);
    for (Eigen::Index i = 0; i < n; ++i) noise(i) = standard_normal(rng);
    const auto next = policy_sample(actor_.predict(batch.next_obs), noise);
    const nn::Matrix x = stack(batch.next_obs, next.action);
    const nn::Matrix q1 = target1_.predict(x);
    const nn::Matrix q2 = target2_.predict(x);
    const double lam = lambda();
    nn::Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i)
      y(i) = soft_bellman_target(batch.reward(i), batch.done(i) != 0.0, cfg_.gamma, q1(0, i), q2(0, i),
                                 lam, next.log_prob(i));
    return y;
  }

  // One gradient step for both critics, the actor and the entropy
  // coefficient, then Polyak-average the target critics.
  LossReport update(Rng& rng) {
    const Batch batch = buffer_.sample(cfg_.batch_size, rng);
    return update_on(batch, rng);
  }

  LossReport update_on(const Batch& batch, Rng& rng) {
    const Eigen::Index n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossReport rep;

    const nn::Vector y = critic_targets(batch, rng);
    const nn::Matrix x = stack(batch.obs, batch.action);
    rep.critic1_loss = critic_step(critic1_, critic1_opt_, x, y);
    rep.critic2_loss = critic_step(critic2_, critic2_opt_, x, y);

    // Actor: minimize E[lambda * log pi(a|s) - min_i Q_i(s, a)], a reparameterized.
    nn::Vector noise(n);
    for (Eigen::Index i = 0; i < n; ++i) noise(i) = standard_normal(rng);
    const nn::Matrix out = actor_.forward(batch.obs);
    const auto ps = policy_sample(out, noise);
    const nn::Matrix xa = stack(batch.obs, ps.action);
    const nn::Matrix q1 = critic1_.forward(xa);
    const nn::Matrix q2 = critic2_.forward(xa);
    nn::Matrix pick1 = nn::Matrix::Zero(1, n), pick2 = nn::Matrix::Zero(1, n);
    nn::Vector qmin(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q1(0, i) <= q2(0, i)) {
        pick1(0, i) = 1.0;
        qmin(i) = q1(0, i);
      } else {
        pick2(0, i) = 1.0;
        qmin(i) = q2(0, i);
      }
    }
    auto scratch1 = critic1_.make_grads();
    auto scratch2 = critic2_.make_grads();
    const nn::Matrix dx1 = critic1_.backward(pick1, scratch1);
    const nn::Matrix dx2 = critic2_.backward(pick2, scratch2);
    const Eigen::Index act_row = static_cast<Eigen::Index>(obs_dim_);

    const double lam = lambda();
    const double half_range = 0.5 * (cfg_.log_std_max - cfg_.log_std_min);
    nn::Matrix g(2, n);
    double actor_loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = ps.action(i);
      const double sigma = std::exp(ps.log_std(i));
      const double eps = ps.noise(i);
      const double dq_da = dx1(act_row, i) + dx2(act_row, i);
      const double dq_du = dq_da * (1.0 - a * a);
      const double d_mean = lam * 2.0 * a - dq_du;
      const double d_log_std = lam * (-1.0 + 2.0 * a * sigma * eps) - dq_du * sigma * eps;
      const double t = std::tanh(ps.raw_std(i));
      g(0, i) = inv_n * d_mean;
      g(1, i) = inv_n * d_log_std * half_range * (1.0 - t * t);
      actor_loss += inv_n * ((lam > 0.0 ? lam * ps.log_prob(i) : 0.0) - qmin(i));
    }
    auto actor_grads = actor_.make_grads();
    actor_.backward(g, actor_grads);
    actor_opt_.step(actor_, actor_grads);
    rep.actor_loss = actor_loss;
    rep.mean_log_prob = ps.log_prob.mean();

    if (cfg_.auto_entropy) {
      // d/d(log lambda) of -log_lambda * E[log pi + target_entropy]
      const double excess = rep.mean_log_prob + cfg_.target_entropy;
      rep.lambda_loss = -log_lambda_ * excess;
      lambda_opt_.step(log_lambda_, -excess);
    }
    rep.lambda = lambda();

    nn::polyak_update(target1_, critic1_, cfg_.polyak_rate);
    nn::polyak_update(target2_, critic2_, cfg_.polyak_rate);
    ++updates_;
    return rep;
  }

  // Networks, entropy coefficient and replay-buffer metadata. The buffer
  // contents are not persisted.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "vhslice-sac-v1";
    j["obs_dim"] = obs_dim_;
    j["hidden"] = cfg_.hidden;
    j["log_lambda"] = log_lambda_;
    j["updates"] = updates_;
    j["buffer"] = {{"size", buffer_.size()}, {"capacity", buffer_.capacity()}, {"next_slot", buffer_.next_slot()}};
    j["actor"] = nn::to_json(actor_);
    j["critic1"] = nn::to_json(critic1_);
    j["critic2"] = nn::to_json(critic2_);
    j["target1"] = nn::to_json(target1_);
    j["target2"] = nn::to_json(target2_);
    return j;
  }

  void load_json(const nlohmann::json& j) {
    if (j.at("format") != "vhslice-sac-v1") throw Error("agent checkpoint: unknown format");
    if (j.at("obs_dim").get<std::size_t>() != obs_dim_) throw Error("agent checkpoint: obs_dim mismatch");
    auto load = [&](const char* key, nn::Mlp& dst) {
      nn::Mlp m = nn::mlp_from_json(j.at(key));
      if (!m.same_shape(dst)) throw Error(std::string("agent checkpoint: shape mismatch for ") + key);
      dst = std::move(m);
    };
    load("actor", actor_);
    load("critic1", critic1_);
    load("critic2", critic2_);
    load("target1", target1_);
    load("target2", target2_);
    if (j.at("log_lambda").is_null())
      log_lambda_ = -std::numeric_limits<double>::infinity();
    else
      log_lambda_ = j.at("log_lambda").get<double>();
    updates_ = j.at("updates").get<std::int64_t>();
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json().dump() << '\n';
  }

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    load_json(nlohmann::json::parse(in));
  }

 private:
  std::vector<int> layer_sizes(int in, int out) const {
    std::vector<int> s{in};
    s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    s.push_back(out);
    return s;
  }

  // Smooth map of the raw actor output onto [log_std_min, log_std_max].
  double log_std(double raw) const {
    return cfg_.log_std_min + 0.5 * (cfg_.log_std_max - cfg_.log_std_min) * (std::tanh(raw) + 1.0);
  }

  static double softplus(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
  }

  static nn::Matrix stack(const nn::Matrix& obs, const nn::Vector& action) {
    nn::Matrix x(obs.rows() + 1, obs.cols());
    x.topRows(obs.rows()) = obs;
    x.row(obs.rows()) = action.transpose();
    return x;
  }

  double critic_step(nn::Mlp& critic, nn::Adam& opt, const nn::Matrix& x, const nn::Vector& y) {
    const nn::Matrix q = critic.forward(x);
    const nn::Matrix err = q - y.transpose();
    const double n = static_cast<double>(y.size());
    auto grads = critic.make_grads();
    critic.backward(err * (2.0 / n), grads);
    opt.step(critic, grads);
    return err.squaredNorm() / n;
  }

  SacConfig cfg_;
  std::size_t obs_dim_;
  nn::Mlp actor_, critic1_, critic2_, target1_, target2_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_;
  nn::ScalarAdam lambda_opt_;
  double log_lambda_ = 0.0;
  ReplayBuffer buffer_;
  std::int64_t updates_ = 0;
};

}  // namespace vhslice
