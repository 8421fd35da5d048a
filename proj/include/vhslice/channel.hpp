#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vhslice/common.hpp"
#include "vhslice/csv.hpp"

namespace vhslice {

using UserId = std::int32_t;

// Anything that yields a per-user spectrum efficiency (bits/Hz) per TTI.
class SpectrumSource {
 public:
  virtual ~SpectrumSource() = default;
  virtual double se(UserId user, std::int64_t tti) = 0;
  virtual std::size_t num_users() const = 0;
};

struct ChannelParams {
  double mean_se = 5.0;      // eta, bits/Hz
  double fluctuation = 0.25;  // sigma, envelope half-width as a fraction of eta
  int correlation_ms = 50;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(mean_se > 0.0)) throw ConfigError("channel: mean_se must be > 0");
    if (fluctuation < 0.0 || fluctuation > 0.5)
      throw ConfigError("channel: fluctuation must lie in [0, 0.5]");
    if (correlation_ms <= 0) throw ConfigError("channel: correlation_ms must be > 0");
  }
};

// Synthetic SE process: se = eta * (1 + sigma * clip(x, -1, 1)) where x is a
// per-user stationary AR(1) latent with coefficient exp(-1/correlation_ms).
class ChannelModel final : public SpectrumSource {
 public:
  // Marginal standard deviation of the latent; the +-1 clip sits at 2 std.
  static constexpr double kLatentStd = 0.5;

  ChannelModel(ChannelParams params, std::size_t num_users) : params_(params) {
    params_.validate();
    coefficient_ = std::exp(-1.0 / params_.correlation_ms);
    innovation_std_ = kLatentStd * std::sqrt(1.0 - coefficient_ * coefficient_);
    users_.reserve(num_users);
    for (std::size_t u = 0; u < num_users; ++u) {
      UserState s;
      s.rng.seed(derive_seed(params_.rng_seed, u));
      s.latent = kLatentStd * standard_normal(s.rng);
      users_.push_back(std::move(s));
    }
  }

  const ChannelParams& params() const { return params_; }
  double coefficient() const { return coefficient_; }
  std::size_t num_users() const override { return users_.size(); }

  double se(UserId user, std::int64_t tti) override {
    return params_.mean_se * (1.0 + params_.fluctuation * std::clamp(latent(user, tti), -1.0, 1.0));
  }

  // Unclipped latent value; exposed for statistical checks.
  double latent(UserId user, std::int64_t tti) {
    auto& s = state(user);
    if (tti < 0) throw std::invalid_argument("channel: tti must be >= 0");
    if (tti < s.tti) throw std::invalid_argument("channel: tti went backwards");
    while (s.tti < tti) {
      s.latent = coefficient_ * s.latent + innovation_std_ * standard_normal(s.rng);
      ++s.tti;
    }
    return s.latent;
  }

 private:
  struct UserState {
    Rng rng;
    double latent = 0.0;
    std::int64_t tti = 0;
  };

  UserState& state(UserId user) {
    if (user < 0 || static_cast<std::size_t>(user) >= users_.size())
      throw std::out_of_range("channel: unknown user id " + std::to_string(user));
    return users_[static_cast<std::size_t>(user)];
  }

  ChannelParams params_;
  double coefficient_ = 0.0;
  double innovation_std_ = 0.0;
  std::vector<UserState> users_;
};

// Replays per-user SE series at 1 ms resolution; wraps around past the end.
class SeTrace final : public SpectrumSource {
 public:
  SeTrace() = default;
  explicit SeTrace(std::vector<std::vector<double>> series) : series_(std::move(series)) {
    validate();
  }

  std::size_t num_users() const override { return series_.size(); }
  std::size_t length() const { return series_.empty() ? 0 : series_.front().size(); }
  const std::vector<std::vector<double>>& series() const { return series_; }

  double se(UserId user, std::int64_t tti) override {
    if (user < 0 || static_cast<std::size_t>(user) >= series_.size())
      throw std::out_of_range("se trace: unknown user id " + std::to_string(user));
    if (tti < 0) throw std::invalid_argument("se trace: tti must be >= 0");
    const auto& s = series_[static_cast<std::size_t>(user)];
    return s[static_cast<std::size_t>(tti) % s.size()];
  }

 private:
  void validate() const {
    if (series_.empty()) throw ConfigError("se trace: no users");
    const auto n = series_.front().size();
    if (n == 0) throw ConfigError("se trace: empty series");
    for (const auto& s : series_) {
      if (s.size() != n) throw ConfigError("se trace: users have unequal lengths");
      for (double v : s)
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("se trace: values must be > 0");
    }
  }

  std::vector<std::vector<double>> series_;
};

// Reads a `tti,user_id,se_bits_per_hz` CSV sorted by (tti, user_id). Users
// must be 0..N-1 and every TTI from 0 must list all of them.
inline SeTrace load_se_trace(const std::string& path) {
  struct Row {
    std::int64_t tti;
    UserId user;
    double se;
    std::size_t line;
  };
  std::vector<Row> rows;
  csv::read_file(path, "tti,user_id,se_bits_per_hz",
                 [&](const std::vector<std::string_view>& f, std::size_t line) {
                   if (f.size() != 3) throw ParseError(path, line, "expected 3 fields");
                   Row r{0, 0, 0.0, line};
                   if (!csv::parse_number(f[0], r.tti)) throw ParseError(path, line, "bad tti");
                   if (!csv::parse_number(f[1], r.user)) throw ParseError(path, line, "bad user_id");
                   if (!csv::parse_number(f[2], r.se) || !std::isfinite(r.se))
                     throw ParseError(path, line, "bad se_bits_per_hz");
                   if (!(r.se > 0.0)) throw ParseError(path, line, "se must be > 0");
                   rows.push_back(r);
                 });
  if (rows.empty()) throw ParseError(path, 1, "trace has no samples");

  std::size_t users = 0;
  while (users < rows.size() && rows[users].tti == rows.front().tti) ++users;
  std::vector<std::vector<double>> series(users);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto expect_tti = static_cast<std::int64_t>(i / users);
    const auto expect_user = static_cast<UserId>(i % users);
    if (r.tti != expect_tti || r.user != expect_user)
      throw ParseError(path, r.line, "rows must be sorted by (tti, user_id), start at tti 0 "
                                     "and list every user in every tti");
    series[static_cast<std::size_t>(r.user)].push_back(r.se);
  }
  if (rows.size() % users != 0) throw ParseError(path, rows.back().line, "last tti is missing users");
  return SeTrace(std::move(series));
}

// Argmin of SE at tti over `users`; ties go to the lowest id.
inline UserId worst_se_user(SpectrumSource& source, std::span<const UserId> users,
                            std::int64_t tti) {
  if (users.empty()) throw std::invalid_argument("worst_se_user: empty user list");
  UserId best = users.front();
  double best_se = source.se(best, tti);
  for (std::size_t i = 1; i < users.size(); ++i) {
    const double v = source.se(users[i], tti);
    if (v < best_se || (v == best_se && users[i] < best)) {
      best = users[i];
      best_se = v;
    }
  }
  return best;
}

// Same rule over values already sampled for this TTI.
inline std::size_t argmin_lowest_id(std::span<const double> se, std::span<const UserId> ids) {
  if (se.empty()) throw std::invalid_argument("argmin: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < se.size(); ++i)
    if (se[i] < se[best] || (se[i] == se[best] && ids[i] < ids[best])) best = i;
  return best;
}

}  // namespace vhslice
