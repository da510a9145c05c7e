// SPDX-License-Identifier: Apache-2.0
//
// Minimal PPO: tanh MLPs trained with Adam, categorical actors with the
// clipped surrogate objective, and a critic shared by all actors.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lf {

/// Two hidden layers of `hidden` tanh units.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int hidden, int out, std::mt19937_64* rng);

  std::vector<double> forward(const std::vector<double>& x) const;

  struct Trace {
    std::vector<double> x, h1, h2, out;
  };
  std::vector<double> forward(const std::vector<double>& x, Trace* t) const;

  /// Accumulates gradients for dL/dout into `grads` (same layout as params).
  void backward(const Trace& t, const std::vector<double>& dout, std::vector<double>* grads) const;

  void adam_step(const std::vector<double>& grads, double lr);

  size_t param_count() const { return params_.size(); }
  const std::vector<double>& params() const { return params_; }
  bool params_finite() const;

 private:
  int in_ = 0, hidden_ = 0, out_ = 0;
  std::vector<double> params_;
  std::vector<double> adam_m_, adam_v_;
  int64_t adam_t_ = 0;

  // Parameter block offsets.
  size_t w1() const { return 0; }
  size_t b1() const { return static_cast<size_t>(hidden_ * in_); }
  size_t w2() const { return b1() + hidden_; }
  size_t b2() const { return w2() + static_cast<size_t>(hidden_ * hidden_); }
  size_t w3() const { return b2() + hidden_; }
  size_t b3() const { return w3() + static_cast<size_t>(out_ * hidden_); }
};

struct PpoConfig {
  double lr = 3e-4;
  double clip = 0.2;
  int epochs = 10;
  int hidden = 64;
};

struct PpoSample {
  std::vector<double> state;
  int action = 0;
  double logp_old = 0;
  double advantage = 0;
};

/// Softmax policy over a fixed action set.
class CategoricalActor {
 public:
  CategoricalActor() = default;
  CategoricalActor(int state_dim, int actions, const PpoConfig& cfg, std::mt19937_64* rng);

  int sample(const std::vector<double>& state, std::mt19937_64* rng, double* logp) const;
  std::vector<double> probs(const std::vector<double>& state) const;

  /// Clipped-surrogate update. Advantages are normalized across the batch
  /// when it has at least four samples; an all-zero-advantage batch leaves
  /// the parameters untouched. Returns false when non-finite gradients were
  /// detected and the update skipped.
  bool update(const std::vector<PpoSample>& batch);

  bool params_finite() const { return net_.params_finite(); }
  int num_actions() const { return actions_; }

 private:
  Mlp net_;
  int actions_ = 0;
  PpoConfig cfg_;
};

class Critic {
 public:
  Critic() = default;
  Critic(int state_dim, const PpoConfig& cfg, std::mt19937_64* rng);

  double value(const std::vector<double>& state) const;
  /// One pass of squared-error regression toward the targets; returns the
  /// pre-update mean squared error.
  double update(const std::vector<std::vector<double>>& states, const std::vector<double>& targets);

  bool params_finite() const { return net_.params_finite(); }

 private:
  Mlp net_;
  PpoConfig cfg_;
};

}  // namespace lf
