// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/rl.hpp"

#include <algorithm>
#include <cmath>

namespace lf {

Mlp::Mlp(int in, int hidden, int out, std::mt19937_64* rng)
    : in_(in), hidden_(hidden), out_(out) {
  size_t total = static_cast<size_t>(hidden * in) + hidden +
                 static_cast<size_t>(hidden * hidden) + hidden +
                 static_cast<size_t>(out * hidden) + out;
  params_.resize(total);
  adam_m_.assign(total, 0.0);
  adam_v_.assign(total, 0.0);
  auto init = [&](size_t off, size_t count, int fan_in, int fan_out) {
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> d(-s, s);
    for (size_t i = 0; i < count; ++i) params_[off + i] = d(*rng);
  };
  init(w1(), static_cast<size_t>(hidden * in), in, hidden);
  init(w2(), static_cast<size_t>(hidden * hidden), hidden, hidden);
  init(w3(), static_cast<size_t>(out * hidden), hidden, out);
  // Biases start at zero; the output layer starts small so initial policies
  // are near uniform.
  for (size_t i = 0; i < static_cast<size_t>(out * hidden); ++i) params_[w3() + i] *= 0.01;
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
  Trace t;
  return forward(x, &t);
}

std::vector<double> Mlp::forward(const std::vector<double>& x, Trace* t) const {
  t->x = x;
  t->h1.assign(hidden_, 0.0);
  for (int i = 0; i < hidden_; ++i) {
    double acc = params_[b1() + i];
    const double* w = &params_[w1() + static_cast<size_t>(i) * in_];
    for (int j = 0; j < in_; ++j) acc += w[j] * x[j];
    t->h1[i] = std::tanh(acc);
  }
  t->h2.assign(hidden_, 0.0);
  for (int i = 0; i < hidden_; ++i) {
    double acc = params_[b2() + i];
    const double* w = &params_[w2() + static_cast<size_t>(i) * hidden_];
    for (int j = 0; j < hidden_; ++j) acc += w[j] * t->h1[j];
    t->h2[i] = std::tanh(acc);
  }
  t->out.assign(out_, 0.0);
  for (int i = 0; i < out_; ++i) {
    double acc = params_[b3() + i];
    const double* w = &params_[w3() + static_cast<size_t>(i) * hidden_];
    for (int j = 0; j < hidden_; ++j) acc += w[j] * t->h2[j];
    t->out[i] = acc;
  }
  return t->out;
}

void Mlp::backward(const Trace& t, const std::vector<double>& dout,
                   std::vector<double>* grads) const {
  std::vector<double> dh2(hidden_, 0.0);
  for (int i = 0; i < out_; ++i) {
    double d = dout[i];
    if (d == 0.0) continue;
    (*grads)[b3() + i] += d;
    double* gw = &(*grads)[w3() + static_cast<size_t>(i) * hidden_];
    const double* w = &params_[w3() + static_cast<size_t>(i) * hidden_];
    for (int j = 0; j < hidden_; ++j) {
      gw[j] += d * t.h2[j];
      dh2[j] += d * w[j];
    }
  }
  std::vector<double> dh1(hidden_, 0.0);
  for (int i = 0; i < hidden_; ++i) {
    double d = dh2[i] * (1.0 - t.h2[i] * t.h2[i]);
    if (d == 0.0) continue;
    (*grads)[b2() + i] += d;
    double* gw = &(*grads)[w2() + static_cast<size_t>(i) * hidden_];
    const double* w = &params_[w2() + static_cast<size_t>(i) * hidden_];
    for (int j = 0; j < hidden_; ++j) {
      gw[j] += d * t.h1[j];
      dh1[j] += d * w[j];
    }
  }
  for (int i = 0; i < hidden_; ++i) {
    double d = dh1[i] * (1.0 - t.h1[i] * t.h1[i]);
    if (d == 0.0) continue;
    (*grads)[b1() + i] += d;
    double* gw = &(*grads)[w1() + static_cast<size_t>(i) * in_];
    for (int j = 0; j < in_; ++j) gw[j] += d * t.x[j];
  }
}

void Mlp::adam_step(const std::vector<double>& grads, double lr) {
  constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  ++adam_t_;
  double c1 = 1.0 - std::pow(kB1, static_cast<double>(adam_t_));
  double c2 = 1.0 - std::pow(kB2, static_cast<double>(adam_t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    adam_m_[i] = kB1 * adam_m_[i] + (1 - kB1) * grads[i];
    adam_v_[i] = kB2 * adam_v_[i] + (1 - kB2) * grads[i] * grads[i];
    params_[i] -= lr * (adam_m_[i] / c1) / (std::sqrt(adam_v_[i] / c2) + kEps);
  }
}

bool Mlp::params_finite() const {
  for (double p : params_)
    if (!std::isfinite(p)) return false;
  return true;
}

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

}  // namespace

CategoricalActor::CategoricalActor(int state_dim, int actions, const PpoConfig& cfg,
                                   std::mt19937_64* rng)
    : net_(state_dim, cfg.hidden, actions, rng), actions_(actions), cfg_(cfg) {}

int CategoricalActor::sample(const std::vector<double>& state, std::mt19937_64* rng,
                             double* logp) const {
  std::vector<double> p = softmax(net_.forward(state));
  std::uniform_real_distribution<double> d(0.0, 1.0);
  double u = d(*rng);
  double acc = 0;
  int choice = actions_ - 1;
  for (int i = 0; i < actions_; ++i) {
    acc += p[i];
    if (u < acc) {
      choice = i;
      break;
    }
  }
  if (logp) *logp = std::log(std::max(p[choice], 1e-300));
  return choice;
}

std::vector<double> CategoricalActor::probs(const std::vector<double>& state) const {
  return softmax(net_.forward(state));
}

bool CategoricalActor::update(const std::vector<PpoSample>& batch) {
  if (batch.empty()) return true;
  std::vector<double> adv(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) adv[i] = batch[i].advantage;
  bool all_zero = std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; });
  if (all_zero) return true;  // gradient is identically zero
  if (batch.size() >= 4) {
    double mean = 0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0;
    for (double a : adv) var += (a - mean) * (a - mean);
    double sd = std::sqrt(var / static_cast<double>(adv.size()));
    if (sd > 1e-9)
      for (auto& a : adv) a = (a - mean) / sd;
  }

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::vector<double> grads(net_.param_count(), 0.0);
    for (size_t i = 0; i < batch.size(); ++i) {
      const PpoSample& s = batch[i];
      Mlp::Trace t;
      std::vector<double> logits = net_.forward(s.state, &t);
      std::vector<double> p = softmax(logits);
      double logp = std::log(std::max(p[s.action], 1e-300));
      double ratio = std::exp(logp - s.logp_old);
      double a = adv[i];
      // d(-min(r*A, clip(r)*A))/dlogp: zero when the clipped branch is active
      // and the ratio sits outside the clip range.
      bool clipped_active = (a > 0 && ratio > 1 + cfg_.clip) || (a < 0 && ratio < 1 - cfg_.clip);
      if (clipped_active) continue;
      double dlogp = -a * ratio / static_cast<double>(batch.size());
      std::vector<double> dlogits(actions_);
      for (int k = 0; k < actions_; ++k)
        dlogits[k] = dlogp * ((k == s.action ? 1.0 : 0.0) - p[k]);
      net_.backward(t, dlogits, &grads);
    }
    bool finite = std::all_of(grads.begin(), grads.end(),
                              [](double g) { return std::isfinite(g); });
    if (!finite) return false;
    net_.adam_step(grads, cfg_.lr);
  }
  return true;
}

Critic::Critic(int state_dim, const PpoConfig& cfg, std::mt19937_64* rng)
    : net_(state_dim, cfg.hidden, 1, rng), cfg_(cfg) {}

double Critic::value(const std::vector<double>& state) const { return net_.forward(state)[0]; }

double Critic::update(const std::vector<std::vector<double>>& states,
                      const std::vector<double>& targets) {
  if (states.empty()) return 0.0;
  double mse_before = 0;
  for (size_t i = 0; i < states.size(); ++i) {
    double v = value(states[i]);
    mse_before += (v - targets[i]) * (v - targets[i]);
  }
  mse_before /= static_cast<double>(states.size());

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::vector<double> grads(net_.param_count(), 0.0);
    for (size_t i = 0; i < states.size(); ++i) {
      Mlp::Trace t;
      double v = net_.forward(states[i], &t)[0];
      double d = 2.0 * (v - targets[i]) / static_cast<double>(states.size());
      net_.backward(t, {d}, &grads);
    }
    bool finite = std::all_of(grads.begin(), grads.end(),
                              [](double g) { return std::isfinite(g); });
    if (!finite) return mse_before;
    net_.adam_step(grads, cfg_.lr);
  }
  return mse_before;
}

}  // namespace lf
