// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/surrogate.hpp"

#include <cmath>

namespace lf {

void CostModel::add(const FeatureVector& x, double cost) {
  xs_.push_back(x);
  ys_.push_back(cost);
  dirty_ = true;
}

void CostModel::fit() const {
  size_t n = xs_.size();
  size_t d = xs_[0].size();
  mean_.assign(d, 0.0);
  inv_std_.assign(d, 0.0);
  for (const auto& x : xs_)
    for (size_t j = 0; j < d; ++j) mean_[j] += x[j];
  for (size_t j = 0; j < d; ++j) mean_[j] /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& x : xs_)
    for (size_t j = 0; j < d; ++j) var[j] += (x[j] - mean_[j]) * (x[j] - mean_[j]);
  for (size_t j = 0; j < d; ++j) {
    double sd = std::sqrt(var[j] / static_cast<double>(n));
    inv_std_[j] = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant features drop out
  }

  // Normal equations over standardized features; the bias is unpenalized and
  // handled by centering the target.
  double ymean = 0;
  for (double y : ys_) ymean += y;
  ymean /= static_cast<double>(n);

  std::vector<double> a(d * d, 0.0), b(d, 0.0);
  std::vector<double> z(d);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) z[j] = (xs_[i][j] - mean_[j]) * inv_std_[j];
    double yc = ys_[i] - ymean;
    for (size_t j = 0; j < d; ++j) {
      if (z[j] == 0.0) continue;
      b[j] += z[j] * yc;
      for (size_t k = j; k < d; ++k) a[j * d + k] += z[j] * z[k];
    }
  }
  for (size_t j = 0; j < d; ++j) {
    a[j * d + j] += lambda_;
    for (size_t k = 0; k < j; ++k) a[j * d + k] = a[k * d + j];
  }

  // Gaussian elimination with partial pivoting.
  std::vector<double> w = b;
  for (size_t col = 0; col < d; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < d; ++r)
      if (std::abs(a[r * d + col]) > std::abs(a[piv * d + col])) piv = r;
    if (std::abs(a[piv * d + col]) < 1e-12) continue;
    if (piv != col) {
      for (size_t k = 0; k < d; ++k) std::swap(a[col * d + k], a[piv * d + k]);
      std::swap(w[col], w[piv]);
    }
    double inv = 1.0 / a[col * d + col];
    for (size_t r = col + 1; r < d; ++r) {
      double f = a[r * d + col] * inv;
      if (f == 0.0) continue;
      for (size_t k = col; k < d; ++k) a[r * d + k] -= f * a[col * d + k];
      w[r] -= f * w[col];
    }
  }
  weights_.assign(d, 0.0);
  for (size_t col = d; col-- > 0;) {
    if (std::abs(a[col * d + col]) < 1e-12) {
      weights_[col] = 0;
      continue;
    }
    double acc = w[col];
    for (size_t k = col + 1; k < d; ++k) acc -= a[col * d + k] * weights_[k];
    weights_[col] = acc / a[col * d + col];
  }
  bias_ = ymean;
  dirty_ = false;
}

std::optional<double> CostModel::predict(const FeatureVector& x) const {
  if (xs_.size() < min_samples_) return std::nullopt;
  if (dirty_) fit();
  double y = bias_;
  for (size_t j = 0; j < x.size() && j < weights_.size(); ++j)
    y += weights_[j] * (x[j] - mean_[j]) * inv_std_[j];
  if (!std::isfinite(y)) return bias_;
  return y;
}

}  // namespace lf
