// SPDX-License-Identifier: Apache-2.0
//
// Online ridge-regression cost model used to rank candidates so only the
// top-k of each batch is measured.

#pragma once

#include <optional>
#include <vector>

#include "layoutforge/features.hpp"

namespace lf {

class CostModel {
 public:
  explicit CostModel(double lambda = 1e-3, size_t min_samples = 8)
      : lambda_(lambda), min_samples_(min_samples) {}

  void add(const FeatureVector& x, double cost);

  /// nullopt until enough samples are collected; the tuner then measures
  /// without prefiltering.
  std::optional<double> predict(const FeatureVector& x) const;

  size_t size() const { return xs_.size(); }

 private:
  void fit() const;

  double lambda_;
  size_t min_samples_;
  std::vector<FeatureVector> xs_;
  std::vector<double> ys_;
  mutable bool dirty_ = true;
  mutable std::vector<double> weights_;  // over standardized features
  mutable double bias_ = 0;
  mutable std::vector<double> mean_, inv_std_;
};

}  // namespace lf
