// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajpred/nn/autograd.hpp"

#include <vector>

namespace trajpred::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables global-norm clipping
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig cfg);

  /// Clips by global norm, applies one update and returns the pre-clip norm.
  double step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

  long long step_count() const { return t_; }
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  void set_step_count(long long t) { t_ = t; }

 private:
  std::vector<Var> params_;
  AdamConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long long t_ = 0;
};

}  // namespace trajpred::nn
