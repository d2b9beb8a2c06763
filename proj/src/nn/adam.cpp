// SPDX-License-Identifier: Apache-2.0

#include "trajpred/nn/adam.hpp"

#include <cmath>

namespace trajpred::nn {

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

double Adam::step() {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double factor = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    if (p.grad.size() == 0) continue;
    const Mat g = p.grad * factor;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= cfg_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace trajpred::nn
