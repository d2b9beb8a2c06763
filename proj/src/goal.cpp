// SPDX-License-Identifier: Apache-2.0

#include "trajpred/goal.hpp"

#include "trajpred/errors.hpp"

#include <cmath>

namespace trajpred {

using nn::Var;

MotionEncoders::MotionEncoders(nn::ParameterSet& params, const GoalSpec& spec, nn::Rng& rng)
    : history(params, "encoder.history", spec.history_features, spec.encoder_hidden, rng),
      future(params, "encoder.future", spec.future_features, spec.encoder_hidden, rng) {}

Var encode_sequence(const nn::GruCell& cell, const std::vector<Var>& steps) {
  if (steps.empty()) throw ContractError("encode_sequence: empty sequence");
  for (const auto& s : steps) {
    if (s->cols() != cell.input_size) throw ContractError("encode_sequence: feature width mismatch");
    if (!s->value.allFinite()) throw ContractError("encode_sequence: non-finite input");
  }
  Var h = nn::constant(Mat::Zero(steps.front()->rows(), cell.hidden_size));
  for (const auto& x : steps) h = cell.step(x, h);
  return h;
}

std::vector<Var> sequence_steps(const Mat& sequence) {
  std::vector<Var> steps;
  for (Eigen::Index t = 0; t < sequence.rows(); ++t) steps.push_back(nn::constant(sequence.row(t)));
  return steps;
}

GoalModule::GoalModule(nn::ParameterSet& params, const GoalSpec& spec, nn::Rng& rng) : spec_(spec) {
  q_net_ = nn::Mlp2(params, "goal.posterior", 2 * spec.encoder_hidden, spec.mlp_hidden, 2 * spec.latent_dim, rng);
  p_net_ = nn::Mlp2(params, "goal.prior", spec.encoder_hidden, spec.mlp_hidden, 2 * spec.latent_dim, rng);
  decoder_ = nn::Mlp2(params, "goal.decoder", spec.latent_dim + spec.encoder_hidden, spec.mlp_hidden, 2, rng);
}

LatentDistribution GoalModule::split(const Var& out) const {
  const Eigen::Index d = spec_.latent_dim;
  return {nn::slice_cols(out, 0, d), nn::clamp(nn::slice_cols(out, d, d), spec_.log_var_min, spec_.log_var_max)};
}

LatentDistribution GoalModule::joint_posterior(const Var& h_x, const Var& h_y) const {
  if (h_x->rows() != h_y->rows()) throw ContractError("joint_posterior: batch mismatch between h_X and h_Y");
  return split(q_net_(nn::concat_cols({h_x, h_y})));
}

LatentDistribution GoalModule::prior(const Var& h_x) const { return split(p_net_(h_x)); }

Var GoalModule::decode_goals(const Var& z, const Var& h_x, int k) const {
  if (k < 1 || z->rows() != h_x->rows() * k) throw ContractError("decode_goals: expected B*K latent rows");
  return decoder_(nn::concat_cols({z, nn::repeat_rows(h_x, k)}));
}

Mat standard_normal(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat eps(rows, cols);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = n01(rng);
  return eps;
}

Var sample_latent(const LatentDistribution& dist, int k, const Mat& eps) {
  if (k < 1) throw ContractError("sample_latent: K must be >= 1");
  if (eps.rows() != dist.mean->rows() * k || eps.cols() != dist.mean->cols()) {
    throw ContractError("sample_latent: noise shape mismatch");
  }
  Var std_dev = nn::exp(nn::scale(dist.log_var, 0.5));
  return nn::add(nn::repeat_rows(dist.mean, k), nn::mul(nn::repeat_rows(std_dev, k), nn::constant(eps)));
}

Var sample_latent(const LatentDistribution& dist, int k, nn::Rng& rng) {
  return sample_latent(dist, k, standard_normal(dist.mean->rows() * k, dist.mean->cols(), rng));
}

Var kld(const LatentDistribution& q, const LatentDistribution& p) {
  // 0.5 * sum[(var_q + (mu_q - mu_p)^2) / var_p - 1 + logvar_p - logvar_q]
  Var var_q = nn::exp(q.log_var);
  Var inv_var_p = nn::exp(nn::scale(p.log_var, -1.0));
  Var num = nn::add(var_q, nn::square(nn::sub(q.mean, p.mean)));
  Var terms = nn::add(nn::add_scalar(nn::mul(num, inv_var_p), -1.0), nn::sub(p.log_var, q.log_var));
  return nn::scale(nn::row_sum(terms), 0.5);
}

double kld_value(const Eigen::VectorXd& mean_q, const Eigen::VectorXd& log_var_q, const Eigen::VectorXd& mean_p,
                 const Eigen::VectorXd& log_var_p) {
  if (mean_q.size() != mean_p.size() || log_var_q.size() != mean_q.size() || log_var_p.size() != mean_p.size()) {
    throw ContractError("kld: dimension mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < mean_q.size(); ++i) {
    const double vq = std::exp(log_var_q[i]);
    const double vp = std::exp(log_var_p[i]);
    const double dm = mean_q[i] - mean_p[i];
    total += (vq + dm * dm) / vp - 1.0 + log_var_p[i] - log_var_q[i];
  }
  return 0.5 * total;
}

}  // namespace trajpred
