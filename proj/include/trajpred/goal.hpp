// SPDX-License-Identifier: Apache-2.0
//
// Stochastic multi-goal estimation with a conditional VAE. The posterior
// network sees history and future encodings, the prior sees history only;
// goals are decoded from latent samples concatenated with the history code.
// No parametric output distribution is imposed on the goals.

#pragma once

#include "trajpred/nn/layers.hpp"

#include <vector>

namespace trajpred {

using nn::Mat;

struct GoalSpec {
  int history_features = 6;
  int future_features = 2;
  int encoder_hidden = 64;  // c_enc
  int latent_dim = 32;      // d_z
  int mlp_hidden = 64;
  double log_var_min = -10.0;
  double log_var_max = 10.0;
};

/// Row-batched diagonal Gaussian: mean and log-variance are [B, d_z].
struct LatentDistribution {
  nn::Var mean;
  nn::Var log_var;
};

/// History and future GRU encoders.
struct MotionEncoders {
  nn::GruCell history;
  nn::GruCell future;

  MotionEncoders() = default;
  MotionEncoders(nn::ParameterSet& params, const GoalSpec& spec, nn::Rng& rng);
};

/// Final hidden state of a GRU run over `steps` (each [B, features]).
/// Throws ContractError on NaN input or an empty sequence.
nn::Var encode_sequence(const nn::GruCell& cell, const std::vector<nn::Var>& steps);

/// Splits a [n, f] sequence into n single-row step inputs.
std::vector<nn::Var> sequence_steps(const Mat& sequence);

class GoalModule {
 public:
  GoalModule() = default;
  GoalModule(nn::ParameterSet& params, const GoalSpec& spec, nn::Rng& rng);

  LatentDistribution joint_posterior(const nn::Var& h_x, const nn::Var& h_y) const;
  LatentDistribution prior(const nn::Var& h_x) const;
  /// z: [B*K, d_z] grouped K rows per sample; h_x: [B, c_enc]. Returns [B*K, 2].
  nn::Var decode_goals(const nn::Var& z, const nn::Var& h_x, int k) const;

  const GoalSpec& spec() const { return spec_; }
  const nn::Mlp2& posterior_net() const { return q_net_; }
  const nn::Mlp2& prior_net() const { return p_net_; }
  const nn::Mlp2& goal_decoder() const { return decoder_; }

 private:
  LatentDistribution split(const nn::Var& out) const;

  GoalSpec spec_;
  nn::Mlp2 q_net_;
  nn::Mlp2 p_net_;
  nn::Mlp2 decoder_;
};

/// Standard-normal draws [rows, d_z] in row-major order from rng.
Mat standard_normal(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng);

/// Reparameterised samples z = mean + exp(log_var / 2) * eps, [B*K, d_z].
nn::Var sample_latent(const LatentDistribution& dist, int k, const Mat& eps);
nn::Var sample_latent(const LatentDistribution& dist, int k, nn::Rng& rng);

/// KL(q || p) per row for diagonal Gaussians: [B, 1].
nn::Var kld(const LatentDistribution& q, const LatentDistribution& p);

/// Closed-form KL(q || p) for a single pair of diagonal Gaussians.
double kld_value(const Eigen::VectorXd& mean_q, const Eigen::VectorXd& log_var_q, const Eigen::VectorXd& mean_p,
                 const Eigen::VectorXd& log_var_p);

}  // namespace trajpred
