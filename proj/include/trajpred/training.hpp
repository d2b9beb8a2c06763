// SPDX-License-Identifier: Apache-2.0
//
// Composite objective (best-of-K goal loss + trajectory loss + annealed KL),
// schedules, and the two training stages: autoencoder pretraining on density
// maps, then the full model with the autoencoder frozen.

#pragma once

#include "trajpred/metrics.hpp"
#include "trajpred/nn/adam.hpp"
#include "trajpred/pipeline.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace trajpred {

struct KlSchedule {
  double beta_min = 1e-4;
  double beta_max = 1.0;
  int ramp_epochs = 50;
};

enum class LossMinMode {
  kGoalFirst,  // k* = argmin goal distance, then its trajectory
  kJoint,      // k* = argmin (goal term + trajectory term)
};

struct TrainConfig {
  int batch_size = 64;
  double lr0 = 1e-3;
  double lr_gamma = 0.95;
  int epochs = 100;
  int k = 20;
  KlSchedule kl;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  LossMinMode loss_min_mode = LossMinMode::kGoalFirst;
  SelectMode val_select = SelectMode::kMinFdeThenAde;

  void validate() const;
};

struct LossBreakdown {
  double goal = 0.0;
  double traj = 0.0;
  double kld = 0.0;
  double beta = 0.0;
  double total = 0.0;
  int selected_k = 0;
};

/// Monotone linear KL-weight ramp from beta_min at epoch 0 to beta_max at
/// ramp_epochs, constant afterwards.
double kl_weight(int epoch, const KlSchedule& s);

/// lr0 * gamma^epoch.
double learning_rate(int epoch, double lr0, double gamma);

/// Index of the candidate selected by the loss (ties go to the smaller index).
int select_candidate(const Point& goal, const RowMat& future, const RowMat& goals, const std::vector<RowMat>& trajs,
                     LossMinMode mode);

/// Single-sample objective on plain values (oracle and reporting path).
LossBreakdown best_of_k_loss(const Point& goal, const RowMat& future, const RowMat& goals,
                             const std::vector<RowMat>& trajs, const Eigen::VectorXd& q_mean,
                             const Eigen::VectorXd& q_log_var, const Eigen::VectorXd& p_mean,
                             const Eigen::VectorXd& p_log_var, double beta, LossMinMode mode = LossMinMode::kGoalFirst);

struct BatchLoss {
  nn::Var total;
  LossBreakdown parts;  // batch means; selected_k is from the first sample
  std::vector<int> selected;
};

/// Differentiable batch objective on a training-mode forward pass.
BatchLoss batch_loss(const TrajectoryModel& model, const ForwardResult& fwd, std::span<const ModelInput> batch,
                     double beta, LossMinMode mode);

struct AeTrainOptions {
  int epochs = 20;
  int batch_size = 16;
  double lr0 = 1e-3;
  double lr_gamma = 0.95;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
};

struct AeTrainState {
  int next_epoch = 0;
  std::vector<double> loss_history;
};

/// Trains on rows of `frames` ([N, H*W] maps). Resumes from `state` when it
/// carries a later epoch and an optimizer with restored moments.
void train_autoencoder(Autoencoder& ae, nn::Adam& optimizer, const RowMat& frames, const AeTrainOptions& opts,
                       AeTrainState& state, const std::function<void(int, double)>& on_epoch = {});

/// Convenience overload: fresh optimizer, returns per-epoch losses.
std::vector<double> train_autoencoder(Autoencoder& ae, const RowMat& frames, const AeTrainOptions& opts);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double beta = 0.0;
  double loss_total = 0.0;
  double loss_goal = 0.0;
  double loss_traj = 0.0;
  double loss_kld = 0.0;
  double val_min_ade = 0.0;
  double val_min_fde = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> history;
  int best_epoch = -1;
  double best_val_min_ade = 0.0;
  std::vector<nn::Mat> best_params;  // snapshot of model.params()
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Called when a new best validation score is reached.
  std::function<void(const EpochLog&)> on_best;
};

/// Full-model training. Autoencoder parameters are never touched. When `val`
/// is null or empty the last epoch counts as best.
TrainResult train_full(TrajectoryModel& model, const SampleSet& train, const SampleSet* val, const TrainConfig& cfg,
                       const TrainHooks& hooks = {});

/// Best-of-K displacement over a sample set with a fixed seed.
struct SetScore {
  double min_ade = 0.0;
  double min_fde = 0.0;
};
SetScore score_min_of_k(const TrajectoryModel& model, const SampleSet& set, int k, SelectMode mode,
                        std::uint64_t seed, int batch_size = 64);

}  // namespace trajpred
