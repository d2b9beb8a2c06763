// SPDX-License-Identifier: Apache-2.0

#include "trajpred/training.hpp"

#include "trajpred/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace trajpred {

using nn::Var;

namespace {

nn::Rng epoch_rng(std::uint64_t seed, int epoch, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(salt)};
  return nn::Rng(seq);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1 || epochs < 0 || k < 1) throw ConfigError("batch_size and k must be >= 1, epochs >= 0");
  if (!(lr0 > 0.0) || !(lr_gamma > 0.0)) throw ConfigError("learning rate and gamma must be positive");
  if (kl.beta_min < 0.0 || kl.beta_max < kl.beta_min || kl.ramp_epochs < 0) {
    throw ConfigError("KL schedule needs 0 <= beta_min <= beta_max and ramp_epochs >= 0");
  }
}

double kl_weight(int epoch, const KlSchedule& s) {
  if (epoch < 0) throw ContractError("kl_weight: negative epoch");
  if (s.ramp_epochs == 0 || epoch >= s.ramp_epochs) return s.beta_max;
  const double frac = static_cast<double>(epoch) / s.ramp_epochs;
  return s.beta_min + (s.beta_max - s.beta_min) * frac;
}

double learning_rate(int epoch, double lr0, double gamma) { return lr0 * std::pow(gamma, epoch); }

namespace {

double goal_term(const Point& goal, const RowMat& goals, int k) {
  return (goals.row(k).transpose() - goal).squaredNorm();
}

double traj_term(const RowMat& future, const RowMat& traj) {
  return (traj - future).rowwise().squaredNorm().mean();
}

}  // namespace

int select_candidate(const Point& goal, const RowMat& future, const RowMat& goals, const std::vector<RowMat>& trajs,
                     LossMinMode mode) {
  if (goals.rows() < 1 || goals.cols() != 2) throw ContractError("select_candidate: goals must be [K>=1, 2]");
  if (mode == LossMinMode::kJoint && static_cast<Eigen::Index>(trajs.size()) != goals.rows()) {
    throw ContractError("select_candidate: K mismatch between goals and trajectories");
  }
  int best = 0;
  double best_key = std::numeric_limits<double>::infinity();
  for (int k = 0; k < goals.rows(); ++k) {
    double key = goal_term(goal, goals, k);
    if (mode == LossMinMode::kJoint) key += traj_term(future, trajs[static_cast<std::size_t>(k)]);
    if (key < best_key) {
      best_key = key;
      best = k;
    }
  }
  return best;
}

LossBreakdown best_of_k_loss(const Point& goal, const RowMat& future, const RowMat& goals,
                             const std::vector<RowMat>& trajs, const Eigen::VectorXd& q_mean,
                             const Eigen::VectorXd& q_log_var, const Eigen::VectorXd& p_mean,
                             const Eigen::VectorXd& p_log_var, double beta, LossMinMode mode) {
  if (static_cast<Eigen::Index>(trajs.size()) != goals.rows()) throw ContractError("best_of_k_loss: K mismatch");
  LossBreakdown out;
  out.selected_k = select_candidate(goal, future, goals, trajs, mode);
  out.goal = goal_term(goal, goals, out.selected_k);
  out.traj = traj_term(future, trajs[static_cast<std::size_t>(out.selected_k)]);
  out.kld = kld_value(q_mean, q_log_var, p_mean, p_log_var);
  out.beta = beta;
  out.total = out.goal + out.traj + beta * out.kld;
  return out;
}

BatchLoss batch_loss(const TrajectoryModel& model, const ForwardResult& fwd, std::span<const ModelInput> batch,
                     double beta, LossMinMode mode) {
  const int B = static_cast<int>(batch.size());
  const int K = fwd.k;
  const int T = model.spec().pred_len;
  const bool goal_branch = model.spec().use_goal;

  RowMat futures(B, 2 * T);
  RowMat goal_targets(B, 2);
  for (int b = 0; b < B; ++b) {
    const Mat f = model.future_features(*batch[static_cast<std::size_t>(b)].sample);
    futures.row(b) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), 2 * T);
    goal_targets.row(b) = f.row(T - 1);
  }

  BatchLoss out;
  std::vector<int> rows(static_cast<std::size_t>(B));
  const RowMat& g = fwd.goals->value;
  const RowMat& y = fwd.trajectories->value;
  for (int b = 0; b < B; ++b) {
    int best = 0;
    double best_key = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * K + k;
      double key = goal_branch ? (g.row(r) - goal_targets.row(b)).squaredNorm() : 0.0;
      if (mode == LossMinMode::kJoint || !goal_branch) key += (y.row(r) - futures.row(b)).squaredNorm() / T;
      if (key < best_key) {
        best_key = key;
        best = k;
      }
    }
    out.selected.push_back(best);
    rows[static_cast<std::size_t>(b)] = b * K + best;
  }

  Var traj_diff = nn::sub(nn::gather_rows(fwd.trajectories, rows), nn::constant(futures));
  Var traj_loss = nn::scale(nn::sum(nn::square(traj_diff)), 1.0 / (static_cast<double>(B) * T));
  Var total = traj_loss;
  out.parts.traj = traj_loss->value(0, 0);
  if (goal_branch) {
    Var goal_diff = nn::sub(nn::gather_rows(fwd.goals, rows), nn::constant(goal_targets));
    Var goal_loss = nn::scale(nn::sum(nn::square(goal_diff)), 1.0 / B);
    Var kl = nn::mean(kld(*fwd.posterior, *fwd.prior));
    total = nn::add(nn::add(goal_loss, traj_loss), nn::scale(kl, beta));
    out.parts.goal = goal_loss->value(0, 0);
    out.parts.kld = kl->value(0, 0);
  }
  out.parts.beta = beta;
  out.parts.total = total->value(0, 0);
  out.parts.selected_k = out.selected.front();
  out.total = total;
  return out;
}

void train_autoencoder(Autoencoder& ae, nn::Adam& optimizer, const RowMat& frames, const AeTrainOptions& opts,
                       AeTrainState& state, const std::function<void(int, double)>& on_epoch) {
  if (frames.rows() == 0) throw ContractError("train_autoencoder: no density maps");
  if (opts.batch_size < 1) throw ConfigError("autoencoder batch size must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(frames.rows()));
  for (int epoch = state.next_epoch; epoch < opts.epochs; ++epoch) {
    optimizer.set_lr(learning_rate(epoch, opts.lr0, opts.lr_gamma));
    std::iota(order.begin(), order.end(), 0);
    nn::Rng rng = epoch_rng(opts.seed, epoch, 0xAE);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(opts.batch_size));
      RowMat batch(static_cast<Eigen::Index>(n), frames.cols());
      for (std::size_t i = 0; i < n; ++i) batch.row(static_cast<Eigen::Index>(i)) = frames.row(order[start + i]);
      Var loss = ae.training_loss(batch);
      const double value = loss->value(0, 0);
      if (!std::isfinite(value)) {
        throw DivergenceError("autoencoder loss became non-finite at epoch " + std::to_string(epoch + 1));
      }
      optimizer.zero_grad();
      nn::backward(loss);
      optimizer.step();
      loss_sum += value * static_cast<double>(n);
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    state.loss_history.push_back(epoch_loss);
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
}

std::vector<double> train_autoencoder(Autoencoder& ae, const RowMat& frames, const AeTrainOptions& opts) {
  nn::Adam optimizer(ae.params().vars(), nn::AdamConfig{opts.lr0, 0.9, 0.999, 1e-8, opts.grad_clip});
  AeTrainState state;
  train_autoencoder(ae, optimizer, frames, opts, state);
  return state.loss_history;
}

SetScore score_min_of_k(const TrajectoryModel& model, const SampleSet& set, int k, SelectMode mode,
                        std::uint64_t seed, int batch_size) {
  SetScore score;
  if (set.size() == 0) return score;
  nn::Rng rng(seed);
  std::vector<int> idx;
  for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(static_cast<int>(i));
    }
    const Batch b = make_batch(set, idx, model.spec().use_relation);
    const auto preds = model.predict(b.inputs, k, rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const BestOfK r = best_of_k(mode, preds[j].trajectories, set.samples[static_cast<std::size_t>(idx[j])].Y);
      score.min_ade += r.min_ade;
      score.min_fde += r.min_fde;
    }
  }
  score.min_ade /= static_cast<double>(set.size());
  score.min_fde /= static_cast<double>(set.size());
  return score;
}

TrainResult train_full(TrajectoryModel& model, const SampleSet& train, const SampleSet* val, const TrainConfig& cfg,
                       const TrainHooks& hooks) {
  cfg.validate();
  if (train.size() == 0) throw ContractError("train_full: empty training set");
  nn::Adam optimizer(model.params().vars(), nn::AdamConfig{cfg.lr0, 0.9, 0.999, 1e-8, cfg.grad_clip});
  const bool relation = model.spec().use_relation;
  const bool have_val = val != nullptr && val->size() > 0;

  TrainResult result;
  std::vector<int> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = learning_rate(epoch, cfg.lr0, cfg.lr_gamma);
    log.beta = kl_weight(epoch, cfg.kl);
    optimizer.set_lr(log.lr);

    std::iota(order.begin(), order.end(), 0);
    nn::Rng rng = epoch_rng(cfg.seed, epoch, 0xF0);
    std::shuffle(order.begin(), order.end(), rng);
    double n_seen = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const int> idx(order.data() + start, end - start);
      const Batch b = make_batch(train, idx, relation);
      const ForwardResult fwd = model.forward(b.inputs, cfg.k, rng, true);
      const BatchLoss loss = batch_loss(model, fwd, b.inputs, log.beta, cfg.loss_min_mode);
      if (!std::isfinite(loss.parts.total)) {
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch + 1));
      }
      optimizer.zero_grad();
      nn::backward(loss.total);
      optimizer.step();
      const double w = static_cast<double>(idx.size());
      log.loss_total += loss.parts.total * w;
      log.loss_goal += loss.parts.goal * w;
      log.loss_traj += loss.parts.traj * w;
      log.loss_kld += loss.parts.kld * w;
      n_seen += w;
    }
    log.loss_total /= n_seen;
    log.loss_goal /= n_seen;
    log.loss_traj /= n_seen;
    log.loss_kld /= n_seen;

    if (have_val) {
      const SetScore s = score_min_of_k(model, *val, cfg.k, cfg.val_select, cfg.seed + 7919, cfg.batch_size);
      log.val_min_ade = s.min_ade;
      log.val_min_fde = s.min_fde;
    }
    result.history.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);

    const bool better = !have_val || result.best_epoch < 0 || log.val_min_ade < result.best_val_min_ade;
    if (better) {
      result.best_epoch = log.epoch;
      result.best_val_min_ade = log.val_min_ade;
      result.best_params = model.params().snapshot();
      if (hooks.on_best) hooks.on_best(log);
    }
  }
  return result;
}

}  // namespace trajpred
