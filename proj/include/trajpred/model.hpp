// SPDX-License-Identifier: Apache-2.0
//
// Full predictor: relation module, history/future encoders, multi-goal
// estimation and a recurrent future decoder. Ablation flags drop the
// relation branch (R_st := 0 is replaced by leaving it out of the decoder
// conditioning) and/or the goal branch (deterministic, K = 1).

#pragma once

#include "trajpred/dataset.hpp"
#include "trajpred/goal.hpp"
#include "trajpred/relation.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace trajpred {

struct ModelSpec {
  AutoencoderSpec autoencoder;
  RelationSpec relation;
  GoalSpec goal;
  int decoder_hidden = 64;
  int obs_len = 8;
  int pred_len = 12;
  bool use_relation = true;
  bool use_goal = true;
  /// World units per network unit (1 for metres; larger for SDD pixels).
  double coord_scale = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
  /// Small architecture used by gradient checks and fast tests.
  static ModelSpec tiny();
};

/// One sample prepared for the network.
struct ModelInput {
  const SequenceSample* sample = nullptr;
  const LatentGridSequence* latents = nullptr;  // unused when use_relation is false
  RegionPath path;
};

struct ForwardResult {
  int k = 1;
  nn::Var goals;         // [B*K, 2] offsets from the last observed position, network units
  nn::Var trajectories;  // [B*K, T*2] offsets, network units
  nn::Var relation;      // [B, c_r] or null
  nn::Var history;       // [B, c_enc]
  std::optional<LatentDistribution> posterior;
  std::optional<LatentDistribution> prior;
};

struct PredictionSet {
  std::vector<RowMat> trajectories;  // K x [T, 2], world coordinates
  RowMat goals;                      // [K, 2], world coordinates
  RowMat latents;                    // [K, d_z]; empty without the goal branch
  RowMat relation;                   // [1, c_r]; empty without the relation branch

  int k() const { return static_cast<int>(trajectories.size()); }
};

class FutureDecoder {
 public:
  FutureDecoder() = default;
  FutureDecoder(nn::ParameterSet& params, int condition_size, int hidden, int horizon, nn::Rng& rng);

  /// condition: [N, condition_size]. Returns [N, T*2] offsets. The condition
  /// sets the initial state and is fed at every step with the previous output.
  nn::Var operator()(const nn::Var& condition) const;

  int horizon() const { return horizon_; }
  nn::Linear& init() { return init_; }
  nn::GruCell& cell() { return cell_; }
  nn::Linear& head() { return head_; }

 private:
  nn::Linear init_;
  nn::GruCell cell_;
  nn::Linear head_;
  int horizon_ = 12;
};

class TrajectoryModel {
 public:
  TrajectoryModel(const ModelSpec& spec, std::uint64_t seed);

  TrajectoryModel(const TrajectoryModel&) = delete;
  TrajectoryModel& operator=(const TrajectoryModel&) = delete;

  /// Training mode reads Y (future encoder, posterior sampling); inference
  /// mode samples the prior and never touches Y. Without the goal branch K is 1.
  ForwardResult forward(std::span<const ModelInput> batch, int k, nn::Rng& rng, bool training) const;

  /// Conditioning assembled from optional relation/goal and history code.
  nn::Var decode_future(const nn::Var& relation, const nn::Var& goal, const nn::Var& history) const;

  /// Inference without gradients, converted to world coordinates.
  std::vector<PredictionSet> predict(std::span<const ModelInput> batch, int k, nn::Rng& rng) const;

  /// History features relative to the last observed position, scaled.
  Mat history_features(const SequenceSample& s) const;
  Mat future_features(const SequenceSample& s) const;

  const ModelSpec& spec() const { return spec_; }
  int effective_k(int k) const { return spec_.use_goal ? k : 1; }

  Autoencoder& autoencoder() { return autoencoder_; }
  const Autoencoder& autoencoder() const { return autoencoder_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const MotionEncoders& encoders() const { return encoders_; }
  const GoalModule& goal_module() const { return goal_; }
  const RelationModule& relation_module() const { return relation_; }
  FutureDecoder& decoder() { return decoder_; }

 private:
  ModelSpec spec_;
  Autoencoder autoencoder_;
  nn::ParameterSet params_;  // everything except the frozen autoencoder
  MotionEncoders encoders_;
  RelationModule relation_;
  GoalModule goal_;
  FutureDecoder decoder_;
};

}  // namespace trajpred
