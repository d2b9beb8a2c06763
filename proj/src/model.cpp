// SPDX-License-Identifier: Apache-2.0

#include "trajpred/model.hpp"

#include "trajpred/errors.hpp"

namespace trajpred {

using nn::Var;

namespace {

std::string cell_name(CellKind k) { return k == CellKind::kLstm ? "lstm" : "gru"; }

CellKind parse_cell(const std::string& s) {
  if (s == "lstm") return CellKind::kLstm;
  if (s == "gru") return CellKind::kGru;
  throw ConfigError("unknown recurrent cell kind '" + s + "' (expected lstm or gru)");
}

}  // namespace

void ModelSpec::validate() const {
  autoencoder.validate();
  if (relation.latent_channels != autoencoder.latent_channels()) {
    throw ConfigError("relation latent channels must equal the autoencoder latent channels");
  }
  if (obs_len < 1 || pred_len < 1) throw ConfigError("obs_len and pred_len must be >= 1");
  if (decoder_hidden < 1 || goal.encoder_hidden < 1 || goal.latent_dim < 1 || goal.mlp_hidden < 1 ||
      relation.temporal_hidden < 1 || relation.relation_hidden < 1) {
    throw ConfigError("layer widths must be positive");
  }
  if (!(coord_scale > 0.0)) throw ConfigError("coord_scale must be positive");
}

nlohmann::json ModelSpec::to_json() const {
  return {
      {"map_height", autoencoder.map_height},
      {"map_width", autoencoder.map_width},
      {"ae_channels", autoencoder.channels},
      {"ae_input_gain", autoencoder.input_gain},
      {"temporal_cell", cell_name(relation.temporal_cell)},
      {"temporal_hidden", relation.temporal_hidden},
      {"relation_hidden", relation.relation_hidden},
      {"encoder_hidden", goal.encoder_hidden},
      {"latent_dim", goal.latent_dim},
      {"mlp_hidden", goal.mlp_hidden},
      {"decoder_hidden", decoder_hidden},
      {"obs_len", obs_len},
      {"pred_len", pred_len},
      {"use_relation", use_relation},
      {"use_goal", use_goal},
      {"coord_scale", coord_scale},
  };
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.autoencoder.map_height = j.at("map_height").get<int>();
    s.autoencoder.map_width = j.at("map_width").get<int>();
    s.autoencoder.channels = j.at("ae_channels").get<std::vector<int>>();
    s.autoencoder.input_gain = j.at("ae_input_gain").get<double>();
    s.relation.temporal_cell = parse_cell(j.at("temporal_cell").get<std::string>());
    s.relation.latent_channels = s.autoencoder.channels.empty() ? 0 : s.autoencoder.channels.back();
    s.relation.temporal_hidden = j.at("temporal_hidden").get<int>();
    s.relation.relation_hidden = j.at("relation_hidden").get<int>();
    s.goal.encoder_hidden = j.at("encoder_hidden").get<int>();
    s.goal.latent_dim = j.at("latent_dim").get<int>();
    s.goal.mlp_hidden = j.at("mlp_hidden").get<int>();
    s.decoder_hidden = j.at("decoder_hidden").get<int>();
    s.obs_len = j.at("obs_len").get<int>();
    s.pred_len = j.at("pred_len").get<int>();
    s.use_relation = j.at("use_relation").get<bool>();
    s.use_goal = j.at("use_goal").get<bool>();
    s.coord_scale = j.at("coord_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model descriptor: ") + e.what());
  }
  s.validate();
  return s;
}

ModelSpec ModelSpec::tiny() {
  ModelSpec s;
  s.autoencoder.map_height = 16;
  s.autoencoder.map_width = 16;
  s.autoencoder.channels = {4, 4, 4};
  s.relation.latent_channels = 4;
  s.relation.temporal_hidden = 6;
  s.relation.relation_hidden = 5;
  s.goal.encoder_hidden = 6;
  s.goal.latent_dim = 3;
  s.goal.mlp_hidden = 7;
  s.decoder_hidden = 6;
  s.obs_len = 4;
  s.pred_len = 3;
  return s;
}

FutureDecoder::FutureDecoder(nn::ParameterSet& params, int condition_size, int hidden, int horizon, nn::Rng& rng)
    : init_(params, "decoder.init", condition_size, hidden, rng),
      cell_(params, "decoder.cell", condition_size + 2, hidden, rng),
      head_(params, "decoder.head", hidden, 2, rng),
      horizon_(horizon) {}

Var FutureDecoder::operator()(const Var& condition) const {
  Var h = nn::tanh(init_(condition));
  Var prev = nn::constant(Mat::Zero(condition->rows(), 2));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(horizon_));
  for (int t = 0; t < horizon_; ++t) {
    h = cell_.step(nn::concat_cols({condition, prev}), h);
    prev = head_(h);
    outputs.push_back(prev);
  }
  return nn::concat_cols(outputs);
}

namespace {

int condition_size(const ModelSpec& s) {
  return (s.use_relation ? s.relation.relation_hidden : 0) + (s.use_goal ? 2 : 0) + s.goal.encoder_hidden;
}

}  // namespace

TrajectoryModel::TrajectoryModel(const ModelSpec& spec, std::uint64_t seed)
    : spec_(spec), autoencoder_(spec.autoencoder, nn::Rng(seed)) {
  spec_.validate();
  nn::Rng rng(seed + 1);
  encoders_ = MotionEncoders(params_, spec_.goal, rng);
  if (spec_.use_relation) relation_ = RelationModule(params_, spec_.relation, rng);
  if (spec_.use_goal) goal_ = GoalModule(params_, spec_.goal, rng);
  decoder_ = FutureDecoder(params_, condition_size(spec_), spec_.decoder_hidden, spec_.pred_len, rng);
}

Mat TrajectoryModel::history_features(const SequenceSample& s) const {
  if (s.obs_len() != spec_.obs_len || s.X.cols() != 6) {
    throw ContractError("history has " + std::to_string(s.obs_len()) + " steps, model expects " +
                        std::to_string(spec_.obs_len));
  }
  Mat f = s.X / spec_.coord_scale;
  const Point last = s.last_observed() / spec_.coord_scale;
  f.col(0).array() -= last.x();
  f.col(1).array() -= last.y();
  return f;
}

Mat TrajectoryModel::future_features(const SequenceSample& s) const {
  if (s.pred_len() != spec_.pred_len) {
    throw ContractError("sample has no future of length " + std::to_string(spec_.pred_len));
  }
  Mat f = s.Y / spec_.coord_scale;
  const Point last = s.last_observed() / spec_.coord_scale;
  f.col(0).array() -= last.x();
  f.col(1).array() -= last.y();
  return f;
}

Var TrajectoryModel::decode_future(const Var& relation, const Var& goal, const Var& history) const {
  std::vector<Var> parts;
  if (spec_.use_relation) {
    if (!relation) throw ContractError("decode_future: relation vector required");
    parts.push_back(relation);
  }
  if (spec_.use_goal) {
    if (!goal) throw ContractError("decode_future: goal required");
    parts.push_back(goal);
  }
  parts.push_back(history);
  return decoder_(nn::concat_cols(parts));
}

ForwardResult TrajectoryModel::forward(std::span<const ModelInput> batch, int k, nn::Rng& rng, bool training) const {
  if (batch.empty()) throw ContractError("forward: empty batch");
  if (k < 1) throw ContractError("forward: K must be >= 1");
  const auto B = static_cast<Eigen::Index>(batch.size());
  ForwardResult out;
  out.k = effective_k(k);

  // History steps, batched over samples.
  std::vector<Mat> hist;
  for (const auto& in : batch) hist.push_back(history_features(*in.sample));
  std::vector<Var> steps;
  for (int t = 0; t < spec_.obs_len; ++t) {
    Mat step(B, 6);
    for (Eigen::Index b = 0; b < B; ++b) step.row(b) = hist[static_cast<std::size_t>(b)].row(t);
    steps.push_back(nn::constant(std::move(step)));
  }
  out.history = encode_sequence(encoders_.history, steps);

  if (spec_.use_relation) {
    std::vector<const LatentGridSequence*> latents;
    std::vector<RegionPath> paths;
    for (const auto& in : batch) {
      if (!in.latents) throw ContractError("forward: relation branch needs latent grids");
      latents.push_back(in.latents);
      paths.push_back(in.path);
    }
    out.relation = relation_.relate_batch(latents, paths);
  }

  Var goals;
  if (spec_.use_goal) {
    out.prior = goal_.prior(out.history);
    const LatentDistribution* source = &*out.prior;
    if (training) {
      std::vector<Mat> fut;
      for (const auto& in : batch) fut.push_back(future_features(*in.sample));
      std::vector<Var> fsteps;
      for (int t = 0; t < spec_.pred_len; ++t) {
        Mat step(B, 2);
        for (Eigen::Index b = 0; b < B; ++b) step.row(b) = fut[static_cast<std::size_t>(b)].row(t);
        fsteps.push_back(nn::constant(std::move(step)));
      }
      Var h_y = encode_sequence(encoders_.future, fsteps);
      out.posterior = goal_.joint_posterior(out.history, h_y);
      source = &*out.posterior;
    }
    Var z = sample_latent(*source, out.k, rng);
    goals = goal_.decode_goals(z, out.history, out.k);
    out.goals = goals;
  } else if (training) {
    for (const auto& in : batch) future_features(*in.sample);  // validates Y presence
  }

  Var rel = out.relation && out.k > 1 ? nn::repeat_rows(out.relation, out.k) : out.relation;
  Var hist_rep = out.k > 1 ? nn::repeat_rows(out.history, out.k) : out.history;
  out.trajectories = decode_future(rel, goals, hist_rep);
  if (!spec_.use_goal) {
    // Deterministic model: report the decoded endpoint as its goal.
    out.goals = nn::slice_cols(out.trajectories, 2 * (spec_.pred_len - 1), 2);
  }
  return out;
}

std::vector<PredictionSet> TrajectoryModel::predict(std::span<const ModelInput> batch, int k, nn::Rng& rng) const {
  nn::NoGradGuard guard;
  const ForwardResult r = forward(batch, k, rng, false);
  std::vector<PredictionSet> out(batch.size());
  const double s = spec_.coord_scale;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Point last = batch[b].sample->last_observed();
    PredictionSet& p = out[b];
    p.goals.resize(r.k, 2);
    for (int j = 0; j < r.k; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * r.k + j;
      RowMat traj(spec_.pred_len, 2);
      for (int t = 0; t < spec_.pred_len; ++t) {
        traj(t, 0) = last.x() + s * r.trajectories->value(row, 2 * t);
        traj(t, 1) = last.y() + s * r.trajectories->value(row, 2 * t + 1);
      }
      p.trajectories.push_back(std::move(traj));
      p.goals(j, 0) = last.x() + s * r.goals->value(row, 0);
      p.goals(j, 1) = last.y() + s * r.goals->value(row, 1);
    }
    if (r.relation) p.relation = r.relation->value.row(static_cast<Eigen::Index>(b));
  }
  return out;
}

}  // namespace trajpred
