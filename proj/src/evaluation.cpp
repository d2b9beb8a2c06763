// SPDX-License-Identifier: Apache-2.0

#include "trajpred/evaluation.hpp"

#include "trajpred/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace trajpred {

namespace {

nlohmann::json matrix_json(const RowMat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back({m(r, 0), m(r, 1)});
  return rows;
}

RowMat matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw FormatError("field '" + field + "' must be a non-empty [T, 2] array");
  RowMat m(static_cast<Eigen::Index>(j.size()), 2);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      throw FormatError("field '" + field + "' row " + std::to_string(r) + " is not a 2-vector");
    }
    m(static_cast<Eigen::Index>(r), 0) = row[0].get<double>();
    m(static_cast<Eigen::Index>(r), 1) = row[1].get<double>();
  }
  return m;
}

std::vector<RowMat> stack_from_json(const nlohmann::json& j, const std::string& field, Eigen::Index T) {
  std::vector<RowMat> out;
  if (!j.is_array()) throw FormatError("field '" + field + "' must be an array");
  for (const auto& item : j) {
    out.push_back(matrix_from_json(item, field));
    if (out.back().rows() != T) throw FormatError("field '" + field + "' has a candidate with the wrong length");
  }
  return out;
}

void add_into(SceneMetrics& acc, const SceneMetrics& m) {
  acc.ade += m.ade;
  acc.fde += m.fde;
  acc.min_ade += m.min_ade;
  acc.min_fde += m.min_fde;
  if (m.kde_nll) acc.kde_nll = acc.kde_nll.value_or(0.0) + *m.kde_nll;
}

void divide(SceneMetrics& acc, double n) {
  acc.ade /= n;
  acc.fde /= n;
  acc.min_ade /= n;
  acc.min_fde /= n;
  if (acc.kde_nll) *acc.kde_nll /= n;
}

nlohmann::json metrics_json(const SceneMetrics& m) {
  nlohmann::json j = {{"ade", m.ade}, {"fde", m.fde}, {"min_ade", m.min_ade}, {"min_fde", m.min_fde},
                      {"count", m.count}};
  j["kde_nll"] = m.kde_nll ? nlohmann::json(*m.kde_nll) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

nlohmann::json EvalConfig::to_json() const {
  return {{"k", k},
          {"select", to_string(select)},
          {"kde_samples", kde_samples},
          {"kde_bandwidth_floor", kde.bandwidth_floor},
          {"kde_log_density_floor", kde.log_density_floor},
          {"perturb_sigma", perturb_sigma},
          {"sigma_map", sigma_map},
          {"seed", seed}};
}

nlohmann::json record_to_json(const PredictionRecord& r) {
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : r.predictions) preds.push_back(matrix_json(p));
  nlohmann::json j = {{"scene_id", r.scene_id},
                      {"agent_id", r.agent_id},
                      {"t0", r.t0},
                      {"predictions", preds},
                      {"ground_truth", matrix_json(r.ground_truth)}};
  if (!r.kde_samples.empty()) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& p : r.kde_samples) s.push_back(matrix_json(p));
    j["kde_samples"] = s;
  }
  if (r.kde_nll) j["kde_nll"] = *r.kde_nll;
  return j;
}

PredictionRecord record_from_json(const nlohmann::json& j) {
  PredictionRecord r;
  try {
    r.scene_id = j.at("scene_id").get<std::string>();
    r.agent_id = j.at("agent_id").get<int>();
    r.t0 = j.at("t0").get<int>();
    r.ground_truth = matrix_from_json(j.at("ground_truth"), "ground_truth");
    r.predictions = stack_from_json(j.at("predictions"), "predictions", r.ground_truth.rows());
    if (j.contains("kde_samples")) {
      r.kde_samples = stack_from_json(j.at("kde_samples"), "kde_samples", r.ground_truth.rows());
    }
    if (j.contains("kde_nll") && !j.at("kde_nll").is_null()) r.kde_nll = j.at("kde_nll").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("prediction record: ") + e.what());
  }
  if (r.predictions.empty()) throw FormatError("prediction record has no candidates");
  return r;
}

void write_prediction_dump(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write prediction dump " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<PredictionRecord> read_prediction_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("prediction dump not found: " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), n, e.what());
    } catch (const FormatError& e) {
      throw ParseError(path.string(), n, e.what());
    }
  }
  return out;
}

MetricsReport evaluate_dump(const std::vector<PredictionRecord>& records, const EvalConfig& cfg) {
  if (records.empty()) throw DataError("evaluation: the prediction dump is empty");
  const std::size_t k = records.front().predictions.size();
  std::map<std::string, SceneMetrics> sums;
  std::map<std::string, std::size_t> kde_counts;
  for (const auto& r : records) {
    if (r.predictions.size() != k) {
      throw DataError("evaluation: inconsistent K across records (" + std::to_string(k) + " vs " +
                      std::to_string(r.predictions.size()) + ")");
    }
    SceneMetrics& s = sums[r.scene_id];
    double a = 0.0;
    double f = 0.0;
    for (const auto& p : r.predictions) {
      a += ade(p, r.ground_truth);
      f += fde(p, r.ground_truth);
    }
    s.ade += a / static_cast<double>(k);
    s.fde += f / static_cast<double>(k);
    const BestOfK best = best_of_k(cfg.select, r.predictions, r.ground_truth);
    s.min_ade += best.min_ade;
    s.min_fde += best.min_fde;
    std::optional<double> nll = r.kde_nll;
    if (!nll && r.kde_samples.size() >= 2) nll = kde_nll(r.kde_samples, r.ground_truth, cfg.kde);
    if (!nll && cfg.kde_samples > 0 && r.predictions.size() >= 2) nll = kde_nll(r.predictions, r.ground_truth, cfg.kde);
    if (nll) {
      s.kde_nll = s.kde_nll.value_or(0.0) + *nll;
      ++kde_counts[r.scene_id];
    }
    ++s.count;
  }

  MetricsReport report;
  report.settings = cfg.to_json();
  SceneMetrics agg;
  bool all_kde = true;
  for (auto& [scene, s] : sums) {
    const double n = static_cast<double>(s.count);
    s.ade /= n;
    s.fde /= n;
    s.min_ade /= n;
    s.min_fde /= n;
    if (s.kde_nll) *s.kde_nll /= static_cast<double>(kde_counts[scene]);
    all_kde = all_kde && s.kde_nll.has_value();
    add_into(agg, s);
    agg.count += s.count;
    report.per_scene.emplace(scene, s);
  }
  divide(agg, static_cast<double>(sums.size()));
  if (!all_kde) agg.kde_nll.reset();
  report.aggregate = agg;
  return report;
}

std::vector<PredictionRecord> predict_dataset(const TrajectoryModel& model, const SampleSet& set,
                                              const EvalConfig& cfg) {
  const int k = model.effective_k(cfg.k);
  const int draws = model.spec().use_goal ? std::max(k, cfg.kde_samples) : 1;
  const int per_batch = std::max(1, cfg.max_rows / draws);
  nn::Rng rng(cfg.seed);
  std::vector<PredictionRecord> out;
  out.reserve(set.size());
  std::vector<int> idx;
  for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(per_batch)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(per_batch)); ++i) {
      idx.push_back(static_cast<int>(i));
    }
    const Batch b = make_batch(set, idx, model.spec().use_relation);
    auto preds = model.predict(b.inputs, draws, rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const SequenceSample& s = set.samples[static_cast<std::size_t>(idx[j])];
      PredictionRecord r;
      r.scene_id = s.scene_id;
      r.agent_id = s.agent_id;
      r.t0 = s.t0;
      r.ground_truth = s.Y;
      auto& traj = preds[j].trajectories;
      if (cfg.kde_samples >= 2 && static_cast<int>(traj.size()) >= 2) r.kde_nll = kde_nll(traj, s.Y, cfg.kde);
      traj.resize(static_cast<std::size_t>(k));
      r.predictions = std::move(traj);
      out.push_back(std::move(r));
    }
  }
  return out;
}

MetricsReport evaluate_model(const TrajectoryModel& model, const SampleSet& set, const EvalConfig& cfg) {
  return evaluate_dump(predict_dataset(model, set, cfg), cfg);
}

SampleSet perturb_sample_set(const SampleSet& clean, const TrajectoryModel& model, double sigma, double sigma_map,
                             std::uint64_t seed) {
  nn::Rng rng(seed);
  SampleSet out;
  const ModelSpec& spec = model.spec();
  for (std::size_t si = 0; si < clean.scenes.size(); ++si) {
    const SceneContext& ctx = *clean.scenes[si];
    SceneRecording noisy = perturb_recording(ctx.recording, sigma, rng);
    SceneContext pctx = make_scene_context(noisy, ctx.geometry, sigma_map);
    if (spec.use_relation) attach_latents(pctx, model.autoencoder(), true);
    const int scene = out.add_scene(std::move(pctx));

    std::map<std::pair<int, int>, SequenceSample> rebuilt;
    for (auto& w : build_windows(out.scenes.back()->recording, {spec.obs_len, spec.pred_len, 1})) {
      const std::pair<int, int> key{w.agent_id, w.t0};
      rebuilt.emplace(key, std::move(w));
    }
    std::vector<SequenceSample> windows;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      if (clean.scene_of[i] != static_cast<int>(si)) continue;
      const SequenceSample& c = clean.samples[i];
      const auto it = rebuilt.find({c.agent_id, c.t0});
      if (it == rebuilt.end()) {
        throw ContractError("perturbed scene lost window (" + std::to_string(c.agent_id) + ", " +
                            std::to_string(c.t0) + ")");
      }
      SequenceSample w = it->second;
      w.Y = c.Y;
      windows.push_back(std::move(w));
    }
    out.add_samples(scene, std::move(windows));
  }
  return out;
}

MetricsReport robustness_study(const TrajectoryModel& model, const SampleSet& clean, const EvalConfig& cfg) {
  EvalConfig pass = cfg;
  pass.kde_samples = 0;
  MetricsReport report = evaluate_model(model, clean, pass);
  const SampleSet noisy = perturb_sample_set(clean, model, cfg.perturb_sigma, cfg.sigma_map, cfg.seed + 104729);
  const MetricsReport perturbed = evaluate_model(model, noisy, pass);
  RobustnessResult r;
  r.sigma = cfg.perturb_sigma;
  r.clean = report.aggregate;
  r.perturbed = perturbed.aggregate;
  r.ade_increase = perturbed.aggregate.min_ade - report.aggregate.min_ade;
  r.fde_increase = perturbed.aggregate.min_fde - report.aggregate.min_fde;
  report.robustness = r;
  report.settings = cfg.to_json();
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json scenes = nlohmann::json::object();
  for (const auto& [id, m] : per_scene) scenes[id] = metrics_json(m);
  nlohmann::json j = {{"per_scene", scenes},
                      {"aggregate", metrics_json(aggregate)},
                      {"config_fingerprint", config_fingerprint},
                      {"settings", settings}};
  if (robustness) {
    j["robustness"] = {{"sigma", robustness->sigma},
                       {"ade_increase", robustness->ade_increase},
                       {"fde_increase", robustness->fde_increase},
                       {"clean", metrics_json(robustness->clean)},
                       {"perturbed", metrics_json(robustness->perturbed)}};
  } else {
    j["robustness"] = nullptr;
  }
  return j;
}

std::string MetricsReport::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %7s %7s %8s %8s %9s %7s\n", "scene", "ADE", "FDE", "minADE", "minFDE",
                "KDE-NLL", "n");
  os << line;
  auto row = [&](const std::string& name, const SceneMetrics& m) {
    char nll[32] = "-";
    if (m.kde_nll) std::snprintf(nll, sizeof(nll), "%.3f", *m.kde_nll);
    std::snprintf(line, sizeof(line), "%-16s %7.3f %7.3f %8.3f %8.3f %9s %7zu\n", name.c_str(), m.ade, m.fde,
                  m.min_ade, m.min_fde, nll, m.count);
    os << line;
  };
  for (const auto& [id, m] : per_scene) row(id, m);
  row("average", aggregate);
  if (robustness) {
    std::snprintf(line, sizeof(line), "noise sigma %.3f: minADE +%.3f, minFDE +%.3f\n", robustness->sigma,
                  robustness->ade_increase, robustness->fde_increase);
    os << line;
  }
  return os.str();
}

}  // namespace trajpred
