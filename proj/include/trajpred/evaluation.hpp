// SPDX-License-Identifier: Apache-2.0
//
// Prediction dumps (JSON lines), per-scene and aggregate metric reports and
// the observation-noise robustness study.

#pragma once

#include "trajpred/metrics.hpp"
#include "trajpred/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trajpred {

struct EvalConfig {
  int k = 20;
  SelectMode select = SelectMode::kMinFdeThenAde;
  int kde_samples = 2000;  // 0 disables the KDE-NLL pass
  KdeOptions kde;
  double perturb_sigma = 0.1;
  double sigma_map = kDefaultSigmaMap;
  std::uint64_t seed = 0;
  int max_rows = 4096;  // cap on samples x draws per forward pass

  nlohmann::json to_json() const;
};

/// One line of a prediction dump.
struct PredictionRecord {
  std::string scene_id;
  int agent_id = 0;
  int t0 = 0;
  std::vector<RowMat> predictions;  // K x [T, 2]
  RowMat ground_truth;              // [T, 2]
  std::vector<RowMat> kde_samples;  // optional extra draws for KDE-NLL
  std::optional<double> kde_nll;    // precomputed by the producer
};

nlohmann::json record_to_json(const PredictionRecord& r);
/// Throws FormatError on missing fields or inconsistent shapes.
PredictionRecord record_from_json(const nlohmann::json& j);

void write_prediction_dump(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);
/// Blank lines are skipped; a malformed line throws ParseError with its number.
std::vector<PredictionRecord> read_prediction_dump(const std::filesystem::path& path);

struct SceneMetrics {
  double ade = 0.0;      // mean over records of the mean over candidates
  double fde = 0.0;
  double min_ade = 0.0;  // best-of-K under the configured selection mode
  double min_fde = 0.0;
  std::optional<double> kde_nll;
  std::size_t count = 0;
};

struct RobustnessResult {
  double sigma = 0.0;
  double ade_increase = 0.0;  // perturbed minus clean, aggregate min_ade
  double fde_increase = 0.0;
  SceneMetrics clean;
  SceneMetrics perturbed;
};

struct MetricsReport {
  std::map<std::string, SceneMetrics> per_scene;
  SceneMetrics aggregate;  // unweighted mean over scenes
  std::optional<RobustnessResult> robustness;
  std::string config_fingerprint;
  nlohmann::json settings;

  nlohmann::json to_json() const;
  /// Fixed-width table for standard output.
  std::string table() const;
};

/// Throws DataError on an empty dump or inconsistent K across records.
MetricsReport evaluate_dump(const std::vector<PredictionRecord>& records, const EvalConfig& cfg);

/// Samples max(k, kde_samples) futures per window from the prior; the first k
/// form the candidate set and all of them feed the KDE.
std::vector<PredictionRecord> predict_dataset(const TrajectoryModel& model, const SampleSet& set,
                                              const EvalConfig& cfg);

MetricsReport evaluate_model(const TrajectoryModel& model, const SampleSet& set, const EvalConfig& cfg);

/// Adds N(0, sigma^2) to every annotated position of each scene, re-renders
/// maps on the clean geometry, re-encodes them and rebuilds the observation
/// windows. Futures are taken from the clean windows, matched by (agent, t0).
SampleSet perturb_sample_set(const SampleSet& clean, const TrajectoryModel& model, double sigma, double sigma_map,
                             std::uint64_t seed);

/// Clean and perturbed passes with the same sampling seed.
MetricsReport robustness_study(const TrajectoryModel& model, const SampleSet& clean, const EvalConfig& cfg);

}  // namespace trajpred
