// SPDX-License-Identifier: Apache-2.0
//
// Displacement and likelihood metrics plus observation perturbation.

#pragma once

#include "trajpred/dataset.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>

namespace trajpred {

/// Mean over steps of the L2 distance.
double ade(const RowMat& pred, const RowMat& truth);
/// L2 distance at the final step.
double fde(const RowMat& pred, const RowMat& truth);

enum class SelectMode {
  kMinAde,         // candidate with the smallest ADE
  kMinFde,         // candidate with the smallest FDE
  kMinFdeThenAde,  // candidate with the smallest FDE, reporting its ADE
};

SelectMode parse_select_mode(const std::string& s);
std::string to_string(SelectMode m);

struct Selection {
  double value = 0.0;  // the metric the mode reports
  int k = 0;
  double ade = 0.0;  // of the selected candidate
  double fde = 0.0;
};

/// Ties resolve to the smallest index.
Selection min_of_k(SelectMode mode, std::span<const RowMat> preds, const RowMat& truth);

/// Reported best-of-K pair. kMinAde reports the independent minima of ADE
/// and FDE; the FDE-driven modes report both errors of the min-FDE candidate.
struct BestOfK {
  double min_ade = 0.0;
  double min_fde = 0.0;
  int k = 0;
};
BestOfK best_of_k(SelectMode mode, std::span<const RowMat> preds, const RowMat& truth);

struct KdeOptions {
  double bandwidth_floor = 1e-6;
  double log_density_floor = -20.0;
  /// Overrides Scott's rule (same bandwidth in both dimensions).
  std::optional<double> fixed_bandwidth;
};

/// Mean over steps of -log p(truth_t) under a per-step 2-D product-Gaussian
/// KDE fit to the sample positions (Scott's rule bandwidth). The log density
/// is floored at log_density_floor. Needs at least two samples.
double kde_nll(std::span<const RowMat> samples, const RowMat& truth, const KdeOptions& opts = {});

/// Adds i.i.d. N(0, sigma^2) to observed positions and re-derives velocity and
/// acceleration; the future is left untouched.
SequenceSample perturb_observations(const SequenceSample& s, double sigma, double dt, std::mt19937_64& rng);

/// Adds i.i.d. N(0, sigma^2) to every annotated position of a recording.
SceneRecording perturb_recording(const SceneRecording& rec, double sigma, std::mt19937_64& rng);

}  // namespace trajpred
