// SPDX-License-Identifier: Apache-2.0

#include "trajpred/metrics.hpp"

#include "trajpred/errors.hpp"

#include <cmath>
#include <limits>

namespace trajpred {

namespace {

void check_pair(const RowMat& pred, const RowMat& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != 2 || truth.cols() != 2 || pred.rows() == 0) {
    throw ContractError("displacement metric: shapes " + std::to_string(pred.rows()) + "x" +
                        std::to_string(pred.cols()) + " and " + std::to_string(truth.rows()) + "x" +
                        std::to_string(truth.cols()) + " are not matching [T, 2]");
  }
}

}  // namespace

double ade(const RowMat& pred, const RowMat& truth) {
  check_pair(pred, truth);
  return (pred - truth).rowwise().norm().mean();
}

double fde(const RowMat& pred, const RowMat& truth) {
  check_pair(pred, truth);
  return (pred.row(pred.rows() - 1) - truth.row(truth.rows() - 1)).norm();
}

SelectMode parse_select_mode(const std::string& s) {
  if (s == "min_ade") return SelectMode::kMinAde;
  if (s == "min_fde") return SelectMode::kMinFde;
  if (s == "min_fde_then_ade") return SelectMode::kMinFdeThenAde;
  throw ConfigError("unknown selection mode '" + s + "' (expected min_ade, min_fde or min_fde_then_ade)");
}

std::string to_string(SelectMode m) {
  switch (m) {
    case SelectMode::kMinAde: return "min_ade";
    case SelectMode::kMinFde: return "min_fde";
    case SelectMode::kMinFdeThenAde: return "min_fde_then_ade";
  }
  return "?";
}

Selection min_of_k(SelectMode mode, std::span<const RowMat> preds, const RowMat& truth) {
  if (preds.empty()) throw ContractError("min_of_k: no candidates");
  Selection best;
  double best_key = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double a = ade(preds[k], truth);
    const double f = fde(preds[k], truth);
    const double key = mode == SelectMode::kMinAde ? a : f;
    if (key < best_key) {
      best_key = key;
      best.k = static_cast<int>(k);
      best.ade = a;
      best.fde = f;
    }
  }
  best.value = mode == SelectMode::kMinFde ? best.fde : best.ade;
  return best;
}

BestOfK best_of_k(SelectMode mode, std::span<const RowMat> preds, const RowMat& truth) {
  BestOfK out;
  if (mode == SelectMode::kMinAde) {
    const Selection a = min_of_k(SelectMode::kMinAde, preds, truth);
    out.min_ade = a.ade;
    out.min_fde = min_of_k(SelectMode::kMinFde, preds, truth).fde;
    out.k = a.k;
  } else {
    const Selection f = min_of_k(SelectMode::kMinFde, preds, truth);
    out.min_ade = f.ade;
    out.min_fde = f.fde;
    out.k = f.k;
  }
  return out;
}

double kde_nll(std::span<const RowMat> samples, const RowMat& truth, const KdeOptions& opts) {
  if (samples.size() < 2) throw ContractError("kde_nll: need at least two samples");
  const Eigen::Index T = truth.rows();
  for (const auto& s : samples) {
    if (s.rows() != T || s.cols() != 2) throw ContractError("kde_nll: sample shape mismatch");
  }
  const double n = static_cast<double>(samples.size());
  const double scott = std::pow(n, -1.0 / 6.0);
  const double log_two_pi = std::log(2.0 * M_PI);
  std::vector<double> expo(samples.size());
  double total = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    double bw[2];
    for (int d = 0; d < 2; ++d) {
      if (opts.fixed_bandwidth) {
        bw[d] = *opts.fixed_bandwidth;
        continue;
      }
      double mean = 0.0;
      for (const auto& s : samples) mean += s(t, d);
      mean /= n;
      double var = 0.0;
      for (const auto& s : samples) var += (s(t, d) - mean) * (s(t, d) - mean);
      var /= (n - 1.0);
      bw[d] = std::max(scott * std::sqrt(var), opts.bandwidth_floor);
    }
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double u = (truth(t, 0) - samples[i](t, 0)) / bw[0];
      const double v = (truth(t, 1) - samples[i](t, 1)) / bw[1];
      expo[i] = -0.5 * (u * u + v * v);
      max_e = std::max(max_e, expo[i]);
    }
    double acc = 0.0;
    for (double e : expo) acc += std::exp(e - max_e);
    double log_p = max_e + std::log(acc) - std::log(n) - log_two_pi - std::log(bw[0]) - std::log(bw[1]);
    log_p = std::max(log_p, opts.log_density_floor);
    total += -log_p;
  }
  return total / static_cast<double>(T);
}

SequenceSample perturb_observations(const SequenceSample& s, double sigma, double dt, std::mt19937_64& rng) {
  if (sigma < 0.0) throw ContractError("perturb_observations: sigma must be >= 0");
  SequenceSample out = s;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  RowMat pos = s.observed_positions();
  for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] += noise(rng);
  out.X = observation_features(pos, dt);
  return out;
}

SceneRecording perturb_recording(const SceneRecording& rec, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw ContractError("perturb_recording: sigma must be >= 0");
  SceneRecording out = rec;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& t : out.tracks) {
    for (auto& p : t.positions) {
      p.x() += noise(rng);
      p.y() += noise(rng);
    }
  }
  return out;
}

}  // namespace trajpred
