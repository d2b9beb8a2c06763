// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container.
//
//   "TRJPCKPT" | u32 version | u64 header bytes | JSON header
//   | f64 payload (tensors in header order, row-major) | u32 CRC-32
//
// The header carries the kind, the architecture descriptor, the resolved run
// config, the epoch, the RNG state and a tensor table (name, rows, cols).

#pragma once

#include "trajpred/model.hpp"
#include "trajpred/nn/adam.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace trajpred {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;            // "autoencoder" or "model"
  nlohmann::json descriptor;   // ModelSpec::to_json()
  nlohmann::json config;       // resolved run config
  nlohmann::json extra;        // loss history and similar bookkeeping
  int epoch = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, nn::Mat>> tensors;

  const nn::Mat* find(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws FormatError on bad magic, version mismatch, truncation or CRC failure.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Appends every parameter of `params` (names as registered).
void store_parameters(const nn::ParameterSet& params, Checkpoint& ckpt);
/// Copies values into `params` in place. A missing tensor or a shape mismatch
/// throws FormatError naming the tensor.
void load_parameters(nn::ParameterSet& params, const Checkpoint& ckpt);

/// Adam moments and step count under "<prefix>.m.<i>" / "<prefix>.v.<i>".
void store_optimizer(nn::Adam& opt, const std::string& prefix, Checkpoint& ckpt);
void load_optimizer(nn::Adam& opt, const std::string& prefix, const Checkpoint& ckpt);

std::string rng_to_string(const nn::Rng& rng);
nn::Rng rng_from_string(const std::string& s);

/// Full model (autoencoder included) from a "model" checkpoint.
std::unique_ptr<TrajectoryModel> load_model(const Checkpoint& ckpt);
Checkpoint model_checkpoint(const TrajectoryModel& model, const nlohmann::json& config, int epoch);

/// Loads an "autoencoder" checkpoint into the model's autoencoder after
/// checking that the autoencoder descriptors agree.
void load_autoencoder(TrajectoryModel& model, const Checkpoint& ckpt);

}  // namespace trajpred
