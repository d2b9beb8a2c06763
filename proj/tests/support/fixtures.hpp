// SPDX-License-Identifier: Apache-2.0
//
// Small synthetic scenes and sample sets shared by unit and acceptance tests.

#pragma once

#include "trajpred/pipeline.hpp"
#include "trajpred/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace trajpred::testing {

inline SceneRecording small_recording(std::uint64_t seed, int steps = 80, const std::string& id = "toy") {
  SyntheticSceneOptions o;
  o.scene_id = id;
  o.seed = seed;
  o.steps = steps;
  return generate_synthetic_scene(o);
}

/// Windows of `rec` sized for `model`, with latents from its autoencoder
/// when the relation branch is on. At most `max_windows` are kept (0: all).
inline SampleSet sample_set_for(const TrajectoryModel& model, const SceneRecording& rec, std::size_t max_windows = 0,
                                double sigma_map = kDefaultSigmaMap) {
  const ModelSpec& spec = model.spec();
  const auto g = SceneGeometry::from_recording(rec, spec.autoencoder.map_height, spec.autoencoder.map_width);
  SceneContext ctx = make_scene_context(rec, g, sigma_map);
  if (spec.use_relation) attach_latents(ctx, model.autoencoder());
  auto windows = build_windows(rec, WindowOptions{spec.obs_len, spec.pred_len, 1});
  if (max_windows && windows.size() > max_windows) {
    // Evenly spaced subset keeps a spread of times and agents.
    std::vector<SequenceSample> kept;
    for (std::size_t i = 0; i < max_windows; ++i) kept.push_back(windows[i * windows.size() / max_windows]);
    windows = std::move(kept);
  }
  SampleSet set;
  const int scene = set.add_scene(std::move(ctx));
  set.add_samples(scene, std::move(windows));
  return set;
}

inline std::vector<int> all_indices(const SampleSet& set) {
  std::vector<int> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

/// Config for a complete command-line pipeline that runs in seconds: two
/// short synthetic scenes, 16x16 maps and narrow networks.
inline nlohmann::json tiny_cli_config(const std::filesystem::path& root) {
  return {{"dataset", "synthetic"},
          {"scenes", nlohmann::json::array({"s1", "s2"})},
          {"test_scene", "s2"},
          {"synthetic_steps", 60},
          {"cache_dir", (root / "cache").string()},
          {"runs_dir", (root / "runs").string()},
          {"map_size", 16},
          {"ae_channels", {4, 4}},
          {"ae_rotation_step", 90},
          {"ae_max_frames", 10},
          {"ae_epochs", 2},
          {"temporal_hidden", 6},
          {"relation_hidden", 5},
          {"encoder_hidden", 6},
          {"latent_dim", 3},
          {"mlp_hidden", 7},
          {"decoder_hidden", 6},
          {"epochs", 2},
          {"batch_size", 16},
          {"k", 3},
          {"eval_k", 3},
          {"kde_samples", 6},
          {"seed", 4}};
}

inline std::filesystem::path write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
  return path;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace trajpred::testing
