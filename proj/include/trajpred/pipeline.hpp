// SPDX-License-Identifier: Apache-2.0
//
// Glue between recordings and the network: per-scene rendered maps and
// frozen encoder latents, sample sets, and batch assembly.

#pragma once

#include "trajpred/density.hpp"
#include "trajpred/model.hpp"

#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace trajpred {

struct SceneContext {
  SceneRecording recording;
  SceneGeometry geometry;
  std::vector<int> frame_ids;  // every annotated frame, ascending
  std::unordered_map<int, int> frame_row;
  RowMat maps;     // [frames, H*W]; may be released after encoding
  RowMat latents;  // [frames, c_f*h*w]
  int latent_channels = 0;
  int grid_height = 0;
  int grid_width = 0;
};

/// Renders every annotated frame of the recording.
SceneContext make_scene_context(SceneRecording rec, const SceneGeometry& geometry, double sigma_map);
/// Wraps maps loaded from a preprocessed cache.
SceneContext make_scene_context(SceneRecording rec, const SceneGeometry& geometry, std::vector<int> frame_ids,
                                RowMat maps);

/// Encodes all frames with the (frozen) autoencoder.
void attach_latents(SceneContext& ctx, const Autoencoder& ae, bool release_maps = false);

LatentGridSequence window_latents(const SceneContext& ctx, const SequenceSample& s);
DensityMapSequence window_maps(const SceneContext& ctx, const SequenceSample& s);
RegionPath sample_path(const SceneContext& ctx, const SequenceSample& s);

/// Samples from one or more scenes, each tagged with its scene index. Scene
/// contexts are shared so train and validation subsets do not copy latents.
struct SampleSet {
  std::vector<std::shared_ptr<const SceneContext>> scenes;
  std::vector<SequenceSample> samples;
  std::vector<int> scene_of;

  std::size_t size() const { return samples.size(); }
  int add_scene(SceneContext ctx);
  int add_scene(std::shared_ptr<const SceneContext> ctx);
  void add_samples(int scene, std::vector<SequenceSample> windows);
};

/// Owns the latent copies that the ModelInput pointers refer to.
struct Batch {
  std::vector<LatentGridSequence> latents;
  std::vector<ModelInput> inputs;
};

Batch make_batch(const SampleSet& set, std::span<const int> indices, bool with_latents);

}  // namespace trajpred
