// SPDX-License-Identifier: Apache-2.0

#include "trajpred/pipeline.hpp"

#include "trajpred/errors.hpp"

namespace trajpred {

SceneContext make_scene_context(SceneRecording rec, const SceneGeometry& geometry, double sigma_map) {
  const auto table = rec.frame_table();
  std::vector<int> ids;
  ids.reserve(table.size());
  for (const auto& [f, pts] : table) ids.push_back(f);
  DensityMapSequence seq = render_sequence(table, ids, geometry, sigma_map);
  return make_scene_context(std::move(rec), geometry, std::move(ids), std::move(seq.maps));
}

SceneContext make_scene_context(SceneRecording rec, const SceneGeometry& geometry, std::vector<int> frame_ids,
                                RowMat maps) {
  if (maps.rows() != static_cast<Eigen::Index>(frame_ids.size())) {
    throw DataError("scene " + rec.scene_id + ": map count does not match frame count");
  }
  SceneContext ctx;
  ctx.recording = std::move(rec);
  ctx.geometry = geometry;
  ctx.frame_ids = std::move(frame_ids);
  for (std::size_t i = 0; i < ctx.frame_ids.size(); ++i) ctx.frame_row[ctx.frame_ids[i]] = static_cast<int>(i);
  ctx.maps = std::move(maps);
  return ctx;
}

void attach_latents(SceneContext& ctx, const Autoencoder& ae, bool release_maps) {
  const auto& s = ae.spec();
  if (ctx.geometry.height != s.map_height || ctx.geometry.width != s.map_width) {
    throw ContractError("scene " + ctx.recording.scene_id + ": map size does not match the autoencoder");
  }
  const Eigen::Index latent_size = static_cast<Eigen::Index>(s.latent_channels()) * s.grid_height() * s.grid_width();
  ctx.latents.resize(ctx.maps.rows(), latent_size);
  constexpr Eigen::Index kChunk = 32;
  for (Eigen::Index r = 0; r < ctx.maps.rows(); r += kChunk) {
    const Eigen::Index n = std::min(kChunk, ctx.maps.rows() - r);
    ctx.latents.middleRows(r, n) = encode_maps(RowMat(ctx.maps.middleRows(r, n)), ae).f_s;
  }
  ctx.latent_channels = s.latent_channels();
  ctx.grid_height = s.grid_height();
  ctx.grid_width = s.grid_width();
  if (release_maps) ctx.maps.resize(0, 0);
}

namespace {

int row_of(const SceneContext& ctx, int frame) {
  const auto it = ctx.frame_row.find(frame);
  if (it == ctx.frame_row.end()) {
    throw DataError("scene " + ctx.recording.scene_id + ": frame " + std::to_string(frame) + " has no map");
  }
  return it->second;
}

}  // namespace

LatentGridSequence window_latents(const SceneContext& ctx, const SequenceSample& s) {
  if (ctx.latents.rows() == 0) throw ContractError("window_latents: scene has no encoded latents");
  LatentGridSequence out;
  out.channels = ctx.latent_channels;
  out.height = ctx.grid_height;
  out.width = ctx.grid_width;
  const auto frames = s.observed_frames();
  out.f_s.resize(static_cast<Eigen::Index>(frames.size()), ctx.latents.cols());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    out.f_s.row(static_cast<Eigen::Index>(t)) = ctx.latents.row(row_of(ctx, frames[t]));
  }
  return out;
}

DensityMapSequence window_maps(const SceneContext& ctx, const SequenceSample& s) {
  if (ctx.maps.rows() == 0) throw ContractError("window_maps: scene maps were released");
  DensityMapSequence seq;
  seq.geometry = ctx.geometry;
  seq.frame_ids = s.observed_frames();
  seq.maps.resize(static_cast<Eigen::Index>(seq.frame_ids.size()), ctx.maps.cols());
  for (std::size_t t = 0; t < seq.frame_ids.size(); ++t) {
    seq.maps.row(static_cast<Eigen::Index>(t)) = ctx.maps.row(row_of(ctx, seq.frame_ids[t]));
  }
  return seq;
}

RegionPath sample_path(const SceneContext& ctx, const SequenceSample& s) {
  const int gh = ctx.grid_height > 0 ? ctx.grid_height : 1;
  const int gw = ctx.grid_width > 0 ? ctx.grid_width : 1;
  return agent_region_path(s.observed_positions(), ctx.geometry, gh, gw);
}

int SampleSet::add_scene(SceneContext ctx) { return add_scene(std::make_shared<const SceneContext>(std::move(ctx))); }

int SampleSet::add_scene(std::shared_ptr<const SceneContext> ctx) {
  scenes.push_back(std::move(ctx));
  return static_cast<int>(scenes.size()) - 1;
}

void SampleSet::add_samples(int scene, std::vector<SequenceSample> windows) {
  if (scene < 0 || scene >= static_cast<int>(scenes.size())) throw ContractError("add_samples: unknown scene");
  for (auto& w : windows) {
    scene_of.push_back(scene);
    samples.push_back(std::move(w));
  }
}

Batch make_batch(const SampleSet& set, std::span<const int> indices, bool with_latents) {
  Batch b;
  b.latents.reserve(indices.size());
  b.inputs.reserve(indices.size());
  for (int i : indices) {
    const auto idx = static_cast<std::size_t>(i);
    if (with_latents) b.latents.push_back(window_latents(*set.scenes[static_cast<std::size_t>(set.scene_of[idx])],
                                                         set.samples[idx]));
  }
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto idx = static_cast<std::size_t>(indices[j]);
    const SceneContext& ctx = *set.scenes[static_cast<std::size_t>(set.scene_of[idx])];
    b.inputs.push_back(ModelInput{&set.samples[idx], with_latents ? &b.latents[j] : nullptr,
                                  with_latents ? sample_path(ctx, set.samples[idx]) : RegionPath{}});
  }
  return b;
}

}  // namespace trajpred
