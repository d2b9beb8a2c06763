// SPDX-License-Identifier: Apache-2.0
//
// Preprocessed cache: per scene the parsed recording, observation windows,
// rendered density maps and rotation-augmented maps for autoencoder
// training, plus a manifest with parameters and CRC-32 checksums.
//
//   <cache>/manifest.json
//   <cache>/<scene>/recording.txt   frame agent x y
//   <cache>/<scene>/windows.bin
//   <cache>/<scene>/maps.bin        float32, one row per annotated frame
//   <cache>/<scene>/ae_maps.bin     float32, rotated copies (0 deg included)

#pragma once

#include "trajpred/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace trajpred {

/// Raw scenes named by the config (ETH-UCY files, SDD annotations or the
/// synthetic generator). `only` restricts to the given ids when non-empty.
std::vector<SceneRecording> load_raw_scenes(const RunConfig& cfg, const std::vector<std::string>& only = {});

/// Writes every scene and returns the manifest. Scenes already present with
/// identical parameters are kept; the manifest is rewritten deterministically.
nlohmann::json prepare_cache(const std::vector<SceneRecording>& scenes, const RunConfig& cfg,
                             const std::filesystem::path& cache_dir);

/// Recomputes every checksum; throws DataError naming the first bad file.
void verify_cache(const std::filesystem::path& cache_dir);

nlohmann::json read_manifest(const std::filesystem::path& cache_dir);

struct CachedScene {
  SceneRecording recording;
  SceneGeometry geometry;
  std::vector<SequenceSample> windows;
  std::vector<int> frame_ids;
  RowMat maps;     // empty unless requested
  RowMat ae_maps;  // empty unless requested
};

CachedScene load_cached_scene(const std::filesystem::path& cache_dir, const std::string& scene_id, bool with_maps,
                              bool with_ae_maps);

/// Float32 map matrix with frame ids.
void write_map_file(const std::filesystem::path& path, const RowMat& maps, const std::vector<int>& frame_ids);
RowMat read_map_file(const std::filesystem::path& path, std::vector<int>* frame_ids = nullptr);

void write_window_file(const std::filesystem::path& path, const std::vector<SequenceSample>& windows);
std::vector<SequenceSample> read_window_file(const std::filesystem::path& path, const std::string& scene_id);

std::string file_crc32(const std::filesystem::path& path);

}  // namespace trajpred
