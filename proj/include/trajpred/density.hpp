// SPDX-License-Identifier: Apache-2.0
//
// Frame-wise trajectory density maps: every annotated agent contributes a
// unit-mass isotropic Gaussian on an H x W grid covering the scene.

#pragma once

#include "trajpred/dataset.hpp"

#include <map>
#include <span>
#include <vector>

namespace trajpred {

struct SceneGeometry {
  Point world_min{0.0, 0.0};
  Point world_max{1.0, 1.0};
  int height = 80;
  int width = 80;
  double margin = 1.0;

  /// Throws ConfigError on zero/negative extent or a grid smaller than 8x8.
  void validate() const;
  static SceneGeometry from_recording(const SceneRecording& rec, int height = 80, int width = 80);
};

struct MapCoord {
  double row = 0.0;
  double col = 0.0;
  bool in_bounds = false;
};

MapCoord world_to_map(const Point& p, const SceneGeometry& g);

/// [H, W] row-major density of one frame. Kernels are truncated at 4 sigma;
/// agents outside the geometry are skipped.
RowMat render_density_frame(std::span<const Point> positions, const SceneGeometry& g, double sigma_map);

struct DensityMapSequence {
  RowMat maps;  // [tau, H*W]; one frame per row (channel dimension is 1)
  SceneGeometry geometry;
  std::vector<int> frame_ids;

  int frames() const { return static_cast<int>(maps.rows()); }
};

DensityMapSequence render_sequence(const SceneRecording& rec, const std::vector<int>& frame_ids,
                                   const SceneGeometry& g, double sigma_map);
DensityMapSequence render_sequence(const std::map<int, std::vector<Point>>& frame_table,
                                   const std::vector<int>& frame_ids, const SceneGeometry& g, double sigma_map);

/// Default kernel bandwidth in map cells.
inline constexpr double kDefaultSigmaMap = 2.0;

}  // namespace trajpred
