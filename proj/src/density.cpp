// SPDX-License-Identifier: Apache-2.0

#include "trajpred/density.hpp"

#include "trajpred/errors.hpp"

#include <algorithm>
#include <cmath>

namespace trajpred {

void SceneGeometry::validate() const {
  if (!(world_max.x() > world_min.x()) || !(world_max.y() > world_min.y())) {
    throw ConfigError("scene geometry has zero or negative extent");
  }
  if (height < 8 || width < 8) throw ConfigError("map size must be at least 8x8");
}

SceneGeometry SceneGeometry::from_recording(const SceneRecording& rec, int height, int width) {
  SceneGeometry g;
  g.world_min = rec.bounds.min;
  g.world_max = rec.bounds.max;
  g.height = height;
  g.width = width;
  g.margin = rec.margin;
  g.validate();
  return g;
}

MapCoord world_to_map(const Point& p, const SceneGeometry& g) {
  g.validate();
  MapCoord m;
  m.col = (p.x() - g.world_min.x()) / (g.world_max.x() - g.world_min.x()) * (g.width - 1);
  m.row = (p.y() - g.world_min.y()) / (g.world_max.y() - g.world_min.y()) * (g.height - 1);
  m.in_bounds = m.row >= 0.0 && m.row <= g.height - 1 && m.col >= 0.0 && m.col <= g.width - 1;
  return m;
}

RowMat render_density_frame(std::span<const Point> positions, const SceneGeometry& g, double sigma_map) {
  if (!(sigma_map > 0.0)) throw ConfigError("sigma_map must be positive");
  g.validate();
  RowMat frame = RowMat::Zero(g.height, g.width);
  const double radius = 4.0 * sigma_map;
  const double inv_two_var = 1.0 / (2.0 * sigma_map * sigma_map);
  const double norm = 1.0 / (2.0 * M_PI * sigma_map * sigma_map);
  for (const Point& p : positions) {
    const MapCoord m = world_to_map(p, g);
    if (!m.in_bounds) continue;
    const int r0 = std::max(0, static_cast<int>(std::ceil(m.row - radius)));
    const int r1 = std::min(g.height - 1, static_cast<int>(std::floor(m.row + radius)));
    const int c0 = std::max(0, static_cast<int>(std::ceil(m.col - radius)));
    const int c1 = std::min(g.width - 1, static_cast<int>(std::floor(m.col + radius)));
    for (int r = r0; r <= r1; ++r) {
      const double dr = r - m.row;
      for (int c = c0; c <= c1; ++c) {
        const double dc = c - m.col;
        const double d2 = dr * dr + dc * dc;
        if (d2 > radius * radius) continue;
        frame(r, c) += norm * std::exp(-d2 * inv_two_var);
      }
    }
  }
  return frame;
}

DensityMapSequence render_sequence(const std::map<int, std::vector<Point>>& frame_table,
                                   const std::vector<int>& frame_ids, const SceneGeometry& g, double sigma_map) {
  DensityMapSequence seq;
  seq.geometry = g;
  seq.frame_ids = frame_ids;
  seq.maps.resize(static_cast<Eigen::Index>(frame_ids.size()), static_cast<Eigen::Index>(g.height) * g.width);
  static const std::vector<Point> kEmpty;
  for (std::size_t i = 0; i < frame_ids.size(); ++i) {
    const auto it = frame_table.find(frame_ids[i]);
    const auto& pts = it == frame_table.end() ? kEmpty : it->second;
    const RowMat f = render_density_frame(pts, g, sigma_map);
    seq.maps.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), f.size());
  }
  return seq;
}

DensityMapSequence render_sequence(const SceneRecording& rec, const std::vector<int>& frame_ids,
                                   const SceneGeometry& g, double sigma_map) {
  return render_sequence(rec.frame_table(), frame_ids, g, sigma_map);
}

}  // namespace trajpred
