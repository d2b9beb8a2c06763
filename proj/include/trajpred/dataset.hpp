// SPDX-License-Identifier: Apache-2.0
//
// Trajectory datasets: ETH-UCY and SDD parsing, kinematic features,
// observation/prediction windowing, scene splits and rotation augmentation.

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace trajpred {

using Point = Eigen::Vector2d;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Bounds {
  Point min{0.0, 0.0};
  Point max{0.0, 0.0};
};

struct AgentTrack {
  int agent_id = 0;
  std::vector<int> frames;  // strictly increasing raw frame ids
  std::vector<Point> positions;
};

struct SceneRecording {
  std::string scene_id;
  double frame_rate = 2.5;  // annotations per second
  int frame_step = 10;      // raw frame-id increment between annotations
  double margin = 1.0;      // world units added around the annotation envelope
  Bounds bounds;
  std::vector<AgentTrack> tracks;

  double dt() const { return 1.0 / frame_rate; }
  /// Every annotated frame id mapped to all positions annotated at it.
  std::map<int, std::vector<Point>> frame_table() const;
  std::size_t annotation_count() const;
};

struct Neighbor {
  int agent_id = 0;
  std::vector<Point> positions;  // one per observed frame
};

struct SequenceSample {
  std::string scene_id;
  int agent_id = 0;
  int t0 = 0;                   // first observed raw frame id
  int frame_step = 10;
  RowMat X;                     // [obs_len, 6]: x, y, vx, vy, ax, ay
  RowMat Y;                     // [pred_len, 2]
  std::vector<Neighbor> neighbors;

  int obs_len() const { return static_cast<int>(X.rows()); }
  int pred_len() const { return static_cast<int>(Y.rows()); }
  std::vector<int> observed_frames() const;
  Point last_observed() const { return X.row(X.rows() - 1).head<2>().transpose(); }
  Point goal() const { return Y.row(Y.rows() - 1).transpose(); }
  RowMat observed_positions() const { return X.leftCols(2); }
};

struct DatasetSplit {
  std::vector<std::string> train_scenes;
  std::vector<std::string> val_scenes;
  std::vector<std::string> test_scenes;
};

struct WindowOptions {
  int obs_len = 8;
  int pred_len = 12;
  int stride = 1;
};

struct ParseOptions {
  double frame_rate = 2.5;
  int frame_step = 10;
  double margin = 1.0;
};

/// Reads the 4-column "frame agent x y" ETH-UCY text format. The scene id
/// defaults to the file stem.
SceneRecording parse_ethucy_file(const std::filesystem::path& path, const ParseOptions& opts = {});
SceneRecording parse_ethucy_text(const std::string& text, const std::string& scene_id,
                                 const ParseOptions& opts = {});

/// Reads a Stanford Drone annotations.txt. Rows flagged lost are dropped and
/// only frames on the annotation cadence (frame % frame_step == 0) are kept.
SceneRecording parse_sdd_annotations(const std::filesystem::path& path, const ParseOptions& opts);
SceneRecording parse_sdd_text(const std::string& text, const std::string& scene_id, const ParseOptions& opts);

void write_ethucy_file(const SceneRecording& rec, const std::filesystem::path& path);

/// Recomputes bounds as the annotation envelope grown by rec.margin.
void recompute_bounds(SceneRecording& rec);

struct Kinematics {
  RowMat velocity;      // [n, 2]
  RowMat acceleration;  // [n, 2]
};

/// Backward differences. Velocity is first defined at index 1 and
/// acceleration at index 2; earlier rows replicate the first defined row,
/// and everything is zero when no row is defined.
Kinematics estimate_kinematics(const RowMat& positions, double dt);

/// Assembles the [n, 6] observation matrix from positions.
RowMat observation_features(const RowMat& positions, double dt);

/// Samples sorted by (t0, agent_id).
std::vector<SequenceSample> build_windows(const SceneRecording& rec, const WindowOptions& opts);

/// Rotation about the world origin by a multiple of 30 degrees.
SceneRecording rotate_scene(const SceneRecording& rec, double degrees);

DatasetSplit leave_one_out_split(const std::vector<std::string>& all_scenes, const std::string& held_out);

/// Moves the temporally last `fraction` of windows into the second result.
std::pair<std::vector<SequenceSample>, std::vector<SequenceSample>> carve_validation(
    std::vector<SequenceSample> windows, double fraction);

/// Split manifest with `[train]`, `[val]`, `[test]` sections, one id per line.
DatasetSplit load_split_manifest(const std::filesystem::path& path);
DatasetSplit parse_split_manifest(const std::string& text, const std::string& source = "<manifest>");

std::string read_text_file(const std::filesystem::path& path);

}  // namespace trajpred
