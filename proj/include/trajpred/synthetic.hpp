// SPDX-License-Identifier: Apache-2.0
//
// Seeded crowd generator for a street-with-shopfront layout: pedestrians
// enter from either side and either walk through or turn into one of the
// doors, so futures are multimodal given a short history.

#pragma once

#include "trajpred/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trajpred {

struct SyntheticSceneOptions {
  std::string scene_id = "synthetic";
  std::uint64_t seed = 0;
  int steps = 600;              // annotation steps to simulate
  double width = 15.0;          // metres
  double height = 12.0;
  double spawn_rate = 0.25;     // expected arrivals per step
  double speed_mean = 1.2;      // m/s
  double speed_sd = 0.15;
  double position_noise = 0.02;
  std::vector<double> doors_top{5.0, 10.0};  // x of doors on the top edge
  double door_bottom = 7.5;                  // x of the single bottom door
  double turn_probability = 0.5;             // chance of leaving through a door
  double frame_rate = 2.5;
  int frame_step = 10;
  double margin = 1.0;
};

SceneRecording generate_synthetic_scene(const SyntheticSceneOptions& opts);

}  // namespace trajpred
