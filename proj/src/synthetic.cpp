// SPDX-License-Identifier: Apache-2.0

#include "trajpred/synthetic.hpp"

#include "trajpred/errors.hpp"

#include <random>

namespace trajpred {

namespace {

struct Walker {
  AgentTrack track;
  Point pos;
  Point vel;
  double speed = 1.2;
  double turn_x = 0.0;  // x at which the agent heads for its exit
  Point exit;
  bool active = true;
};

}  // namespace

SceneRecording generate_synthetic_scene(const SyntheticSceneOptions& opts) {
  if (opts.steps < 1 || opts.width <= 0.0 || opts.height <= 0.0 || opts.frame_step < 1) {
    throw ConfigError("synthetic scene: steps, extent and frame_step must be positive");
  }
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = 1.0 / opts.frame_rate;
  const double lane_lo = 0.35 * opts.height;
  const double lane_hi = 0.65 * opts.height;

  std::vector<Walker> walkers;
  std::vector<AgentTrack> done;
  int next_id = 1;

  for (int step = 0; step < opts.steps; ++step) {
    std::poisson_distribution<int> arrivals(opts.spawn_rate);
    for (int a = arrivals(rng); a > 0; --a) {
      Walker w;
      w.track.agent_id = next_id++;
      const bool from_left = unit(rng) < 0.5;
      const double y = lane_lo + (lane_hi - lane_lo) * unit(rng);
      w.pos = Point(from_left ? 0.0 : opts.width, y);
      w.speed = std::max(0.5, opts.speed_mean + opts.speed_sd * gauss(rng));
      const double dir = from_left ? 1.0 : -1.0;
      w.vel = Point(dir * w.speed, 0.0);
      if (unit(rng) < opts.turn_probability) {
        // Pick a door ahead of the agent.
        std::vector<Point> doors;
        for (double x : opts.doors_top) {
          if ((x - w.pos.x()) * dir > 2.0) doors.emplace_back(x, opts.height);
        }
        if ((opts.door_bottom - w.pos.x()) * dir > 2.0) doors.emplace_back(opts.door_bottom, 0.0);
        if (doors.empty()) {
          w.exit = Point(from_left ? opts.width + 1.0 : -1.0, y);
          w.turn_x = w.exit.x();
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, doors.size() - 1);
          w.exit = doors[pick(rng)];
          w.turn_x = w.exit.x() - dir * 1.5;
        }
      } else {
        w.exit = Point(from_left ? opts.width + 1.0 : -1.0, lane_lo + (lane_hi - lane_lo) * unit(rng));
        w.turn_x = w.exit.x();
      }
      walkers.push_back(std::move(w));
    }

    for (auto& w : walkers) {
      if (!w.active) continue;
      w.track.frames.push_back(step * opts.frame_step);
      w.track.positions.push_back(w.pos + Point(opts.position_noise * gauss(rng), opts.position_noise * gauss(rng)));
    }

    // Advance: head along the lane until the turn point, then to the exit,
    // with a mild repulsion from nearby walkers.
    std::vector<Point> next(walkers.size());
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      Walker& w = walkers[i];
      if (!w.active) continue;
      const double dir = w.vel.x() >= 0.0 ? 1.0 : -1.0;
      const bool turned = (w.pos.x() - w.turn_x) * dir >= 0.0;
      Point target = turned ? w.exit : Point(w.turn_x, w.pos.y());
      Point heading = target - w.pos;
      if (heading.norm() < 1e-9) heading = w.exit - w.pos;
      Point desired = w.speed * heading.normalized();
      for (std::size_t j = 0; j < walkers.size(); ++j) {
        if (j == i || !walkers[j].active) continue;
        const Point d = w.pos - walkers[j].pos;
        const double r = d.norm();
        if (r > 1e-6 && r < 1.0) desired += 0.6 * (1.0 - r) * d / r;
      }
      w.vel = 0.6 * w.vel + 0.4 * desired;
      next[i] = w.pos + dt * w.vel;
    }
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      Walker& w = walkers[i];
      if (!w.active) continue;
      w.pos = next[i];
      const bool outside = w.pos.x() < -0.5 || w.pos.x() > opts.width + 0.5 || w.pos.y() < -0.5 ||
                           w.pos.y() > opts.height + 0.5;
      if (outside || (w.pos - w.exit).norm() < 0.3) w.active = false;
    }
    for (auto it = walkers.begin(); it != walkers.end();) {
      if (!it->active) {
        done.push_back(std::move(it->track));
        it = walkers.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& w : walkers) done.push_back(std::move(w.track));

  SceneRecording rec;
  rec.scene_id = opts.scene_id;
  rec.frame_rate = opts.frame_rate;
  rec.frame_step = opts.frame_step;
  rec.margin = opts.margin;
  for (auto& t : done) {
    if (!t.frames.empty()) rec.tracks.push_back(std::move(t));
  }
  std::sort(rec.tracks.begin(), rec.tracks.end(),
            [](const AgentTrack& a, const AgentTrack& b) { return a.agent_id < b.agent_id; });
  recompute_bounds(rec);
  return rec;
}

}  // namespace trajpred
