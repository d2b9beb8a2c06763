// SPDX-License-Identifier: Apache-2.0

#include "trajpred/dataset.hpp"

#include "trajpred/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace trajpred {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

// Ids are sometimes written as floats ("780.0").
bool parse_integral(std::string_view tok, int& out) {
  double v = 0.0;
  if (!parse_double(tok, v)) return false;
  if (std::abs(v - std::round(v)) > 1e-6 || std::abs(v) > std::numeric_limits<int>::max()) return false;
  out = static_cast<int>(std::lround(v));
  return true;
}

struct Row {
  int frame;
  int agent;
  Point p;
};

SceneRecording assemble(std::vector<Row> rows, const std::string& scene_id, const ParseOptions& opts,
                        const std::string& source) {
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.agent != b.agent ? a.agent < b.agent : a.frame < b.frame;
  });
  SceneRecording rec;
  rec.scene_id = scene_id;
  rec.frame_rate = opts.frame_rate;
  rec.frame_step = opts.frame_step;
  rec.margin = opts.margin;
  for (const Row& r : rows) {
    if (rec.tracks.empty() || rec.tracks.back().agent_id != r.agent) {
      rec.tracks.push_back(AgentTrack{r.agent, {}, {}});
    }
    AgentTrack& t = rec.tracks.back();
    if (!t.frames.empty() && t.frames.back() == r.frame) {
      throw DataError(source + ": duplicate annotation for agent " + std::to_string(r.agent) + " at frame " +
                      std::to_string(r.frame));
    }
    t.frames.push_back(r.frame);
    t.positions.push_back(r.p);
  }
  recompute_bounds(rec);
  return rec;
}

}  // namespace

std::map<int, std::vector<Point>> SceneRecording::frame_table() const {
  std::map<int, std::vector<Point>> table;
  for (const auto& t : tracks) {
    for (std::size_t i = 0; i < t.frames.size(); ++i) table[t.frames[i]].push_back(t.positions[i]);
  }
  return table;
}

std::size_t SceneRecording::annotation_count() const {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.frames.size();
  return n;
}

std::vector<int> SequenceSample::observed_frames() const {
  std::vector<int> f(static_cast<std::size_t>(obs_len()));
  for (int i = 0; i < obs_len(); ++i) f[static_cast<std::size_t>(i)] = t0 + i * frame_step;
  return f;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SceneRecording parse_ethucy_text(const std::string& text, const std::string& scene_id, const ParseOptions& opts) {
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) throw ParseError(scene_id, lineno, "expected 4 fields, got " + std::to_string(tok.size()));
    Row r{};
    if (!parse_integral(tok[0], r.frame)) throw ParseError(scene_id, lineno, "bad frame id '" + std::string(tok[0]) + "'");
    if (!parse_integral(tok[1], r.agent)) throw ParseError(scene_id, lineno, "bad agent id '" + std::string(tok[1]) + "'");
    if (!parse_double(tok[2], r.p.x())) throw ParseError(scene_id, lineno, "bad x '" + std::string(tok[2]) + "'");
    if (!parse_double(tok[3], r.p.y())) throw ParseError(scene_id, lineno, "bad y '" + std::string(tok[3]) + "'");
    rows.push_back(r);
  }
  return assemble(std::move(rows), scene_id, opts, scene_id);
}

SceneRecording parse_ethucy_file(const std::filesystem::path& path, const ParseOptions& opts) {
  return parse_ethucy_text(read_text_file(path), path.stem().string(), opts);
}

SceneRecording parse_sdd_text(const std::string& text, const std::string& scene_id, const ParseOptions& opts) {
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 10) {
      throw ParseError(scene_id, lineno, "expected 10 SDD columns, got " + std::to_string(tok.size()));
    }
    int track = 0, frame = 0, lost = 0;
    double box[4];
    bool ok = parse_integral(tok[0], track);
    for (int i = 0; i < 4; ++i) ok = ok && parse_double(tok[1 + i], box[i]);
    ok = ok && parse_integral(tok[5], frame) && parse_integral(tok[6], lost);
    int flag = 0;
    ok = ok && parse_integral(tok[7], flag) && parse_integral(tok[8], flag);
    if (!ok) throw ParseError(scene_id, lineno, "non-numeric SDD field");
    if (lost == 1) continue;
    if (opts.frame_step > 1 && frame % opts.frame_step != 0) continue;
    rows.push_back(Row{frame, track, Point{(box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0}});
  }
  return assemble(std::move(rows), scene_id, opts, scene_id);
}

SceneRecording parse_sdd_annotations(const std::filesystem::path& path, const ParseOptions& opts) {
  // SDD stores <scene>/<video>/annotations.txt; name the recording scene_video.
  std::string id = path.stem().string();
  if (id == "annotations" && path.has_parent_path()) {
    const auto video = path.parent_path();
    id = video.filename().string();
    if (video.has_parent_path()) id = video.parent_path().filename().string() + "_" + id;
  }
  return parse_sdd_text(read_text_file(path), id, opts);
}

void write_ethucy_file(const SceneRecording& rec, const std::filesystem::path& path) {
  struct Entry {
    int frame;
    int agent;
    Point p;
  };
  std::vector<Entry> all;
  for (const auto& t : rec.tracks) {
    for (std::size_t i = 0; i < t.frames.size(); ++i) all.push_back({t.frames[i], t.agent_id, t.positions[i]});
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.agent < b.agent;
  });
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out.precision(17);
  for (const auto& e : all) out << e.frame << '\t' << e.agent << '\t' << e.p.x() << '\t' << e.p.y() << '\n';
}

void recompute_bounds(SceneRecording& rec) {
  Point lo = Point::Constant(std::numeric_limits<double>::infinity());
  Point hi = Point::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& t : rec.tracks) {
    for (const auto& p : t.positions) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  if (!std::isfinite(lo.x())) {
    lo = Point::Zero();
    hi = Point::Zero();
  }
  rec.bounds.min = lo.array() - rec.margin;
  rec.bounds.max = hi.array() + rec.margin;
}

Kinematics estimate_kinematics(const RowMat& positions, double dt) {
  if (positions.cols() != 2 || positions.rows() < 1) throw ContractError("estimate_kinematics: expected [n>=1, 2]");
  if (!(dt > 0.0)) throw ContractError("estimate_kinematics: dt must be positive");
  // Backward difference defined from index `first` on; earlier rows copy it.
  const auto diff = [dt](const RowMat& v, Eigen::Index first) {
    RowMat d = RowMat::Zero(v.rows(), 2);
    if (v.rows() <= first) return d;
    for (Eigen::Index i = first; i < v.rows(); ++i) d.row(i) = (v.row(i) - v.row(i - 1)) / dt;
    for (Eigen::Index i = 0; i < first; ++i) d.row(i) = d.row(first);
    return d;
  };
  Kinematics k;
  k.velocity = diff(positions, 1);
  k.acceleration = diff(k.velocity, 2);
  return k;
}

RowMat observation_features(const RowMat& positions, double dt) {
  const Kinematics k = estimate_kinematics(positions, dt);
  RowMat X(positions.rows(), 6);
  X << positions, k.velocity, k.acceleration;
  return X;
}

std::vector<SequenceSample> build_windows(const SceneRecording& rec, const WindowOptions& opts) {
  if (opts.obs_len < 1 || opts.pred_len < 1 || opts.stride < 1) {
    throw ConfigError("build_windows: obs_len, pred_len and stride must be >= 1");
  }
  const int span = opts.obs_len + opts.pred_len;
  const int step = rec.frame_step;

  // frame -> (agent, position) lookup for neighbour collection.
  std::vector<std::unordered_map<int, std::size_t>> index(rec.tracks.size());
  for (std::size_t a = 0; a < rec.tracks.size(); ++a) {
    for (std::size_t i = 0; i < rec.tracks[a].frames.size(); ++i) index[a][rec.tracks[a].frames[i]] = i;
  }

  std::vector<SequenceSample> out;
  for (std::size_t a = 0; a < rec.tracks.size(); ++a) {
    const AgentTrack& t = rec.tracks[a];
    const int n = static_cast<int>(t.frames.size());
    for (int s = 0; s + span <= n; s += opts.stride) {
      bool contiguous = true;
      for (int j = 1; j < span && contiguous; ++j) {
        contiguous = t.frames[static_cast<std::size_t>(s + j)] == t.frames[static_cast<std::size_t>(s)] + j * step;
      }
      if (!contiguous) continue;

      SequenceSample smp;
      smp.scene_id = rec.scene_id;
      smp.agent_id = t.agent_id;
      smp.t0 = t.frames[static_cast<std::size_t>(s)];
      smp.frame_step = step;
      RowMat obs(opts.obs_len, 2);
      for (int j = 0; j < opts.obs_len; ++j) obs.row(j) = t.positions[static_cast<std::size_t>(s + j)].transpose();
      smp.X = observation_features(obs, rec.dt());
      smp.Y.resize(opts.pred_len, 2);
      for (int j = 0; j < opts.pred_len; ++j) {
        smp.Y.row(j) = t.positions[static_cast<std::size_t>(s + opts.obs_len + j)].transpose();
      }

      for (std::size_t b = 0; b < rec.tracks.size(); ++b) {
        if (b == a) continue;
        Neighbor nb{rec.tracks[b].agent_id, {}};
        for (int j = 0; j < opts.obs_len; ++j) {
          const auto it = index[b].find(smp.t0 + j * step);
          if (it == index[b].end()) break;
          nb.positions.push_back(rec.tracks[b].positions[it->second]);
        }
        if (static_cast<int>(nb.positions.size()) == opts.obs_len) smp.neighbors.push_back(std::move(nb));
      }
      out.push_back(std::move(smp));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const SequenceSample& x, const SequenceSample& y) {
    return x.t0 != y.t0 ? x.t0 < y.t0 : x.agent_id < y.agent_id;
  });
  return out;
}

SceneRecording rotate_scene(const SceneRecording& rec, double degrees) {
  const double r = std::round(degrees);
  if (std::abs(degrees - r) > 1e-9 || r < 0.0 || r > 330.0 || static_cast<long>(r) % 30 != 0) {
    throw ConfigError("rotate_scene: angle must be one of 0, 30, ..., 330 (got " + std::to_string(degrees) + ")");
  }
  SceneRecording out = rec;
  if (r == 0.0) return out;
  const double th = r * M_PI / 180.0;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  for (auto& t : out.tracks) {
    for (auto& p : t.positions) p = R * p;
  }
  recompute_bounds(out);
  return out;
}

DatasetSplit leave_one_out_split(const std::vector<std::string>& all_scenes, const std::string& held_out) {
  if (std::find(all_scenes.begin(), all_scenes.end(), held_out) == all_scenes.end()) {
    throw ConfigError("held-out scene '" + held_out + "' is not among the configured scenes");
  }
  DatasetSplit split;
  split.test_scenes = {held_out};
  for (const auto& s : all_scenes) {
    if (s != held_out) split.train_scenes.push_back(s);
  }
  return split;
}

std::pair<std::vector<SequenceSample>, std::vector<SequenceSample>> carve_validation(
    std::vector<SequenceSample> windows, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("validation fraction must be in [0, 1)");
  std::stable_sort(windows.begin(), windows.end(), [](const SequenceSample& x, const SequenceSample& y) {
    return x.t0 != y.t0 ? x.t0 < y.t0 : x.agent_id < y.agent_id;
  });
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(windows.size())));
  std::vector<SequenceSample> val(std::make_move_iterator(windows.end() - static_cast<std::ptrdiff_t>(n_val)),
                                  std::make_move_iterator(windows.end()));
  windows.resize(windows.size() - n_val);
  return {std::move(windows), std::move(val)};
}

DatasetSplit parse_split_manifest(const std::string& text, const std::string& source) {
  DatasetSplit split;
  std::vector<std::string>* current = nullptr;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() != 1) throw ParseError(source, lineno, "expected a single id or section header");
    const std::string_view t = tok[0];
    if (t == "[train]") current = &split.train_scenes;
    else if (t == "[val]") current = &split.val_scenes;
    else if (t == "[test]") current = &split.test_scenes;
    else if (t.front() == '[') throw ParseError(source, lineno, "unknown section " + std::string(t));
    else if (!current) throw ParseError(source, lineno, "id before any section header");
    else current->emplace_back(t);
  }
  std::set<std::string> seen;
  for (const auto* list : {&split.train_scenes, &split.val_scenes, &split.test_scenes}) {
    for (const auto& id : *list) {
      if (!seen.insert(id).second) throw DataError(source + ": video '" + id + "' appears in more than one split");
    }
  }
  return split;
}

DatasetSplit load_split_manifest(const std::filesystem::path& path) {
  return parse_split_manifest(read_text_file(path), path.string());
}

}  // namespace trajpred
