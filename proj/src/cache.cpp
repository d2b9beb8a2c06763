// SPDX-License-Identifier: Apache-2.0

#include "trajpred/cache.hpp"

#include "trajpred/errors.hpp"
#include "trajpred/synthetic.hpp"

#include <boost/crc.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace trajpred {

namespace fs = std::filesystem;
using J = nlohmann::json;

namespace {

constexpr char kMapMagic[8] = {'T', 'R', 'J', 'P', 'M', 'A', 'P', '1'};
constexpr char kWindowMagic[8] = {'T', 'R', 'J', 'P', 'W', 'I', 'N', '1'};
constexpr int kManifestFormat = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated cache file " + path.string());
  return v;
}

void check_magic(std::istream& in, const char (&magic)[8], const fs::path& path) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) throw DataError("not a cache file of the expected kind: " + path.string());
}

J geometry_json(const SceneGeometry& g) {
  return {{"world_min", {g.world_min.x(), g.world_min.y()}},
          {"world_max", {g.world_max.x(), g.world_max.y()}},
          {"height", g.height},
          {"width", g.width},
          {"margin", g.margin}};
}

SceneGeometry geometry_from_json(const J& j) {
  SceneGeometry g;
  g.world_min = Point(j.at("world_min")[0].get<double>(), j.at("world_min")[1].get<double>());
  g.world_max = Point(j.at("world_max")[0].get<double>(), j.at("world_max")[1].get<double>());
  g.height = j.at("height").get<int>();
  g.width = j.at("width").get<int>();
  g.margin = j.at("margin").get<double>();
  return g;
}

J cache_params(const RunConfig& cfg) {
  return {{"dataset", cfg.get_string("dataset")},
          {"obs_len", cfg.get_int("obs_len")},
          {"pred_len", cfg.get_int("pred_len")},
          {"stride", cfg.get_int("stride")},
          {"frame_rate", cfg.get_double("frame_rate")},
          {"frame_step", cfg.get_int("frame_step")},
          {"margin", cfg.get_double("margin")},
          {"map_size", cfg.get_int("map_size")},
          {"sigma_map", cfg.get_double("sigma_map")},
          {"ae_rotation_step", cfg.get_int("ae_rotation_step")},
          {"ae_max_frames", cfg.get_int("ae_max_frames")},
          {"synthetic_steps", cfg.get_int("synthetic_steps")},
          {"seed", cfg.get_int("seed")}};
}

std::vector<int> evenly_spaced(const std::vector<int>& ids, int max_count) {
  if (max_count <= 0 || static_cast<int>(ids.size()) <= max_count) return ids;
  std::vector<int> out;
  const double step = static_cast<double>(ids.size()) / max_count;
  for (int i = 0; i < max_count; ++i) out.push_back(ids[static_cast<std::size_t>(i * step)]);
  return out;
}

fs::path sdd_annotation_path(const fs::path& root, const std::string& id) {
  const auto pos = id.rfind("_video");
  if (pos == std::string::npos) throw ConfigError("SDD scene id '" + id + "' is not of the form <scene>_video<N>");
  return root / id.substr(0, pos) / id.substr(pos + 1) / "annotations.txt";
}

std::vector<std::string> configured_scene_ids(const RunConfig& cfg) {
  if (cfg.get_string("dataset") != "sdd") return cfg.get_strings("scenes");
  const std::string manifest = cfg.get_string("split_manifest");
  if (manifest.empty()) throw ConfigError("dataset 'sdd' requires split_manifest");
  const DatasetSplit split = load_split_manifest(manifest);
  std::vector<std::string> ids = split.train_scenes;
  ids.insert(ids.end(), split.val_scenes.begin(), split.val_scenes.end());
  ids.insert(ids.end(), split.test_scenes.begin(), split.test_scenes.end());
  return ids;
}

}  // namespace

std::string file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing cache file " + path.string());
  boost::crc_32_type crc;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    crc.process_bytes(buf, static_cast<std::size_t>(in.gcount()));
  }
  char hex[9];
  std::snprintf(hex, sizeof(hex), "%08x", crc.checksum());
  return hex;
}

void write_map_file(const fs::path& path, const RowMat& maps, const std::vector<int>& frame_ids) {
  if (static_cast<Eigen::Index>(frame_ids.size()) != maps.rows()) {
    throw ContractError("write_map_file: frame id count does not match map rows");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMapMagic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(maps.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(maps.cols()));
  for (int f : frame_ids) put<std::int32_t>(out, f);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f32 = maps.cast<float>();
  out.write(reinterpret_cast<const char*>(f32.data()), static_cast<std::streamsize>(f32.size() * sizeof(float)));
}

RowMat read_map_file(const fs::path& path, std::vector<int>* frame_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing cache file " + path.string());
  check_magic(in, kMapMagic, path);
  const auto rows = get<std::uint32_t>(in, path);
  const auto cols = get<std::uint32_t>(in, path);
  std::vector<int> ids(rows);
  for (auto& f : ids) f = get<std::int32_t>(in, path);
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f32(rows, cols);
  in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!in) throw DataError("truncated cache file " + path.string());
  if (frame_ids != nullptr) *frame_ids = std::move(ids);
  return f32.cast<double>();
}

void write_window_file(const fs::path& path, const std::vector<SequenceSample>& windows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kWindowMagic, 8);
  const std::uint32_t obs = windows.empty() ? 0 : static_cast<std::uint32_t>(windows.front().X.rows());
  const std::uint32_t pred = windows.empty() ? 0 : static_cast<std::uint32_t>(windows.front().Y.rows());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(windows.size()));
  put<std::uint32_t>(out, obs);
  put<std::uint32_t>(out, pred);
  for (const auto& w : windows) {
    put<std::int32_t>(out, w.agent_id);
    put<std::int32_t>(out, w.t0);
    put<std::int32_t>(out, w.frame_step);
    out.write(reinterpret_cast<const char*>(w.X.data()), static_cast<std::streamsize>(w.X.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(w.Y.data()), static_cast<std::streamsize>(w.Y.size() * sizeof(double)));
  }
}

std::vector<SequenceSample> read_window_file(const fs::path& path, const std::string& scene_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing cache file " + path.string());
  check_magic(in, kWindowMagic, path);
  const auto n = get<std::uint32_t>(in, path);
  const auto obs = get<std::uint32_t>(in, path);
  const auto pred = get<std::uint32_t>(in, path);
  std::vector<SequenceSample> out(n);
  for (auto& w : out) {
    w.scene_id = scene_id;
    w.agent_id = get<std::int32_t>(in, path);
    w.t0 = get<std::int32_t>(in, path);
    w.frame_step = get<std::int32_t>(in, path);
    w.X.resize(obs, 6);
    w.Y.resize(pred, 2);
    in.read(reinterpret_cast<char*>(w.X.data()), static_cast<std::streamsize>(w.X.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(w.Y.data()), static_cast<std::streamsize>(w.Y.size() * sizeof(double)));
    if (!in) throw DataError("truncated cache file " + path.string());
  }
  return out;
}

std::vector<SceneRecording> load_raw_scenes(const RunConfig& cfg, const std::vector<std::string>& only) {
  const std::string dataset = cfg.get_string("dataset");
  const fs::path root = cfg.get_string("data_dir");
  const ParseOptions popts = cfg.parse_options();
  std::vector<std::string> ids = configured_scene_ids(cfg);
  if (!only.empty()) {
    for (const auto& o : only) {
      if (std::find(ids.begin(), ids.end(), o) == ids.end()) throw ConfigError("unknown scene '" + o + "'");
    }
    ids = only;
  }
  std::vector<SceneRecording> out;
  const auto all = configured_scene_ids(cfg);
  for (const auto& id : ids) {
    if (dataset == "synthetic") {
      SyntheticSceneOptions so;
      so.scene_id = id;
      const auto index = static_cast<std::uint64_t>(std::find(all.begin(), all.end(), id) - all.begin());
      so.seed = static_cast<std::uint64_t>(cfg.get_int("seed")) * 1000 + index + 1;
      so.steps = cfg.get_int("synthetic_steps");
      so.frame_rate = popts.frame_rate;
      so.frame_step = popts.frame_step;
      so.margin = popts.margin;
      out.push_back(generate_synthetic_scene(so));
    } else if (dataset == "sdd") {
      const fs::path p = sdd_annotation_path(root, id);
      if (!fs::exists(p)) throw ConfigError("missing SDD annotations: " + p.string());
      out.push_back(parse_sdd_annotations(p, popts));
      out.back().scene_id = id;
    } else {
      const fs::path p = root / (id + ".txt");
      if (!fs::exists(p)) throw ConfigError("missing ETH-UCY scene file: " + p.string());
      out.push_back(parse_ethucy_file(p, popts));
      out.back().scene_id = id;
    }
  }
  return out;
}

nlohmann::json read_manifest(const fs::path& cache_dir) {
  const fs::path p = cache_dir / "manifest.json";
  std::ifstream in(p);
  if (!in) throw ConfigError("no cache manifest at " + p.string() + " (run prepare-data first)");
  try {
    return J::parse(in);
  } catch (const J::parse_error& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

J prepare_cache(const std::vector<SceneRecording>& scenes, const RunConfig& cfg, const fs::path& cache_dir) {
  fs::create_directories(cache_dir);
  const J params = cache_params(cfg);
  J manifest = {{"format", kManifestFormat}, {"params", params}, {"scenes", J::object()}};
  if (fs::exists(cache_dir / "manifest.json")) {
    const J old = read_manifest(cache_dir);
    if (old.value("format", 0) == kManifestFormat && old.value("params", J()) == params) {
      manifest["scenes"] = old.at("scenes");
    }
  }
  const int size = cfg.get_int("map_size");
  const double sigma = cfg.get_double("sigma_map");
  const int rot_step = cfg.get_int("ae_rotation_step");
  const int ae_frames = cfg.get_int("ae_max_frames");

  for (const auto& rec : scenes) {
    const fs::path dir = cache_dir / rec.scene_id;
    fs::create_directories(dir);
    write_ethucy_file(rec, dir / "recording.txt");

    const auto windows = build_windows(rec, cfg.window_options());
    write_window_file(dir / "windows.bin", windows);

    const SceneGeometry geometry = SceneGeometry::from_recording(rec, size, size);
    const auto table = rec.frame_table();
    std::vector<int> ids;
    for (const auto& [f, pts] : table) ids.push_back(f);
    write_map_file(dir / "maps.bin", render_sequence(table, ids, geometry, sigma).maps, ids);

    std::vector<RowMat> blocks;
    Eigen::Index total = 0;
    for (int angle = 0; angle < 360; angle += (rot_step > 0 ? rot_step : 360)) {
      const SceneRecording rotated = angle == 0 ? rec : rotate_scene(rec, angle);
      const SceneGeometry g = SceneGeometry::from_recording(rotated, size, size);
      const auto rtable = rotated.frame_table();
      std::vector<int> rids;
      for (const auto& [f, pts] : rtable) rids.push_back(f);
      blocks.push_back(render_sequence(rtable, evenly_spaced(rids, ae_frames), g, sigma).maps);
      total += blocks.back().rows();
    }
    RowMat ae_maps(total, static_cast<Eigen::Index>(size) * size);
    Eigen::Index row = 0;
    for (const auto& b : blocks) {
      ae_maps.middleRows(row, b.rows()) = b;
      row += b.rows();
    }
    std::vector<int> ae_ids(static_cast<std::size_t>(total));
    for (std::size_t i = 0; i < ae_ids.size(); ++i) ae_ids[i] = static_cast<int>(i);
    write_map_file(dir / "ae_maps.bin", ae_maps, ae_ids);

    J files = J::object();
    for (const char* name : {"recording.txt", "windows.bin", "maps.bin", "ae_maps.bin"}) {
      files[name] = file_crc32(dir / name);
    }
    manifest["scenes"][rec.scene_id] = {{"geometry", geometry_json(geometry)},
                                        {"frame_rate", rec.frame_rate},
                                        {"frame_step", rec.frame_step},
                                        {"margin", rec.margin},
                                        {"annotations", rec.annotation_count()},
                                        {"frames", ids.size()},
                                        {"windows", windows.size()},
                                        {"ae_frames", total},
                                        {"files", files}};
  }
  std::ofstream out(cache_dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
  return manifest;
}

void verify_cache(const fs::path& cache_dir) {
  const J manifest = read_manifest(cache_dir);
  for (const auto& [scene, entry] : manifest.at("scenes").items()) {
    for (const auto& [name, crc] : entry.at("files").items()) {
      const fs::path p = cache_dir / scene / name;
      const std::string actual = file_crc32(p);
      if (actual != crc.get<std::string>()) {
        throw DataError("checksum mismatch for " + p.string() + ": manifest " + crc.get<std::string>() + ", file " +
                        actual);
      }
    }
  }
}

CachedScene load_cached_scene(const fs::path& cache_dir, const std::string& scene_id, bool with_maps,
                              bool with_ae_maps) {
  const J manifest = read_manifest(cache_dir);
  if (!manifest.at("scenes").contains(scene_id)) {
    throw ConfigError("scene '" + scene_id + "' is not in the cache at " + cache_dir.string());
  }
  const J& entry = manifest.at("scenes").at(scene_id);
  const fs::path dir = cache_dir / scene_id;
  CachedScene s;
  const ParseOptions popts{entry.at("frame_rate").get<double>(), entry.at("frame_step").get<int>(),
                           entry.at("margin").get<double>()};
  s.recording = parse_ethucy_file(dir / "recording.txt", popts);
  s.recording.scene_id = scene_id;
  s.geometry = geometry_from_json(entry.at("geometry"));
  s.windows = read_window_file(dir / "windows.bin", scene_id);
  if (with_maps) {
    s.maps = read_map_file(dir / "maps.bin", &s.frame_ids);
  } else {
    for (const auto& [f, pts] : s.recording.frame_table()) s.frame_ids.push_back(f);
  }
  if (with_ae_maps) s.ae_maps = read_map_file(dir / "ae_maps.bin");
  return s;
}

}  // namespace trajpred
