// SPDX-License-Identifier: Apache-2.0

#include "trajpred/checkpoint.hpp"

#include "trajpred/errors.hpp"

#include <boost/crc.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace trajpred {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'J', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& pos, const std::string& what) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("checkpoint truncated while reading " + what);
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc32(const char* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

const std::vector<std::string> kAutoencoderKeys = {"map_height", "map_width", "ae_channels", "ae_input_gain"};

}  // namespace

const nn::Mat* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.tensors) table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const nlohmann::json header = {{"kind", ckpt.kind},   {"descriptor", ckpt.descriptor}, {"config", ckpt.config},
                                 {"extra", ckpt.extra}, {"epoch", ckpt.epoch},           {"rng_state", ckpt.rng_state},
                                 {"tensors", table}};
  const std::string text = header.dump();

  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, text.size());
  buf += text;
  for (const auto& [name, m] : ckpt.tensors) {
    buf.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  put<std::uint32_t>(buf, crc32(buf.data(), buf.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint not found: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string src = "checkpoint " + path.string();

  if (buf.size() < sizeof(kMagic) + 4 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(src + ": not a checkpoint file (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(buf, pos, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(src + ": unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (buf.size() < pos + 12) throw FormatError(src + ": truncated");
  const std::size_t body = buf.size() - 4;
  std::size_t crc_pos = body;
  const auto stored_crc = get<std::uint32_t>(buf, crc_pos, "checksum");
  if (crc32(buf.data(), body) != stored_crc) throw FormatError(src + ": checksum mismatch (file is corrupt)");

  const auto header_len = get<std::uint64_t>(buf, pos, "header length");
  if (pos + header_len > body) throw FormatError(src + ": header extends past end of file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                   buf.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": malformed header: " + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.descriptor = header.at("descriptor");
    ckpt.config = header.at("config");
    ckpt.extra = header.value("extra", nlohmann::json::object());
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (rows < 0 || cols < 0 || pos + bytes > body) throw FormatError(src + ": tensor '" + name + "' truncated");
      nn::Mat m(rows, cols);
      std::memcpy(m.data(), buf.data() + pos, bytes);
      pos += bytes;
      ckpt.tensors.emplace_back(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": malformed header: " + e.what());
  }
  if (pos != body) throw FormatError(src + ": trailing bytes after payload");
  return ckpt;
}

void store_parameters(const nn::ParameterSet& params, Checkpoint& ckpt) {
  for (const auto& [name, v] : params.entries()) ckpt.tensors.emplace_back(name, v->value);
}

void load_parameters(nn::ParameterSet& params, const Checkpoint& ckpt) {
  for (const auto& [name, v] : params.entries()) {
    const nn::Mat* m = ckpt.find(name);
    if (m == nullptr) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (m->rows() != v->value.rows() || m->cols() != v->value.cols()) {
      throw FormatError("shape mismatch for tensor '" + name + "': checkpoint has " + std::to_string(m->rows()) +
                        "x" + std::to_string(m->cols()) + ", model expects " + std::to_string(v->value.rows()) +
                        "x" + std::to_string(v->value.cols()));
    }
  }
  for (const auto& [name, v] : params.entries()) v->value = *ckpt.find(name);
}

void store_optimizer(nn::Adam& opt, const std::string& prefix, Checkpoint& ckpt) {
  ckpt.extra[prefix + ".step"] = opt.step_count();
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    ckpt.tensors.emplace_back(prefix + ".m." + std::to_string(i), opt.first_moments()[i]);
    ckpt.tensors.emplace_back(prefix + ".v." + std::to_string(i), opt.second_moments()[i]);
  }
}

void load_optimizer(nn::Adam& opt, const std::string& prefix, const Checkpoint& ckpt) {
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (auto [name, dst] : {std::pair{prefix + ".m." + std::to_string(i), &m[i]},
                             std::pair{prefix + ".v." + std::to_string(i), &v[i]}}) {
      const nn::Mat* src = ckpt.find(name);
      if (src == nullptr) throw FormatError("checkpoint is missing optimizer tensor '" + name + "'");
      if (src->rows() != dst->rows() || src->cols() != dst->cols()) {
        throw FormatError("shape mismatch for optimizer tensor '" + name + "'");
      }
      *dst = *src;
    }
  }
  opt.set_step_count(ckpt.extra.value(prefix + ".step", 0LL));
}

std::string rng_to_string(const nn::Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

nn::Rng rng_from_string(const std::string& s) {
  nn::Rng rng;
  if (s.empty()) return rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw FormatError("malformed RNG state in checkpoint");
  return rng;
}

std::unique_ptr<TrajectoryModel> load_model(const Checkpoint& ckpt) {
  if (ckpt.kind != "model") throw FormatError("expected a model checkpoint, found '" + ckpt.kind + "'");
  auto model = std::make_unique<TrajectoryModel>(ModelSpec::from_json(ckpt.descriptor), 0);
  load_parameters(model->autoencoder().params(), ckpt);
  load_parameters(model->params(), ckpt);
  return model;
}

Checkpoint model_checkpoint(const TrajectoryModel& model, const nlohmann::json& config, int epoch) {
  Checkpoint ckpt;
  ckpt.kind = "model";
  ckpt.descriptor = model.spec().to_json();
  ckpt.config = config;
  ckpt.epoch = epoch;
  store_parameters(model.autoencoder().params(), ckpt);
  store_parameters(model.params(), ckpt);
  return ckpt;
}

void load_autoencoder(TrajectoryModel& model, const Checkpoint& ckpt) {
  if (ckpt.kind != "autoencoder" && ckpt.kind != "model") {
    throw FormatError("expected an autoencoder checkpoint, found '" + ckpt.kind + "'");
  }
  const nlohmann::json mine = model.spec().to_json();
  for (const auto& key : kAutoencoderKeys) {
    if (!ckpt.descriptor.contains(key) || ckpt.descriptor.at(key) != mine.at(key)) {
      throw FormatError("autoencoder descriptor mismatch on '" + key + "'");
    }
  }
  load_parameters(model.autoencoder().params(), ckpt);
}

}  // namespace trajpred
