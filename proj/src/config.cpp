// SPDX-License-Identifier: Apache-2.0

#include "trajpred/config.hpp"

#include "trajpred/errors.hpp"

#include <boost/crc.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace trajpred {

namespace {

using J = nlohmann::json;

std::vector<ConfigField> build_schema() {
  using F = FieldType;
  return {
      {"dataset", F::kString, "ethucy", {"ethucy", "sdd", "synthetic"}, "raw data family"},
      {"data_dir", F::kString, "data", {}, "directory holding raw scene files"},
      {"scenes", F::kStringList, J::array({"eth", "hotel", "univ", "zara1", "zara2"}), {},
       "scene ids (ETH-UCY: <data_dir>/<id>.txt; synthetic: generated)"},
      {"test_scene", F::kString, "zara2", {}, "held-out scene for leave-one-out"},
      {"split_manifest", F::kString, "", {}, "SDD split manifest ([train]/[val]/[test] sections)"},
      {"val_fraction", F::kFloat, 0.1, {}, "temporally last fraction of training windows used for validation"},
      {"cache_dir", F::kString, "cache", {}, "preprocessed cache directory"},
      {"runs_dir", F::kString, "runs", {}, "parent directory for run outputs"},
      {"ae_checkpoint", F::kString, "", {}, "pretrained autoencoder used by train"},
      {"frame_rate", F::kFloat, 2.5, {}, "annotations per second"},
      {"frame_step", F::kInt, 10, {}, "raw frame-id increment between annotations"},
      {"margin", F::kFloat, 1.0, {}, "world margin around the annotation envelope"},
      {"obs_len", F::kInt, 8, {}, "observed steps (tau)"},
      {"pred_len", F::kInt, 12, {}, "predicted steps (T)"},
      {"stride", F::kInt, 1, {}, "window stride in annotation steps"},
      {"map_size", F::kInt, 80, {}, "density map height and width"},
      {"sigma_map", F::kFloat, kDefaultSigmaMap, {}, "density kernel bandwidth in map cells"},
      {"ae_rotation_step", F::kInt, 30, {}, "rotation augmentation step in degrees (0 disables)"},
      {"ae_max_frames", F::kInt, 400, {}, "frames kept per rotated scene for autoencoder training"},
      {"ae_channels", F::kIntList, J::array({16, 32, 32}), {}, "encoder channels, one stride-2 block each"},
      {"temporal_cell", F::kString, "lstm", {"lstm", "gru"}, "temporal encoder cell"},
      {"temporal_hidden", F::kInt, 64, {}, "temporal encoder width"},
      {"relation_hidden", F::kInt, 64, {}, "relation extractor width"},
      {"encoder_hidden", F::kInt, 64, {}, "history/future encoder width"},
      {"latent_dim", F::kInt, 32, {}, "CVAE latent size"},
      {"mlp_hidden", F::kInt, 64, {}, "hidden width of the CVAE networks"},
      {"decoder_hidden", F::kInt, 64, {}, "future decoder width"},
      {"coord_scale", F::kFloat, 1.0, {}, "world units per network unit"},
      {"use_relation", F::kBool, true, {}, "relation branch enabled"},
      {"use_goal", F::kBool, true, {}, "multi-goal branch enabled"},
      {"batch_size", F::kInt, 64, {}, "training batch size"},
      {"lr0", F::kFloat, 1e-3, {}, "initial learning rate"},
      {"lr_gamma", F::kFloat, 0.95, {}, "per-epoch learning-rate decay"},
      {"epochs", F::kInt, 100, {}, "full-model epochs"},
      {"k", F::kInt, 20, {}, "latent draws per training sample"},
      {"beta_min", F::kFloat, 1e-4, {}, "KL weight at epoch 0"},
      {"beta_max", F::kFloat, 1.0, {}, "KL weight after the ramp"},
      {"kl_ramp_epochs", F::kInt, 50, {}, "epochs of the linear KL ramp"},
      {"grad_clip", F::kFloat, 1.0, {}, "global gradient-norm clip (<= 0 disables)"},
      {"loss_min_mode", F::kString, "goal_first", {"goal_first", "joint"}, "best-of-K selection in the loss"},
      {"ae_epochs", F::kInt, 20, {}, "autoencoder epochs"},
      {"ae_batch_size", F::kInt, 16, {}, "autoencoder batch size"},
      {"ae_lr0", F::kFloat, 1e-3, {}, "autoencoder initial learning rate"},
      {"eval_k", F::kInt, 20, {}, "candidates per window at evaluation"},
      {"select", F::kString, "min_fde_then_ade", {"min_ade", "min_fde", "min_fde_then_ade"},
       "best-of-K selection at evaluation"},
      {"kde_samples", F::kInt, 2000, {}, "draws per window for KDE-NLL (0 disables)"},
      {"kde_bandwidth_floor", F::kFloat, 1e-6, {}, "minimum KDE bandwidth"},
      {"kde_log_density_floor", F::kFloat, -20.0, {}, "lower clamp on the per-step log density"},
      {"perturb_sigma", F::kFloat, 0.1, {}, "observation noise for the robustness study (world units)"},
      {"synthetic_steps", F::kInt, 600, {}, "annotation steps per generated synthetic scene"},
      {"seed", F::kInt, 0, {}, "global seed"},
      {"deterministic", F::kBool, false, {}, "serial execution (always the case in this build)"},
  };
}

std::string type_name(FieldType t) {
  switch (t) {
    case FieldType::kInt: return "int";
    case FieldType::kFloat: return "float";
    case FieldType::kBool: return "bool";
    case FieldType::kString: return "string";
    case FieldType::kStringList: return "list<string>";
    case FieldType::kIntList: return "list<int>";
  }
  return "?";
}

const ConfigField& field(const std::string& key) {
  for (const auto& f : config_schema()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

/// Checks and normalises a value for `f`; comma strings become lists.
J coerce(const ConfigField& f, const J& v, const std::string& source) {
  auto bad = [&]() {
    return ConfigError(source + ": key '" + f.key + "' expects " + type_name(f.type) + ", got " + v.dump());
  };
  switch (f.type) {
    case FieldType::kInt:
      if (v.is_number_integer()) return v;
      if (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()))) {
        return J(static_cast<long long>(v.get<double>()));
      }
      throw bad();
    case FieldType::kFloat:
      if (v.is_number()) return J(v.get<double>());
      throw bad();
    case FieldType::kBool:
      if (v.is_boolean()) return v;
      throw bad();
    case FieldType::kString:
      if (!v.is_string()) throw bad();
      if (!f.choices.empty() && std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end()) {
        std::string allowed;
        for (const auto& c : f.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw ConfigError(source + ": key '" + f.key + "' must be one of " + allowed + ", got " + v.dump());
      }
      return v;
    case FieldType::kStringList:
      if (v.is_string()) return J(split_commas(v.get<std::string>()));
      if (!v.is_array()) throw bad();
      for (const auto& e : v) {
        if (!e.is_string()) throw bad();
      }
      return v;
    case FieldType::kIntList: {
      J arr = v;
      if (v.is_string()) {
        arr = J::array();
        for (const auto& s : split_commas(v.get<std::string>())) {
          try {
            arr.push_back(std::stoi(s));
          } catch (const std::exception&) {
            throw bad();
          }
        }
      }
      if (!arr.is_array()) throw bad();
      for (const auto& e : arr) {
        if (!e.is_number_integer()) throw bad();
      }
      return arr;
    }
  }
  throw bad();
}

}  // namespace

const std::vector<ConfigField>& config_schema() {
  static const std::vector<ConfigField> schema = build_schema();
  return schema;
}

RunConfig::RunConfig() : values_(J::object()) {
  for (const auto& f : config_schema()) values_[f.key] = f.default_value;
}

RunConfig RunConfig::resolve(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) cfg.merge_file(file);
  if (const char* env = std::getenv(kCacheDirEnv); env != nullptr && *env != '\0') {
    cfg.set("cache_dir", std::string(env), kCacheDirEnv);
  }
  for (const auto& o : overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

void RunConfig::merge(const J& values, const std::string& source) {
  if (!values.is_object()) throw ConfigError(source + ": config must be a JSON object");
  for (const auto& [key, v] : values.items()) {
    try {
      field(key);
    } catch (const ConfigError&) {
      throw ConfigError(source + ": unknown config key '" + key + "'");
    }
    set(key, v, source);
  }
}

void RunConfig::merge_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config file not found: " + file.string());
  J j;
  try {
    j = J::parse(in, nullptr, true, true);
  } catch (const J::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  merge(j, file.string());
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  J value;
  try {
    value = J::parse(text);
  } catch (const J::parse_error&) {
    value = text;
  }
  const ConfigField& f = field(key);
  if (f.type == FieldType::kString && !value.is_string()) value = text;
  set(key, value, "--set " + key);
}

void RunConfig::set(const std::string& key, const J& value, const std::string& source) {
  values_[key] = coerce(field(key), value, source);
}

int RunConfig::get_int(const std::string& key) const { return values_.at(key).get<int>(); }
double RunConfig::get_double(const std::string& key) const { return values_.at(key).get<double>(); }
bool RunConfig::get_bool(const std::string& key) const { return values_.at(key).get<bool>(); }
std::string RunConfig::get_string(const std::string& key) const { return values_.at(key).get<std::string>(); }
std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  return values_.at(key).get<std::vector<std::string>>();
}
std::vector<int> RunConfig::get_ints(const std::string& key) const { return values_.at(key).get<std::vector<int>>(); }

std::string RunConfig::fingerprint() const {
  const std::string text = values_.dump();
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  char hex[9];
  std::snprintf(hex, sizeof(hex), "%08x", crc.checksum());
  return hex;
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec s;
  s.autoencoder.map_height = get_int("map_size");
  s.autoencoder.map_width = get_int("map_size");
  s.autoencoder.channels = get_ints("ae_channels");
  const double sigma = get_double("sigma_map");
  s.autoencoder.input_gain = 2.0 * M_PI * sigma * sigma;
  s.relation.temporal_cell = get_string("temporal_cell") == "gru" ? CellKind::kGru : CellKind::kLstm;
  s.relation.latent_channels = s.autoencoder.channels.empty() ? 0 : s.autoencoder.channels.back();
  s.relation.temporal_hidden = get_int("temporal_hidden");
  s.relation.relation_hidden = get_int("relation_hidden");
  s.goal.encoder_hidden = get_int("encoder_hidden");
  s.goal.latent_dim = get_int("latent_dim");
  s.goal.mlp_hidden = get_int("mlp_hidden");
  s.decoder_hidden = get_int("decoder_hidden");
  s.obs_len = get_int("obs_len");
  s.pred_len = get_int("pred_len");
  s.use_relation = get_bool("use_relation");
  s.use_goal = get_bool("use_goal");
  s.coord_scale = get_double("coord_scale");
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.batch_size = get_int("batch_size");
  t.lr0 = get_double("lr0");
  t.lr_gamma = get_double("lr_gamma");
  t.epochs = get_int("epochs");
  t.k = get_int("k");
  t.kl = KlSchedule{get_double("beta_min"), get_double("beta_max"), get_int("kl_ramp_epochs")};
  t.grad_clip = get_double("grad_clip");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.loss_min_mode = get_string("loss_min_mode") == "joint" ? LossMinMode::kJoint : LossMinMode::kGoalFirst;
  t.val_select = parse_select_mode(get_string("select"));
  return t;
}

AeTrainOptions RunConfig::ae_options() const {
  AeTrainOptions o;
  o.epochs = get_int("ae_epochs");
  o.batch_size = get_int("ae_batch_size");
  o.lr0 = get_double("ae_lr0");
  o.lr_gamma = get_double("lr_gamma");
  o.grad_clip = get_double("grad_clip");
  o.seed = static_cast<std::uint64_t>(get_int("seed"));
  return o;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.k = get_int("eval_k");
  e.select = parse_select_mode(get_string("select"));
  e.kde_samples = get_int("kde_samples");
  e.kde.bandwidth_floor = get_double("kde_bandwidth_floor");
  e.kde.log_density_floor = get_double("kde_log_density_floor");
  e.perturb_sigma = get_double("perturb_sigma");
  e.sigma_map = get_double("sigma_map");
  e.seed = static_cast<std::uint64_t>(get_int("seed"));
  return e;
}

WindowOptions RunConfig::window_options() const {
  return WindowOptions{get_int("obs_len"), get_int("pred_len"), get_int("stride")};
}

ParseOptions RunConfig::parse_options() const {
  return ParseOptions{get_double("frame_rate"), get_int("frame_step"), get_double("margin")};
}

void RunConfig::validate() const {
  if (get_int("seed") < 0) throw ConfigError("seed must be >= 0");
  if (get_double("val_fraction") < 0.0 || get_double("val_fraction") >= 1.0) {
    throw ConfigError("val_fraction must be in [0, 1)");
  }
  if (get_int("stride") < 1) throw ConfigError("stride must be >= 1");
  if (get_double("frame_rate") <= 0.0 || get_int("frame_step") < 1) {
    throw ConfigError("frame_rate and frame_step must be positive");
  }
  if (get_double("sigma_map") <= 0.0) throw ConfigError("sigma_map must be positive");
  const int rot = get_int("ae_rotation_step");
  if (rot < 0 || (rot > 0 && (rot % 30 != 0 || rot >= 360))) {
    throw ConfigError("ae_rotation_step must be 0 or a multiple of 30 below 360");
  }
  if (get_int("eval_k") < 1 || get_int("kde_samples") < 0 || get_double("perturb_sigma") < 0.0) {
    throw ConfigError("eval_k must be >= 1, kde_samples and perturb_sigma >= 0");
  }
  if (get_int("ae_epochs") < 0 || get_int("ae_batch_size") < 1 || get_double("ae_lr0") <= 0.0) {
    throw ConfigError("autoencoder epochs/batch size/learning rate out of range");
  }
  try {
    model_spec().validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  train_config().validate();
}

std::string describe_schema() {
  std::ostringstream os;
  for (const auto& f : config_schema()) {
    os << f.key << " (" << type_name(f.type) << ", default " << f.default_value.dump() << "): " << f.help;
    if (!f.choices.empty()) {
      os << " [";
      for (std::size_t i = 0; i < f.choices.size(); ++i) os << (i ? "|" : "") << f.choices[i];
      os << "]";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace trajpred
