// SPDX-License-Identifier: Apache-2.0
//
// Flat run configuration. Every key has a type and a default; values are
// resolved as default < config file < environment < --set overrides, and
// unknown keys are rejected.

#pragma once

#include "trajpred/evaluation.hpp"
#include "trajpred/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace trajpred {

enum class FieldType { kInt, kFloat, kBool, kString, kStringList, kIntList };

struct ConfigField {
  std::string key;
  FieldType type;
  nlohmann::json default_value;
  std::vector<std::string> choices;  // allowed values for strings
  std::string help;
};

const std::vector<ConfigField>& config_schema();

/// Environment variable that overrides cache_dir.
inline constexpr const char* kCacheDirEnv = "TRAJPRED_CACHE_DIR";

class RunConfig {
 public:
  RunConfig();

  /// Defaults, then the optional file, then the environment, then overrides.
  static RunConfig resolve(const std::filesystem::path& file, const std::vector<std::string>& overrides);

  void merge(const nlohmann::json& values, const std::string& source);
  void merge_file(const std::filesystem::path& file);
  /// "key=value"; the value is read as JSON when it parses, else as a string.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const nlohmann::json& value, const std::string& source = "code");

  const nlohmann::json& values() const { return values_; }
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  /// CRC-32 of the canonical JSON dump, 8 hex digits.
  std::string fingerprint() const;

  ModelSpec model_spec() const;
  TrainConfig train_config() const;
  AeTrainOptions ae_options() const;
  EvalConfig eval_config() const;
  WindowOptions window_options() const;
  ParseOptions parse_options() const;

  /// Cross-field checks; throws ConfigError.
  void validate() const;

 private:
  nlohmann::json values_;
};

/// Text listing every key with its type, default and help.
std::string describe_schema();

}  // namespace trajpred
