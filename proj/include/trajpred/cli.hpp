// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end and the workflows behind each command.

#pragma once

#include "trajpred/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trajpred {

/// Exit codes: 0 success, 1 user or configuration error, 2 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SceneSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;  // empty: validation is carved from train
  std::vector<std::string> test;
};

SceneSplit resolve_split(const RunConfig& cfg);

/// Loads cached scenes into a sample set; latents are attached when an
/// autoencoder is given.
SampleSet load_sample_set(const std::filesystem::path& cache_dir, const std::vector<std::string>& scenes,
                          const Autoencoder* ae);

/// Splits every scene's windows into train and temporally-last validation parts.
std::pair<SampleSet, SampleSet> carve_sample_set(SampleSet set, double fraction);

}  // namespace trajpred
