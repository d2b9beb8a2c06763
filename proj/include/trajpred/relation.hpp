// SPDX-License-Identifier: Apache-2.0
//
// Region-based relation learning.
//
// Stage 1: a convolutional autoencoder reconstructs density maps; each cell
// of its latent grid summarises the crowd inside one receptive-field patch.
// Stage 2: a shared recurrent cell runs along every latent cell's sequence
// (intra-regional dynamics), the hidden state of the cell the target agent
// occupies is picked at each observed step (agent-specific masking), and a
// second recurrent cell relates the picked sequence into one vector R_st.

#pragma once

#include "trajpred/dataset.hpp"
#include "trajpred/density.hpp"
#include "trajpred/nn/layers.hpp"

#include <span>
#include <utility>
#include <vector>

namespace trajpred {

struct AutoencoderSpec {
  int map_height = 80;
  int map_width = 80;
  std::vector<int> channels{16, 32, 32};  // one stride-2 block per entry
  /// Maps are multiplied by this before entering the network; the default
  /// turns a single default-bandwidth kernel peak into 1.
  double input_gain = 2.0 * M_PI * kDefaultSigmaMap * kDefaultSigmaMap;

  int total_stride() const { return 1 << channels.size(); }
  int latent_channels() const { return channels.back(); }
  int grid_height() const { return map_height / total_stride(); }
  int grid_width() const { return map_width / total_stride(); }
  void validate() const;
};

class Autoencoder {
 public:
  Autoencoder(const AutoencoderSpec& spec, nn::Rng& rng);
  Autoencoder(const AutoencoderSpec& spec, nn::Rng&& rng) : Autoencoder(spec, rng) {}

  /// [N, H*W] -> [N, c_f*h*w] (channel-major latent grid per row).
  nn::Var encode(const nn::Var& maps) const;
  /// [N, c_f*h*w] -> [N, H*W] in the same units as the encoder input.
  nn::Var decode(const nn::Var& latent) const;
  /// Mean squared reconstruction error measured on gained maps.
  nn::Var training_loss(const RowMat& maps) const;

  const AutoencoderSpec& spec() const { return spec_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

 private:
  AutoencoderSpec spec_;
  nn::ParameterSet params_;
  std::vector<nn::Conv2d> encoder_;
  std::vector<nn::Conv2d> decoder_;
  std::vector<std::pair<int, int>> decoder_input_hw_;
};

struct LatentGridSequence {
  RowMat f_s;  // [tau, c_f*h*w]
  int channels = 0;
  int height = 0;
  int width = 0;

  int steps() const { return static_cast<int>(f_s.rows()); }
  int cells() const { return height * width; }
  double at(int t, int c, int row, int col) const { return f_s(t, (c * height + row) * width + col); }
};

/// Frame-by-frame encoder pass with gradients disabled (the autoencoder is frozen).
LatentGridSequence encode_maps(const DensityMapSequence& maps, const Autoencoder& ae);
LatentGridSequence encode_maps(const RowMat& maps, const Autoencoder& ae);
RowMat decode_maps(const LatentGridSequence& f_s, const Autoencoder& ae);

/// Mean over all elements of the squared difference.
double reconstruction_loss(const RowMat& maps, const RowMat& reconstructed);

enum class CellKind { kLstm, kGru };

/// An LSTM or GRU cell behind one interface; a GRU ignores the cell state.
struct RecurrentCell {
  CellKind kind = CellKind::kLstm;
  nn::LstmCell lstm;
  nn::GruCell gru;

  RecurrentCell() = default;
  RecurrentCell(nn::ParameterSet& params, const std::string& name, CellKind kind, int input, int hidden,
                nn::Rng& rng);
  int hidden_size() const { return kind == CellKind::kLstm ? lstm.hidden_size : gru.hidden_size; }
  nn::LstmState zero_state(Eigen::Index batch) const;
  nn::LstmState step(const nn::Var& x, const nn::LstmState& s) const;
};

struct IntraRegionalDynamics {
  std::vector<nn::Var> steps;  // tau entries of [h*w, c_h]; row k is cell (k / w, k % w)
  int height = 0;
  int width = 0;

  RowMat at(int t) const { return steps[static_cast<std::size_t>(t)]->value; }
};

/// Runs the shared temporal cell independently along every latent cell.
IntraRegionalDynamics temporal_encode(const LatentGridSequence& f_s, const RecurrentCell& cell);

struct RegionPath {
  std::vector<std::pair<int, int>> cells;  // (row, col) per observed step
  bool clamped = false;                    // some position fell outside the grid
};

RegionPath agent_region_path(const RowMat& positions, const SceneGeometry& g, int grid_height, int grid_width);

/// [tau, c_h]: row t is the hidden state of the cell occupied at step t.
RowMat gather_masked(const IntraRegionalDynamics& h_st, const RegionPath& path);

/// [1, c_r] relation vector: final hidden state of the extractor run over the
/// masked sequence.
nn::Var mask_and_relate(const IntraRegionalDynamics& h_st, const RegionPath& path, const RecurrentCell& extractor);

struct RelationSpec {
  CellKind temporal_cell = CellKind::kLstm;
  int latent_channels = 32;
  int temporal_hidden = 64;  // c_h
  int relation_hidden = 64;  // c_r
};

/// Temporal encoder + relation extractor (the trainable part of the module).
class RelationModule {
 public:
  RelationModule() = default;
  RelationModule(nn::ParameterSet& params, const RelationSpec& spec, nn::Rng& rng);

  /// Batched relation vectors [B, c_r]. Only the cells a sample traverses are
  /// run through the temporal encoder, which equals the dense computation
  /// because cells never interact.
  nn::Var relate_batch(std::span<const LatentGridSequence* const> latents, std::span<const RegionPath> paths) const;

  const RecurrentCell& temporal() const { return temporal_; }
  const RecurrentCell& extractor() const { return extractor_; }
  const RelationSpec& spec() const { return spec_; }

 private:
  RelationSpec spec_;
  RecurrentCell temporal_;
  RecurrentCell extractor_;
};

}  // namespace trajpred
