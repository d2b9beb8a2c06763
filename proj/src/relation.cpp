// SPDX-License-Identifier: Apache-2.0

#include "trajpred/relation.hpp"

#include "trajpred/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace trajpred {

using nn::Var;

void AutoencoderSpec::validate() const {
  if (channels.empty()) throw ConfigError("autoencoder needs at least one block");
  for (int c : channels) {
    if (c < 1) throw ConfigError("autoencoder channel counts must be positive");
  }
  if (map_height % total_stride() != 0 || map_width % total_stride() != 0) {
    throw ConfigError("map size " + std::to_string(map_height) + "x" + std::to_string(map_width) +
                      " is not divisible by the encoder stride " + std::to_string(total_stride()));
  }
  if (!(input_gain > 0.0)) throw ConfigError("autoencoder input gain must be positive");
}

Autoencoder::Autoencoder(const AutoencoderSpec& spec, nn::Rng& rng) : spec_(spec) {
  spec_.validate();
  int h = spec_.map_height, w = spec_.map_width, c = 1;
  for (std::size_t i = 0; i < spec_.channels.size(); ++i) {
    nn::ConvShape s{c, h, w, spec_.channels[i], 3, 2, 1};
    encoder_.emplace_back(params_, "ae.enc" + std::to_string(i), s, rng);
    h /= 2;
    w /= 2;
    c = spec_.channels[i];
  }
  for (std::size_t j = spec_.channels.size(); j-- > 0;) {
    const int out_c = j == 0 ? 1 : spec_.channels[j - 1];
    decoder_input_hw_.emplace_back(h, w);
    h *= 2;
    w *= 2;
    nn::ConvShape s{c, h, w, out_c, 3, 1, 1};
    decoder_.emplace_back(params_, "ae.dec" + std::to_string(spec_.channels.size() - 1 - j), s, rng);
    c = out_c;
  }
}

Var Autoencoder::encode(const Var& maps) const {
  const Eigen::Index expected = static_cast<Eigen::Index>(spec_.map_height) * spec_.map_width;
  if (maps->cols() != expected) {
    throw ContractError("encode: maps have " + std::to_string(maps->cols()) + " pixels, autoencoder expects " +
                        std::to_string(expected));
  }
  Var x = nn::scale(maps, spec_.input_gain);
  for (const auto& conv : encoder_) x = nn::elu(conv(x));
  return x;
}

Var Autoencoder::decode(const Var& latent) const {
  const Eigen::Index expected =
      static_cast<Eigen::Index>(spec_.latent_channels()) * spec_.grid_height() * spec_.grid_width();
  if (latent->cols() != expected) {
    throw ContractError("decode: latent has " + std::to_string(latent->cols()) + " values, expected " +
                        std::to_string(expected));
  }
  Var x = latent;
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto [h, w] = decoder_input_hw_[i];
    x = decoder_[i](nn::upsample2x(x, decoder_[i].shape.in_channels, h, w));
    if (i + 1 < decoder_.size()) x = nn::elu(x);
  }
  return nn::scale(x, 1.0 / spec_.input_gain);
}

Var Autoencoder::training_loss(const RowMat& maps) const {
  Var m = nn::constant(maps);
  Var diff = nn::sub(decode(encode(m)), m);
  return nn::scale(nn::mean(nn::square(diff)), spec_.input_gain * spec_.input_gain);
}

LatentGridSequence encode_maps(const RowMat& maps, const Autoencoder& ae) {
  nn::NoGradGuard guard;
  const auto& s = ae.spec();
  LatentGridSequence out;
  out.f_s = ae.encode(nn::constant(maps))->value;
  out.channels = s.latent_channels();
  out.height = s.grid_height();
  out.width = s.grid_width();
  return out;
}

LatentGridSequence encode_maps(const DensityMapSequence& maps, const Autoencoder& ae) {
  if (maps.geometry.height != ae.spec().map_height || maps.geometry.width != ae.spec().map_width) {
    throw ContractError("encode_maps: map geometry does not match the autoencoder input size");
  }
  return encode_maps(maps.maps, ae);
}

RowMat decode_maps(const LatentGridSequence& f_s, const Autoencoder& ae) {
  const auto& s = ae.spec();
  if (f_s.channels != s.latent_channels() || f_s.height != s.grid_height() || f_s.width != s.grid_width()) {
    throw ContractError("decode_maps: latent grid shape does not match the autoencoder");
  }
  nn::NoGradGuard guard;
  return ae.decode(nn::constant(f_s.f_s))->value;
}

double reconstruction_loss(const RowMat& maps, const RowMat& reconstructed) {
  if (maps.rows() != reconstructed.rows() || maps.cols() != reconstructed.cols()) {
    throw ContractError("reconstruction_loss: shape mismatch");
  }
  if (maps.size() == 0) return 0.0;
  return (maps - reconstructed).squaredNorm() / static_cast<double>(maps.size());
}

RecurrentCell::RecurrentCell(nn::ParameterSet& params, const std::string& name, CellKind k, int input, int hidden,
                             nn::Rng& rng)
    : kind(k) {
  if (kind == CellKind::kLstm) lstm = nn::LstmCell(params, name, input, hidden, rng);
  else gru = nn::GruCell(params, name, input, hidden, rng);
}

nn::LstmState RecurrentCell::zero_state(Eigen::Index batch) const {
  if (kind == CellKind::kLstm) return lstm.zero_state(batch);
  return {nn::constant(RowMat::Zero(batch, gru.hidden_size)), nullptr};
}

nn::LstmState RecurrentCell::step(const Var& x, const nn::LstmState& s) const {
  if (kind == CellKind::kLstm) return lstm.step(x, s);
  return {gru.step(x, s.h), nullptr};
}

namespace {

// [cells.size(), c_f] feature rows of step t for the given flat cell indices.
RowMat cell_features(const LatentGridSequence& f_s, int t, std::span<const int> cells) {
  RowMat out(static_cast<Eigen::Index>(cells.size()), f_s.channels);
  const int hw = f_s.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (int c = 0; c < f_s.channels; ++c) out(static_cast<Eigen::Index>(i), c) = f_s.f_s(t, c * hw + cells[i]);
  }
  return out;
}

}  // namespace

IntraRegionalDynamics temporal_encode(const LatentGridSequence& f_s, const RecurrentCell& cell) {
  IntraRegionalDynamics out;
  out.height = f_s.height;
  out.width = f_s.width;
  std::vector<int> all(static_cast<std::size_t>(f_s.cells()));
  for (int k = 0; k < f_s.cells(); ++k) all[static_cast<std::size_t>(k)] = k;
  nn::LstmState s = cell.zero_state(f_s.cells());
  for (int t = 0; t < f_s.steps(); ++t) {
    s = cell.step(nn::constant(cell_features(f_s, t, all)), s);
    out.steps.push_back(s.h);
  }
  return out;
}

RegionPath agent_region_path(const RowMat& positions, const SceneGeometry& g, int grid_height, int grid_width) {
  if (positions.cols() < 2) throw ContractError("agent_region_path: positions need x, y columns");
  if (grid_height < 1 || grid_width < 1) throw ContractError("agent_region_path: empty grid");
  RegionPath path;
  const double cell_h = static_cast<double>(g.height) / grid_height;
  const double cell_w = static_cast<double>(g.width) / grid_width;
  for (Eigen::Index t = 0; t < positions.rows(); ++t) {
    const MapCoord m = world_to_map(Point(positions(t, 0), positions(t, 1)), g);
    int r = static_cast<int>(std::floor(m.row / cell_h));
    int c = static_cast<int>(std::floor(m.col / cell_w));
    const int rc = std::clamp(r, 0, grid_height - 1);
    const int cc = std::clamp(c, 0, grid_width - 1);
    path.clamped = path.clamped || !m.in_bounds || rc != r || cc != c;
    path.cells.emplace_back(rc, cc);
  }
  return path;
}

namespace {

void check_path(const IntraRegionalDynamics& h_st, const RegionPath& path) {
  if (path.cells.size() != h_st.steps.size()) {
    throw ContractError("mask_and_relate: path length " + std::to_string(path.cells.size()) +
                        " does not match the " + std::to_string(h_st.steps.size()) + " encoded steps");
  }
  for (const auto& [r, c] : path.cells) {
    if (r < 0 || r >= h_st.height || c < 0 || c >= h_st.width) {
      throw ContractError("mask_and_relate: path cell outside the latent grid");
    }
  }
}

}  // namespace

RowMat gather_masked(const IntraRegionalDynamics& h_st, const RegionPath& path) {
  check_path(h_st, path);
  const Eigen::Index ch = h_st.steps.empty() ? 0 : h_st.steps.front()->cols();
  RowMat out(static_cast<Eigen::Index>(path.cells.size()), ch);
  for (std::size_t t = 0; t < path.cells.size(); ++t) {
    const auto [r, c] = path.cells[t];
    out.row(static_cast<Eigen::Index>(t)) = h_st.steps[t]->value.row(r * h_st.width + c);
  }
  return out;
}

Var mask_and_relate(const IntraRegionalDynamics& h_st, const RegionPath& path, const RecurrentCell& extractor) {
  check_path(h_st, path);
  nn::LstmState s = extractor.zero_state(1);
  for (std::size_t t = 0; t < path.cells.size(); ++t) {
    const auto [r, c] = path.cells[t];
    s = extractor.step(nn::gather_rows(h_st.steps[t], {r * h_st.width + c}), s);
  }
  return s.h;
}

RelationModule::RelationModule(nn::ParameterSet& params, const RelationSpec& spec, nn::Rng& rng) : spec_(spec) {
  temporal_ = RecurrentCell(params, "relation.temporal", spec.temporal_cell, spec.latent_channels,
                            spec.temporal_hidden, rng);
  extractor_ = RecurrentCell(params, "relation.extractor", spec.temporal_cell, spec.temporal_hidden,
                             spec.relation_hidden, rng);
}

Var RelationModule::relate_batch(std::span<const LatentGridSequence* const> latents,
                                 std::span<const RegionPath> paths) const {
  if (latents.size() != paths.size() || latents.empty()) {
    throw ContractError("relate_batch: need one path per latent sequence");
  }
  const int steps = latents.front()->steps();
  // Row bookkeeping: each (sample, traversed cell) pair becomes one row of the
  // temporal encoder batch.
  std::vector<std::vector<int>> sample_cells(latents.size());
  std::vector<std::vector<int>> step_rows(static_cast<std::size_t>(steps));
  int total_rows = 0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const LatentGridSequence& f = *latents[i];
    if (f.steps() != steps || f.channels != spec_.latent_channels) {
      throw ContractError("relate_batch: latent sequence shape mismatch");
    }
    if (static_cast<int>(paths[i].cells.size()) != steps) throw ContractError("relate_batch: path length mismatch");
    std::vector<int>& cells = sample_cells[i];
    for (int t = 0; t < steps; ++t) {
      const auto [r, c] = paths[i].cells[static_cast<std::size_t>(t)];
      if (r < 0 || r >= f.height || c < 0 || c >= f.width) throw ContractError("relate_batch: cell out of grid");
      const int k = r * f.width + c;
      auto it = std::find(cells.begin(), cells.end(), k);
      const int local = static_cast<int>(it - cells.begin());
      if (it == cells.end()) cells.push_back(k);
      step_rows[static_cast<std::size_t>(t)].push_back(total_rows + local);
    }
    total_rows += static_cast<int>(cells.size());
  }

  nn::LstmState s = temporal_.zero_state(total_rows);
  nn::LstmState rel = extractor_.zero_state(static_cast<Eigen::Index>(latents.size()));
  RowMat input(total_rows, spec_.latent_channels);
  for (int t = 0; t < steps; ++t) {
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      const RowMat feats = cell_features(*latents[i], t, sample_cells[i]);
      input.middleRows(row, feats.rows()) = feats;
      row += feats.rows();
    }
    s = temporal_.step(nn::constant(input), s);
    rel = extractor_.step(nn::gather_rows(s.h, step_rows[static_cast<std::size_t>(t)]), rel);
  }
  return rel.h;
}

}  // namespace trajpred
