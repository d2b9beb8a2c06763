// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajpred/nn/autograd.hpp"
#include "trajpred/nn/ops.hpp"

#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trajpred::nn {

using Rng = std::mt19937_64;

/// Named, ordered collection of learnable tensors. Layers keep shared
/// handles into the set, so loading values in place updates every user.
class ParameterSet {
 public:
  Var add(const std::string& name, Mat init);
  const Var& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<Var> vars() const;
  std::size_t scalar_count() const;
  void zero_grad();

  /// Bitwise copy of every value; used by tests that assert freezing.
  std::vector<Mat> snapshot() const;

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, Rng& rng);

struct Linear {
  Var weight;  // [in, out]
  Var bias;    // [1, out]
  int in_features = 0;
  int out_features = 0;

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, int in, int out, Rng& rng);
  Var operator()(const Var& x) const;
};

/// Two linear layers with a tanh in between.
struct Mlp2 {
  Linear hidden;
  Linear output;

  Mlp2() = default;
  Mlp2(ParameterSet& params, const std::string& name, int in, int width, int out, Rng& rng);
  Var operator()(const Var& x) const;
};

struct GruCell {
  Var w_ih, w_hh, b_ih, b_hh;  // gates ordered (reset, update, candidate)
  int input_size = 0;
  int hidden_size = 0;

  GruCell() = default;
  GruCell(ParameterSet& params, const std::string& name, int input, int hidden, Rng& rng);
  Var step(const Var& x, const Var& h) const;
};

struct LstmState {
  Var h;
  Var c;
};

struct LstmCell {
  Var w_ih, w_hh, bias;  // gates ordered (input, forget, cell, output)
  int input_size = 0;
  int hidden_size = 0;

  LstmCell() = default;
  LstmCell(ParameterSet& params, const std::string& name, int input, int hidden, Rng& rng);
  LstmState step(const Var& x, const LstmState& state) const;
  LstmState zero_state(Eigen::Index batch) const;
};

struct Conv2d {
  Var weight;  // [Cout, Cin*k*k]
  Var bias;    // [1, Cout]
  ConvShape shape;

  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, const ConvShape& shape, Rng& rng);
  Var operator()(const Var& x) const;
};

}  // namespace trajpred::nn
