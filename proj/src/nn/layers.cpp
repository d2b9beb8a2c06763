// SPDX-License-Identifier: Apache-2.0

#include "trajpred/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace trajpred::nn {

Var ParameterSet::add(const std::string& name, Mat init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Var v = parameter(std::move(init));
  entries_.emplace_back(name, v);
  return v;
}

const Var& ParameterSet::at(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::vector<Var> ParameterSet::vars() const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second->zero_grad();
}

std::vector<Mat> ParameterSet::snapshot() const {
  std::vector<Mat> out;
  for (const auto& e : entries_) out.push_back(e.second->value);
  return out;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(std::max(fan_in, 1.0));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(ParameterSet& params, const std::string& name, int in, int out, Rng& rng)
    : in_features(in), out_features(out) {
  weight = params.add(name + ".weight", uniform_init(in, out, in, rng));
  bias = params.add(name + ".bias", uniform_init(1, out, in, rng));
}

Var Linear::operator()(const Var& x) const { return add_row(matmul(x, weight), bias); }

Mlp2::Mlp2(ParameterSet& params, const std::string& name, int in, int width, int out, Rng& rng)
    : hidden(params, name + ".0", in, width, rng), output(params, name + ".1", width, out, rng) {}

Var Mlp2::operator()(const Var& x) const { return output(tanh(hidden(x))); }

GruCell::GruCell(ParameterSet& params, const std::string& name, int input, int hidden, Rng& rng)
    : input_size(input), hidden_size(hidden) {
  w_ih = params.add(name + ".w_ih", uniform_init(input, 3 * hidden, hidden, rng));
  w_hh = params.add(name + ".w_hh", uniform_init(hidden, 3 * hidden, hidden, rng));
  b_ih = params.add(name + ".b_ih", uniform_init(1, 3 * hidden, hidden, rng));
  b_hh = params.add(name + ".b_hh", uniform_init(1, 3 * hidden, hidden, rng));
}

Var GruCell::step(const Var& x, const Var& h) const {
  const Eigen::Index H = hidden_size;
  Var gi = add_row(matmul(x, w_ih), b_ih);
  Var gh = add_row(matmul(h, w_hh), b_hh);
  Var r = sigmoid(add(slice_cols(gi, 0, H), slice_cols(gh, 0, H)));
  Var z = sigmoid(add(slice_cols(gi, H, H), slice_cols(gh, H, H)));
  Var n = tanh(add(slice_cols(gi, 2 * H, H), mul(r, slice_cols(gh, 2 * H, H))));
  // h' = (1 - z) * n + z * h
  return add(n, mul(z, sub(h, n)));
}

LstmCell::LstmCell(ParameterSet& params, const std::string& name, int input, int hidden, Rng& rng)
    : input_size(input), hidden_size(hidden) {
  w_ih = params.add(name + ".w_ih", uniform_init(input, 4 * hidden, hidden, rng));
  w_hh = params.add(name + ".w_hh", uniform_init(hidden, 4 * hidden, hidden, rng));
  bias = params.add(name + ".bias", uniform_init(1, 4 * hidden, hidden, rng));
}

LstmState LstmCell::step(const Var& x, const LstmState& s) const {
  const Eigen::Index H = hidden_size;
  Var gates = add_row(add(matmul(x, w_ih), matmul(s.h, w_hh)), bias);
  Var i = sigmoid(slice_cols(gates, 0, H));
  Var f = sigmoid(slice_cols(gates, H, H));
  Var g = tanh(slice_cols(gates, 2 * H, H));
  Var o = sigmoid(slice_cols(gates, 3 * H, H));
  Var c = add(mul(f, s.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

LstmState LstmCell::zero_state(Eigen::Index batch) const {
  return {constant(Mat::Zero(batch, hidden_size)), constant(Mat::Zero(batch, hidden_size))};
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, const ConvShape& s, Rng& rng) : shape(s) {
  const int fan_in = s.in_channels * s.kernel * s.kernel;
  weight = params.add(name + ".weight", uniform_init(s.out_channels, fan_in, fan_in, rng));
  bias = params.add(name + ".bias", uniform_init(1, s.out_channels, fan_in, rng));
}

Var Conv2d::operator()(const Var& x) const { return conv2d(x, weight, bias, shape); }

}  // namespace trajpred::nn
