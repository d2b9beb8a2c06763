// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations on Var. Shapes are checked eagerly and a
// std::invalid_argument is thrown on mismatch.

#pragma once

#include "trajpred/nn/autograd.hpp"

#include <vector>

namespace trajpred::nn {

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a [n, m] + bias [1, m] broadcast over rows.
Var add_row(const Var& a, const Var& bias);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// 1 - a, used by gated recurrences.
Var one_minus(const Var& a);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var elu(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
/// Clamps values into [lo, hi]; gradient is zero where clamped.
Var clamp(const Var& a, double lo, double hi);

/// Sum over columns: [n, m] -> [n, 1].
Var row_sum(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// out[i] = a[index[i]]; indices may repeat (gradients are scatter-added).
Var gather_rows(const Var& a, const std::vector<int>& index);
/// Each row repeated `times` consecutively: [n, m] -> [n * times, m].
Var repeat_rows(const Var& a, int times);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

struct ConvShape {
  int in_channels = 1;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  int out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
};

/// 2-D convolution. x: [N, Cin*H*W]; weight: [Cout, Cin*k*k]; bias: [1, Cout].
/// Output: [N, Cout*Ho*Wo].
Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvShape& shape);

/// Nearest-neighbour 2x upsampling of [N, C*H*W] -> [N, C*2H*2W].
Var upsample2x(const Var& x, int channels, int height, int width);

}  // namespace trajpred::nn
