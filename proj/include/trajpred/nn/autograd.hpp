// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value in the graph is a 2-D matrix; image-like tensors
// are stored one sample per row in channel-major (C, H, W) order.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace trajpred::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }

  Mat& grad_buffer() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    return grad;
  }
  void zero_grad() { grad.resize(0, 0); }
};

/// Leaf that never receives gradients.
Var constant(Mat value);
/// Leaf that accumulates gradients.
Var parameter(Mat value);

/// Creates an interior node. Parents and the backward closure are only kept
/// when gradient recording is enabled and some parent requires a gradient.
Var make_node(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Runs back-propagation from a 1x1 root, accumulating into leaf grads.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording for its lifetime (inference, frozen encoders).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace trajpred::nn
