// SPDX-License-Identifier: Apache-2.0

#include "trajpred/nn/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trajpred::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a->rows()) + "x" +
                                std::to_string(a->cols()) + " vs " + std::to_string(b->rows()) + "x" +
                                std::to_string(b->cols()));
  }
}

// Accumulates into parent i when it tracks gradients.
template <typename Expr>
void accumulate(Node& self, std::size_t i, const Expr& g) {
  Node& p = *self.parents[i];
  if (p.requires_grad) p.grad_buffer() += g;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch " + std::to_string(a->cols()) + " vs " +
                                std::to_string(b->rows()));
  }
  Mat out = a->value * b->value;
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Mat& av = self.parents[0]->value;
    const Mat& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer().noalias() += self.grad * bv.transpose();
    if (self.parents[1]->requires_grad) self.parents[1]->grad_buffer().noalias() += av.transpose() * self.grad;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_node(a->value + b->value, {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad);
    accumulate(self, 1, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_node(a->value - b->value, {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad);
    accumulate(self, 1, -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Mat out = a->value.cwiseProduct(b->value);
  return make_node(std::move(out), {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad.cwiseProduct(self.parents[1]->value));
    accumulate(self, 1, self.grad.cwiseProduct(self.parents[0]->value));
  });
}

Var add_row(const Var& a, const Var& bias) {
  require(bias->rows() == 1 && bias->cols() == a->cols(), "add_row: bias must be [1, cols]");
  Mat out = a->value.rowwise() + bias->value.row(0);
  return make_node(std::move(out), {a, bias}, [](Node& self) {
    accumulate(self, 0, self.grad);
    accumulate(self, 1, self.grad.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return make_node(a->value * s, {a}, [s](Node& self) { accumulate(self, 0, self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Mat out = a->value.array() + s;
  return make_node(std::move(out), {a}, [](Node& self) { accumulate(self, 0, self.grad); });
}

Var one_minus(const Var& a) {
  Mat out = 1.0 - a->value.array();
  return make_node(std::move(out), {a}, [](Node& self) { accumulate(self, 0, -self.grad); });
}

Var sigmoid(const Var& a) {
  Mat out = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  return make_node(std::move(out), {a}, [](Node& self) {
    const auto y = self.value.array();
    accumulate(self, 0, (self.grad.array() * y * (1.0 - y)).matrix());
  });
}

Var tanh(const Var& a) {
  Mat out = a->value.array().tanh().matrix();
  return make_node(std::move(out), {a}, [](Node& self) {
    const auto y = self.value.array();
    accumulate(self, 0, (self.grad.array() * (1.0 - y * y)).matrix());
  });
}

Var elu(const Var& a) {
  Mat out = a->value.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return make_node(std::move(out), {a}, [](Node& self) {
    const Mat& x = self.parents[0]->value;
    Mat d = x.binaryExpr(self.value, [](double xi, double yi) { return xi > 0.0 ? 1.0 : yi + 1.0; });
    accumulate(self, 0, self.grad.cwiseProduct(d));
  });
}

Var exp(const Var& a) {
  Mat out = a->value.array().exp().matrix();
  return make_node(std::move(out), {a}, [](Node& self) { accumulate(self, 0, self.grad.cwiseProduct(self.value)); });
}

Var square(const Var& a) {
  Mat out = a->value.array().square().matrix();
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(self, 0, (2.0 * self.grad.array() * self.parents[0]->value.array()).matrix());
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Mat out = a->value.cwiseMax(lo).cwiseMin(hi);
  return make_node(std::move(out), {a}, [lo, hi](Node& self) {
    const Mat& x = self.parents[0]->value;
    Mat mask = x.unaryExpr([lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
    accumulate(self, 0, self.grad.cwiseProduct(mask));
  });
}

Var row_sum(const Var& a) {
  Mat out = a->value.rowwise().sum();
  return make_node(std::move(out), {a}, [](Node& self) {
    const Eigen::Index cols = self.parents[0]->cols();
    accumulate(self, 0, self.grad.replicate(1, cols));
  });
}

Var sum(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a->value.sum();
  return make_node(std::move(out), {a}, [](Node& self) {
    const Node& p = *self.parents[0];
    accumulate(self, 0, Mat::Constant(p.rows(), p.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  require(a->value.size() > 0, "mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a->value.size()));
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = parts.front()->rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p->rows() == rows, "concat_cols: row mismatch");
    cols += p->cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p->cols()) = p->value;
    c += p->cols();
  }
  return make_node(std::move(out), parts, [](Node& self) {
    Eigen::Index c0 = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const Eigen::Index w = self.parents[i]->cols();
      accumulate(self, i, self.grad.middleCols(c0, w));
      c0 += w;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a->cols(), "slice_cols: out of range");
  Mat out = a->value.middleCols(start, count);
  return make_node(std::move(out), {a}, [start, count](Node& self) {
    Node& p = *self.parents[0];
    if (p.requires_grad) p.grad_buffer().middleCols(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, const std::vector<int>& index) {
  Mat out(static_cast<Eigen::Index>(index.size()), a->cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a->rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a->value.row(index[i]);
  }
  return make_node(std::move(out), {a}, [index](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat& g = p.grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var repeat_rows(const Var& a, int times) {
  require(times >= 1, "repeat_rows: times must be >= 1");
  Mat out(a->rows() * times, a->cols());
  for (Eigen::Index r = 0; r < a->rows(); ++r) {
    for (int k = 0; k < times; ++k) out.row(r * times + k) = a->value.row(r);
  }
  return make_node(std::move(out), {a}, [times](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat& g = p.grad_buffer();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (int k = 0; k < times; ++k) g.row(r) += self.grad.row(r * times + k);
    }
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a->value.size(), "reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(a->value.data(), rows, cols);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (p.requires_grad) p.grad_buffer() += Eigen::Map<const Mat>(self.grad.data(), p.rows(), p.cols());
  });
}

namespace {

// Unfolds one (C, H, W) sample into [C*k*k, Ho*Wo].
void im2col(const double* img, const ConvShape& s, Mat& cols) {
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  cols.setZero(static_cast<Eigen::Index>(s.in_channels) * k * k, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < s.in_channels; ++c) {
    const double* plane = img + static_cast<std::ptrdiff_t>(c) * s.in_height * s.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        double* dst = cols.row(row).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= s.in_height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix < 0 || ix >= s.in_width) continue;
            dst[oy * wo + ox] = plane[iy * s.in_width + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const Mat& cols, const ConvShape& s, double* img) {
  const int ho = s.out_height(), wo = s.out_width(), k = s.kernel;
  for (int c = 0; c < s.in_channels; ++c) {
    double* plane = img + static_cast<std::ptrdiff_t>(c) * s.in_height * s.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        const double* src = cols.row(row).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= s.in_height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix < 0 || ix >= s.in_width) continue;
            plane[iy * s.in_width + ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvShape& s) {
  const Eigen::Index in_size = static_cast<Eigen::Index>(s.in_channels) * s.in_height * s.in_width;
  const Eigen::Index patch = static_cast<Eigen::Index>(s.in_channels) * s.kernel * s.kernel;
  if (x->cols() != in_size) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(x->cols()) + " columns, expected " +
                                std::to_string(in_size));
  }
  require(weight->rows() == s.out_channels && weight->cols() == patch, "conv2d: weight shape mismatch");
  require(bias->rows() == 1 && bias->cols() == s.out_channels, "conv2d: bias shape mismatch");
  require(s.out_height() > 0 && s.out_width() > 0, "conv2d: empty output");

  const Eigen::Index spatial = static_cast<Eigen::Index>(s.out_height()) * s.out_width();
  Mat out(x->rows(), s.out_channels * spatial);
  Mat cols;
  for (Eigen::Index n = 0; n < x->rows(); ++n) {
    im2col(x->value.row(n).data(), s, cols);
    Eigen::Map<Mat> y(out.row(n).data(), s.out_channels, spatial);
    y.noalias() = weight->value * cols;
    y.colwise() += bias->value.row(0).transpose();
  }
  return make_node(std::move(out), {x, weight, bias}, [s, spatial](Node& self) {
    Node& xin = *self.parents[0];
    Node& w = *self.parents[1];
    Node& b = *self.parents[2];
    Mat cols;
    Mat dcols;
    for (Eigen::Index n = 0; n < xin.rows(); ++n) {
      Eigen::Map<const Mat> gy(self.grad.row(n).data(), s.out_channels, spatial);
      if (b.requires_grad) b.grad_buffer().row(0) += gy.rowwise().sum().transpose();
      if (w.requires_grad) {
        im2col(xin.value.row(n).data(), s, cols);
        w.grad_buffer().noalias() += gy * cols.transpose();
      }
      if (xin.requires_grad) {
        dcols.noalias() = w.value.transpose() * gy;
        col2im_add(dcols, s, xin.grad_buffer().row(n).data());
      }
    }
  });
}

Var upsample2x(const Var& x, int channels, int height, int width) {
  const Eigen::Index in_size = static_cast<Eigen::Index>(channels) * height * width;
  require(x->cols() == in_size, "upsample2x: input size mismatch");
  const int h2 = 2 * height, w2 = 2 * width;
  Mat out(x->rows(), static_cast<Eigen::Index>(channels) * h2 * w2);
  for (Eigen::Index n = 0; n < x->rows(); ++n) {
    const double* src = x->value.row(n).data();
    double* dst = out.row(n).data();
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < h2; ++y) {
        for (int xx = 0; xx < w2; ++xx) {
          dst[(c * h2 + y) * w2 + xx] = src[(c * height + y / 2) * width + xx / 2];
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [channels, height, width](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const int h2 = 2 * height, w2 = 2 * width;
    Mat& g = p.grad_buffer();
    for (Eigen::Index n = 0; n < p.rows(); ++n) {
      const double* src = self.grad.row(n).data();
      double* dst = g.row(n).data();
      for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < h2; ++y) {
          for (int xx = 0; xx < w2; ++xx) {
            dst[(c * height + y / 2) * width + xx / 2] += src[(c * h2 + y) * w2 + xx];
          }
        }
      }
    }
  });
}

}  // namespace trajpred::nn
