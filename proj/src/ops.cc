// Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stitchfusion/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "autograd_internal.h"

namespace stitchfusion {

using detail::grad_sink;
using detail::make_result;
using detail::Node;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void require_rate(double p, const char* op) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument(std::string(op) + ": rate must lie in [0, 1), got " +
                                std::to_string(p));
  }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " * " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const double* g = self.grad.data();
    const Node& na = *self.parents[0];
    const Node& nb = *self.parents[1];
    if (auto* ga = grad_sink(self, 0)) {
      // ga[i,p] += sum_j g[i,j] * b[p,j]
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = nb.data.data() + p * n;
          const double* grow = g + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = grad_sink(self, 1)) {
      // gb[p,j] += sum_i a[i,p] * g[i,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = na.data.data() + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p];
          double* gbrow = gb->data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto in = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_result({c, r}, std::move(out), {&a}, [r, c](Node& self) {
    if (auto* ga = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {&a}, [](Node& self) {
    if (auto* ga = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = grad_sink(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& xa = self.parents[0]->data;
    const auto& xb = self.parents[1]->data;
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * xb[i];
    }
    if (auto* g = grad_sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * xa[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result(a.shape(), std::move(out), {&a}, [factor](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + value;
  return make_result(a.shape(), std::move(out), {&a}, [](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const std::size_t d = bias.dim(0);
  if (x.shape().back() != d) {
    throw DimensionError("add_bias: last extent of " + shape_to_string(x.shape()) +
                         " does not match bias " + shape_to_string(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  auto in = x.data();
  auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = in[r * d + j] + b[j];
  return make_result(x.shape(), std::move(out), {&x, &bias}, [rows, d](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_sink(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*g)[j] += self.grad[r * d + j];
    }
  });
}

Tensor mean_of(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty list");
  if (xs.size() == 1) return xs.front();
  Tensor acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, 1.0 / static_cast<double>(xs.size()));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {&x}, [](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      const double up = self.grad[0];
      for (double& v : *g) v += up;
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(gamma, 1, "layer_norm");
  require_rank(beta, 1, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gamma.dim(0) != d || beta.dim(0) != d) {
    throw DimensionError("layer_norm: feature extent of " + shape_to_string(x.shape()) +
                         " does not match gamma " + shape_to_string(gamma.shape()) +
                         " / beta " + shape_to_string(beta.shape()));
  }
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  auto in = x.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gm[j] + bt[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& gm = self.parents[1]->data;
        const double* g = self.grad.data();
        if (auto* gx = grad_sink(self, 0)) {
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_g = 0.0, mean_gh = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double gj = g[r * d + j] * gm[j];
              mean_g += gj;
              mean_gh += gj * xhat[r * d + j];
            }
            mean_g *= inv_d;
            mean_gh *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double gj = g[r * d + j] * gm[j];
              (*gx)[r * d + j] += rstd[r] * (gj - mean_g - xhat[r * d + j] * mean_gh);
            }
          }
        }
        if (auto* gg = grad_sink(self, 1)) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (auto* gb = grad_sink(self, 2)) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += g[r * d + j];
        }
      });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[r * n + j] = std::exp(row[j] - mx);
      z += out[r * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= z;
  }
  return make_result(x.shape(), std::move(out), {&x}, [rows, n](Node& self) {
    if (auto* gx = grad_sink(self, 0)) {
      const auto& y = self.data;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[r * n + j] * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j)
          (*gx)[r * n + j] += y[r * n + j] * (self.grad[r * n + j] - dot);
      }
    }
  });
}

constexpr double kInvSqrt2 = 0.7071067811865476;

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in[i];
    out[i] = v * 0.5 * std::erfc(-v * kInvSqrt2);
  }
  return make_result(x.shape(), std::move(out), {&x}, [](Node& self) {
    if (auto* gx = grad_sink(self, 0)) {
      const auto& xs = self.parents[0]->data;
      constexpr double kInvSqrt2Pi = 0.3989422804014327;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = xs[i];
        const double cdf = 0.5 * std::erfc(-v * kInvSqrt2);
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        (*gx)[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

namespace {

Tensor apply_mask(const Tensor& x, std::vector<double> mask) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return make_result(x.shape(), std::move(out), {&x}, [mask = std::move(mask)](Node& self) {
    if (auto* gx = grad_sink(self, 0)) {
      for (std::size_t i = 0; i < mask.size(); ++i) (*gx)[i] += self.grad[i] * mask[i];
    }
  });
}

Rng& require_rng(const ForwardContext& ctx, const char* op) {
  if (ctx.rng == nullptr) throw std::logic_error(std::string(op) + ": train mode needs an rng");
  return *ctx.rng;
}

}  // namespace

Tensor dropout(const Tensor& x, double p, const ForwardContext& ctx) {
  require_rate(p, "dropout");
  if (!ctx.training() || p == 0.0) return x;
  Rng& rng = require_rng(ctx, "dropout");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return apply_mask(x, std::move(mask));
}

Tensor drop_path(const Tensor& x, double p, const ForwardContext& ctx) {
  require_rate(p, "drop_path");
  if (!ctx.training() || p == 0.0) return x;
  Rng& rng = require_rng(ctx, "drop_path");
  const double keep_scale = 1.0 / (1.0 - p);
  const std::size_t batch = x.dim(0);
  const std::size_t per_row = x.numel() / batch;
  std::vector<double> mask(x.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    const double m = rng.uniform() < p ? 0.0 : keep_scale;
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(b * per_row), per_row, m);
  }
  return apply_mask(x, std::move(mask));
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty list");
  const std::size_t rows = xs.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    require_rank(t, 2, "concat_cols");
    if (t.dim(0) != rows) {
      throw DimensionError("concat_cols: row count mismatch " + shape_to_string(xs.front().shape()) +
                           " vs " + shape_to_string(t.shape()));
    }
    widths.push_back(t.dim(1));
    total += t.dim(1);
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto in = xs[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(in.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    offset += widths[k];
  }
  return make_result({rows, total}, std::move(out), xs, [rows, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (auto* g = grad_sink(self, k)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j)
            (*g)[r * widths[k] + j] += self.grad[r * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || start + count > cols) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(rows * count);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(in.data() + r * cols + start, count, out.data() + r * count);
  return make_result({rows, count}, std::move(out), {&x}, [rows, cols, start, count](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < count; ++j) (*g)[r * cols + start + j] += self.grad[r * count + j];
    }
  });
}

std::size_t patch_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                                std::size_t pad) {
  if (extent + 2 * pad < kernel) {
    throw DimensionError("patch extraction: kernel " + std::to_string(kernel) +
                         " larger than padded extent " + std::to_string(extent + 2 * pad));
  }
  return (extent + 2 * pad - kernel) / stride + 1;
}

Tensor extract_patches(const Tensor& x, std::size_t height, std::size_t width, std::size_t kernel,
                       std::size_t stride, std::size_t pad) {
  require_rank(x, 2, "extract_patches");
  if (x.dim(0) != height * width) {
    throw DimensionError("extract_patches: " + shape_to_string(x.shape()) + " is not a " +
                         std::to_string(height) + "x" + std::to_string(width) + " token grid");
  }
  if (kernel == 0 || stride == 0) throw DimensionError("extract_patches: kernel and stride must be positive");
  const std::size_t c = x.dim(1);
  const std::size_t oh = patch_output_extent(height, kernel, stride, pad);
  const std::size_t ow = patch_output_extent(width, kernel, stride, pad);
  const std::size_t cols = kernel * kernel * c;
  // Source token index per (output row, kernel slot); -1 marks padding.
  std::vector<std::ptrdiff_t> src(oh * ow * kernel * kernel, -1);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(height) ||
              ix >= static_cast<std::ptrdiff_t>(width))
            continue;
          src[((oy * ow + ox) * kernel + ky) * kernel + kx] =
              iy * static_cast<std::ptrdiff_t>(width) + ix;
        }
      }
    }
  }
  std::vector<double> out(oh * ow * cols, 0.0);
  auto in = x.data();
  const std::size_t slots = kernel * kernel;
  for (std::size_t o = 0; o < oh * ow; ++o) {
    for (std::size_t s = 0; s < slots; ++s) {
      const std::ptrdiff_t t = src[o * slots + s];
      if (t < 0) continue;
      std::copy_n(in.data() + static_cast<std::size_t>(t) * c, c, out.data() + o * cols + s * c);
    }
  }
  return make_result({oh * ow, cols}, std::move(out), {&x},
                     [src = std::move(src), slots, c, cols](Node& self) {
                       if (auto* g = grad_sink(self, 0)) {
                         const std::size_t outputs = src.size() / slots;
                         for (std::size_t o = 0; o < outputs; ++o) {
                           for (std::size_t s = 0; s < slots; ++s) {
                             const std::ptrdiff_t t = src[o * slots + s];
                             if (t < 0) continue;
                             double* dst = g->data() + static_cast<std::size_t>(t) * c;
                             const double* gs = self.grad.data() + o * cols + s * c;
                             for (std::size_t k = 0; k < c; ++k) dst[k] += gs[k];
                           }
                         }
                       }
                     });
}

namespace {

struct Interp {
  std::size_t lo, hi;
  double w_hi;
};

std::vector<Interp> interp_table(std::size_t in, std::size_t out) {
  std::vector<Interp> table(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double srcpos = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (srcpos < 0.0) srcpos = 0.0;
    auto lo = static_cast<std::size_t>(srcpos);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    table[o] = {lo, hi, srcpos - static_cast<double>(lo)};
  }
  return table;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "upsample_bilinear");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h < h || out_w < w) {
    throw DimensionError("upsample_bilinear: cannot downscale " + shape_to_string(x.shape()) +
                         " to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == h && out_w == w) return x;
  auto ty = interp_table(h, out_h);
  auto tx = interp_table(w, out_w);
  std::vector<double> out(c * out_h * out_w);
  auto in = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = in.data() + ch * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Interp& iy = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Interp& ix = tx[ox];
        const double top = plane[iy.lo * w + ix.lo] * (1.0 - ix.w_hi) + plane[iy.lo * w + ix.hi] * ix.w_hi;
        const double bot = plane[iy.hi * w + ix.lo] * (1.0 - ix.w_hi) + plane[iy.hi * w + ix.hi] * ix.w_hi;
        out[(ch * out_h + oy) * out_w + ox] = top * (1.0 - iy.w_hi) + bot * iy.w_hi;
      }
    }
  }
  return make_result({c, out_h, out_w}, std::move(out), {&x},
                     [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node& self) {
                       if (auto* g = grad_sink(self, 0)) {
                         for (std::size_t ch = 0; ch < c; ++ch) {
                           double* plane = g->data() + ch * h * w;
                           for (std::size_t oy = 0; oy < out_h; ++oy) {
                             const Interp& iy = ty[oy];
                             for (std::size_t ox = 0; ox < out_w; ++ox) {
                               const Interp& ix = tx[ox];
                               const double up = self.grad[(ch * out_h + oy) * out_w + ox];
                               const double top = up * (1.0 - iy.w_hi);
                               const double bot = up * iy.w_hi;
                               plane[iy.lo * w + ix.lo] += top * (1.0 - ix.w_hi);
                               plane[iy.lo * w + ix.hi] += top * ix.w_hi;
                               plane[iy.hi * w + ix.lo] += bot * (1.0 - ix.w_hi);
                               plane[iy.hi * w + ix.hi] += bot * ix.w_hi;
                             }
                           }
                         }
                       }
                     });
}

}  // namespace stitchfusion
