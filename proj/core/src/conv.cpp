/*
 * Copyright 2026 The Aures Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Grouped 2-D cross-correlation over [N,C,T,F] tensors via im2col and GEMM.
//
// For each group the patches of all examples are unrolled into one
// (C/g*kT*kF) x (N*T'*F') column matrix so a single GEMM covers the batch;
// backward recomputes the columns instead of keeping them alive on the tape.

#include <algorithm>
#include <cstddef>
#include <string>

#include "aures/ops.hpp"
#include "gemm.hpp"
#include "op_support.hpp"

namespace aures {

using internal::gemm;
using internal::grad_of;
using internal::make_result;
using internal::on_backward;
using internal::should_track;

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw ConfigError("conv: stride must be positive");
  if (kernel == 0) throw ConfigError("conv: kernel extent must be positive");
  const std::size_t padded = input + 2 * pad;
  if (padded < kernel) {
    throw ConfigError("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                      std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t n, c, t, f;          // input
  std::size_t o, kt, kf;           // kernel
  std::size_t ot, of;              // output
  std::size_t groups, c_per_group, o_per_group;
  std::size_t st, sf, pt, pf;

  std::size_t patch() const { return c_per_group * kt * kf; }
  std::size_t out_area() const { return ot * of; }
  std::size_t columns() const { return n * ot * of; }
  bool pointwise() const {
    return kt == 1 && kf == 1 && st == 1 && sf == 1 && pt == 0 && pf == 0;
  }
};

// Output columns [lo, hi) whose input column of*sf + kf - pf lies in [0, f).
inline void column_range(const ConvGeometry& g, std::size_t kf, std::size_t& lo, std::size_t& hi) {
  lo = kf >= g.pf ? 0 : (g.pf - kf + g.sf - 1) / g.sf;
  const std::size_t limit = g.f + g.pf;  // exclusive bound on of*sf + kf
  hi = kf >= limit ? 0 : std::min(g.of, (limit - kf + g.sf - 1) / g.sf);
  if (hi < lo) hi = lo;
}

// Visits every (patch row, example, output row) with the input offset of
// the first valid column, the column offset and the valid column count.
template <typename Visit>
void for_each_patch_row(const ConvGeometry& g, std::size_t group, Visit visit) {
  for (std::size_t icl = 0; icl < g.c_per_group; ++icl) {
    const std::size_t ic = group * g.c_per_group + icl;
    for (std::size_t kt = 0; kt < g.kt; ++kt) {
      for (std::size_t kf = 0; kf < g.kf; ++kf) {
        const std::size_t r = (icl * g.kt + kt) * g.kf + kf;
        std::size_t lo = 0;
        std::size_t hi = 0;
        column_range(g, kf, lo, hi);
        for (std::size_t ni = 0; ni < g.n; ++ni) {
          const std::size_t in_plane = (ni * g.c + ic) * g.t * g.f;
          for (std::size_t ot = 0; ot < g.ot; ++ot) {
            const std::size_t row = ot * g.st + kt;
            const std::size_t col = ni * g.out_area() + ot * g.of;
            if (row < g.pt || row - g.pt >= g.t || lo >= hi) {
              visit(r, col, std::size_t{0}, std::size_t{0}, std::size_t{0}, false);
              continue;
            }
            const std::size_t in_start = in_plane + (row - g.pt) * g.f + lo * g.sf + kf - g.pf;
            visit(r, col, in_start, lo, hi - lo, true);
          }
        }
      }
    }
  }
}

// cols[r, ni*A + ot*of + of] = x[ni, ic, ot*st + kt - pt, of*sf + kf - pf].
void im2col(const ConvGeometry& g, std::size_t group, const double* x, double* cols) {
  const std::size_t width = g.columns();
  for_each_patch_row(g, group, [&](std::size_t r, std::size_t col, std::size_t in_start,
                                   std::size_t lo, std::size_t count, bool valid) {
    double* dst = cols + r * width + col;
    std::fill(dst, dst + g.of, 0.0);
    if (!valid) return;
    const double* src = x + in_start;
    if (g.sf == 1) {
      std::copy(src, src + count, dst + lo);
    } else {
      for (std::size_t j = 0; j < count; ++j) dst[lo + j] = src[j * g.sf];
    }
  });
}

// Adjoint of im2col: scatters column gradients back onto the input.
void col2im(const ConvGeometry& g, std::size_t group, const double* cols, double* gx) {
  const std::size_t width = g.columns();
  for_each_patch_row(g, group, [&](std::size_t r, std::size_t col, std::size_t in_start,
                                   std::size_t lo, std::size_t count, bool valid) {
    if (!valid) return;
    const double* src = cols + r * width + col + lo;
    double* dst = gx + in_start;
    for (std::size_t j = 0; j < count; ++j) dst[j * g.sf] += src[j];
  });
}

// Between [N, O, A] tensor layout and the per-group [O/g, N*A] GEMM layout.
void gather_group(const ConvGeometry& g, std::size_t group, std::size_t channels,
                  std::size_t per_group, std::size_t area, const double* src, double* dst) {
  for (std::size_t k = 0; k < per_group; ++k) {
    for (std::size_t ni = 0; ni < g.n; ++ni) {
      const double* from = src + (ni * channels + group * per_group + k) * area;
      std::copy(from, from + area, dst + k * g.n * area + ni * area);
    }
  }
}

void scatter_group(const ConvGeometry& g, std::size_t group, std::size_t channels,
                   std::size_t per_group, std::size_t area, const double* src, double* dst) {
  for (std::size_t k = 0; k < per_group; ++k) {
    for (std::size_t ni = 0; ni < g.n; ++ni) {
      const double* from = src + k * g.n * area + ni * area;
      double* to = dst + (ni * channels + group * per_group + k) * area;
      for (std::size_t j = 0; j < area; ++j) to[j] += from[j];
    }
  }
}

void conv_forward(const ConvGeometry& g, const double* x, const double* w, double* out) {
  const std::size_t k = g.patch();
  const std::size_t width = g.columns();
  std::vector<double> cols(g.pointwise() ? 0 : k * width);
  std::vector<double> prod(g.o_per_group * width);
  for (std::size_t gi = 0; gi < g.groups; ++gi) {
    const double* b = nullptr;
    std::vector<double> gathered;
    if (g.pointwise()) {
      gathered.resize(k * width);
      gather_group(g, gi, g.c, g.c_per_group, g.t * g.f, x, gathered.data());
      b = gathered.data();
    } else {
      im2col(g, gi, x, cols.data());
      b = cols.data();
    }
    gemm(false, false, g.o_per_group, width, k, 1.0, w + gi * g.o_per_group * k, k, b, width, 0.0,
         prod.data(), width);
    scatter_group(g, gi, g.o, g.o_per_group, g.out_area(), prod.data(), out);
  }
}

void conv_backward(const ConvGeometry& g, const double* x, const double* w,
                   const std::vector<double>& gout, std::vector<double>* gx,
                   std::vector<double>* gw) {
  const std::size_t k = g.patch();
  const std::size_t width = g.columns();
  std::vector<double> gy(g.o_per_group * width);
  std::vector<double> cols(k * width);
  for (std::size_t gi = 0; gi < g.groups; ++gi) {
    gather_group(g, gi, g.o, g.o_per_group, g.out_area(), gout.data(), gy.data());
    const double* wg = w + gi * g.o_per_group * k;
    if (gw) {
      if (g.pointwise()) {
        gather_group(g, gi, g.c, g.c_per_group, g.t * g.f, x, cols.data());
      } else {
        im2col(g, gi, x, cols.data());
      }
      // dW_g += dY_g cols^T
      gemm(false, true, g.o_per_group, k, width, 1.0, gy.data(), width, cols.data(), width, 1.0,
           gw->data() + gi * g.o_per_group * k, k);
    }
    if (gx) {
      // dcols = W_g^T dY_g
      gemm(true, false, k, width, g.o_per_group, 1.0, wg, k, gy.data(), width, 0.0, cols.data(),
           width);
      if (g.pointwise()) {
        scatter_group(g, gi, g.c, g.c_per_group, g.t * g.f, cols.data(), gx->data());
      } else {
        col2im(g, gi, cols.data(), gx->data());
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw DimensionError("conv2d: expected [N,C,T,F] input and [O,C/g,kT,kF] kernel, got " +
                         shape_string(input.shape()) + " and " + shape_string(kernel.shape()));
  }
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.t = input.dim(2);
  g.f = input.dim(3);
  g.o = kernel.dim(0);
  g.kt = kernel.dim(2);
  g.kf = kernel.dim(3);
  g.groups = options.groups;
  g.st = options.stride_t;
  g.sf = options.stride_f;
  g.pt = options.pad_t;
  g.pf = options.pad_f;
  if (g.groups == 0 || g.c % g.groups != 0 || g.o % g.groups != 0) {
    throw DimensionError("conv2d: channels " + std::to_string(g.c) + "->" + std::to_string(g.o) +
                         " not divisible by groups " + std::to_string(g.groups));
  }
  g.c_per_group = g.c / g.groups;
  g.o_per_group = g.o / g.groups;
  if (kernel.dim(1) != g.c_per_group) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels per group, input provides " +
                         std::to_string(g.c_per_group));
  }
  g.ot = conv_output_extent(g.t, g.kt, g.st, g.pt);
  g.of = conv_output_extent(g.f, g.kf, g.sf, g.pf);

  const bool track = should_track({&input, &kernel});
  std::vector<double> out(g.n * g.o * g.ot * g.of, 0.0);
  conv_forward(g, input.values().data(), kernel.values().data(), out.data());

  Shape out_shape{g.n, g.o, g.ot, g.of};
  Tensor result = make_result(out_shape, std::move(out), track, "conv2d");
  if (track) {
    on_backward(result, [in = input.node(), kn = kernel.node(), g](const std::vector<double>& gout) {
      conv_backward(g, in->values.data(), kn->values.data(), gout, grad_of(in), grad_of(kn));
    });
  }
  return result;
}

}  // namespace aures
