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

#include "aures/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gemm.hpp"
#include "op_support.hpp"

namespace aures {

using internal::gemm;
using internal::grad_of;
using internal::make_result;
using internal::on_backward;
using internal::require_rank;
using internal::require_same_shape;
using internal::should_track;

namespace {

// Unary elementwise op: forward value f(x), derivative df(x, y).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  const bool track = should_track({&a});
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  Tensor result = make_result(a.shape(), std::move(out), track, name);
  if (track) {
    auto an = a.node();
    auto on = result.node();
    on_backward(result, [an, on, deriv](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[i] += g[i] * deriv(an->values[i], on->values[i]);
      }
    });
  }
  return result;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis out of range for " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool track = should_track({&a, &b});
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  Tensor result = make_result(a.shape(), std::move(out), track, "add");
  if (track) {
    on_backward(result, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const bool track = should_track({&a, &b});
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  Tensor result = make_result(a.shape(), std::move(out), track, "sub");
  if (track) {
    on_backward(result, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool track = should_track({&a, &b});
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  Tensor result = make_result(a.shape(), std::move(out), track, "mul");
  if (track) {
    on_backward(result, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bn->values[i];
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * an->values[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, "add_scalar", [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (v < 0.0) throw DomainError("log of negative value");
  }
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.values()) {
    if (v < 0.0) throw DomainError("sqrt of negative value");
  }
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor scaled_gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, "scaled_gelu",
      [](double x) { return kGeluGamma * x * 0.5 * (1.0 + std::erf(x * kInvSqrt2)); },
      [inv_sqrt_2pi](double x, double y) {
        // The forward output already holds gamma * x * cdf.
        const double cdf = x != 0.0 && std::abs(x) < 8.0 ? y / (kGeluGamma * x)
                                                         : 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        return kGeluGamma * (cdf + x * pdf);
      });
}

Tensor sum(const Tensor& a) {
  const bool track = should_track({&a});
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor result = make_result(Shape{}, {total}, track, "sum");
  if (track) {
    on_backward(result, [an = a.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (double& v : *ga) v += g[0];
      }
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "log_softmax");
  const bool track = should_track({&a});
  auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) peak = std::max(peak, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) z += std::exp(x[base + k * s.inner] - peak);
      const double lse = peak + std::log(z);
      for (std::size_t k = 0; k < s.extent; ++k) {
        out[base + k * s.inner] = x[base + k * s.inner] - lse;
      }
    }
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "log_softmax");
  if (track) {
    on_backward(result, [an = a.node(), on = result.node(), s](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          double gsum = 0.0;
          for (std::size_t k = 0; k < s.extent; ++k) gsum += g[base + k * s.inner];
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t idx = base + k * s.inner;
            (*ga)[idx] += g[idx] - std::exp(on->values[idx]) * gsum;
          }
        }
      }
    });
  }
  return result;
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  const bool track = should_track({&a});
  auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) peak = std::max(peak, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(x[base + k * s.inner] - peak);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= z;
    }
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "softmax");
  if (track) {
    on_backward(result, [an = a.node(), on = result.node(), s](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      const auto& y = on->values;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          double dot = 0.0;
          for (std::size_t k = 0; k < s.extent; ++k) {
            dot += g[base + k * s.inner] * y[base + k * s.inner];
          }
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t idx = base + k * s.inner;
            (*ga)[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(shape));
  }
  const bool track = should_track({&a});
  auto v = a.values();
  Tensor result = make_result(std::move(shape), std::vector<double>(v.begin(), v.end()), track,
                              "reshape");
  if (track) {
    on_backward(result, [an = a.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
    });
  }
  return result;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw DimensionError("concat: extent mismatch " + shape_string(s) + " vs " +
                             shape_string(first));
      }
    }
    out_shape[axis] += s[axis];
    track = track || should_track({&p});
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t row = p.dim(axis) * inner;
    auto v = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + o * row, row, out.begin() + o * out_row + offset);
    }
    offset += row;
  }
  Tensor result = make_result(out_shape, std::move(out), track, "concat");
  if (track) {
    std::vector<internal::NodePtr> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node());
    on_backward(result, [nodes, offsets, outer, inner, out_row,
                         axis](const std::vector<double>& g) {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        auto* gp = grad_of(nodes[k]);
        if (!gp) continue;
        const std::size_t row = nodes[k]->shape[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < row; ++i) {
            (*gp)[o * row + i] += g[o * out_row + offsets[k] + i];
          }
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.dim(1);
  const bool track = should_track({&a});
  auto v = a.values();
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = v[r * cols + c];
  }
  Tensor result = make_result(Shape{cols, rows}, std::move(out), track, "transpose");
  if (track) {
    on_backward(result, [an = a.node(), rows, cols](const std::vector<double>& g) {
      if (auto* ga = grad_of(an)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) (*ga)[r * cols + c] += g[c * rows + r];
        }
      }
    });
  }
  return result;
}

Tensor subsample(const Tensor& a, std::size_t axis, std::size_t stride) {
  if (stride == 0) throw ConfigError("subsample: stride must be positive");
  const AxisSplit s = split_axis(a.shape(), axis, "subsample");
  const std::size_t kept = (s.extent + stride - 1) / stride;
  Shape out_shape = a.shape();
  out_shape[axis] = kept;
  const bool track = should_track({&a});
  auto v = a.values();
  std::vector<double> out(shape_numel(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < kept; ++k) {
      std::copy_n(v.begin() + (o * s.extent + k * stride) * s.inner, s.inner,
                  out.begin() + (o * kept + k) * s.inner);
    }
  }
  Tensor result = make_result(std::move(out_shape), std::move(out), track, "subsample");
  if (track) {
    on_backward(result, [an = a.node(), s, kept, stride](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t k = 0; k < kept; ++k) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            (*ga)[(o * s.extent + k * stride) * s.inner + i] += g[(o * kept + k) * s.inner + i];
          }
        }
      }
    });
  }
  return result;
}

namespace {

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const bool track = should_track({&a, &b});
  std::vector<double> out(m * n, 0.0);
  gemm(false, false, m, n, k, 1.0, a.values().data(), k, b.values().data(), n, 0.0, out.data(),
       n);
  Tensor result = make_result(Shape{m, n}, std::move(out), track, "matmul");
  if (track) {
    on_backward(result, [an = a.node(), bn = b.node(), m, k, n](const std::vector<double>& g) {
      // dA += g B^T, dB += A^T g
      if (auto* ga = grad_of(an)) {
        gemm(false, true, m, k, n, 1.0, g.data(), n, bn->values.data(), n, 1.0, ga->data(), k);
      }
      if (auto* gb = grad_of(bn)) {
        gemm(true, false, k, n, m, 1.0, an->values.data(), k, g.data(), n, 1.0, gb->data(), n);
      }
    });
  }
  return result;
}

Tensor global_avg_pool(const Tensor& a) {
  if (a.rank() < 2) throw DimensionError("global_avg_pool: rank must be >= 2");
  const std::size_t n = a.dim(0);
  const std::size_t c = a.dim(1);
  const std::size_t area = a.size() / (n * c);
  const bool track = should_track({&a});
  auto v = a.values();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < area; ++j) acc += v[i * area + j];
    out[i] = acc / static_cast<double>(area);
  }
  Tensor result = make_result(Shape{n, c}, std::move(out), track, "global_avg_pool");
  if (track) {
    on_backward(result, [an = a.node(), area](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      const double inv = 1.0 / static_cast<double>(area);
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < area; ++j) (*ga)[i * area + j] += g[i] * inv;
      }
    });
  }
  return result;
}

Tensor avg_pool_ceil(const Tensor& a, std::size_t stride_t, std::size_t stride_f) {
  require_rank(a, 4, "avg_pool_ceil");
  if (stride_t == 0 || stride_f == 0) throw ConfigError("avg_pool_ceil: zero stride");
  const std::size_t planes = a.dim(0) * a.dim(1);
  const std::size_t t_in = a.dim(2);
  const std::size_t f_in = a.dim(3);
  const std::size_t t_out = (t_in + stride_t - 1) / stride_t;
  const std::size_t f_out = (f_in + stride_f - 1) / stride_f;
  const bool track = should_track({&a});
  auto v = a.values();
  std::vector<double> out(planes * t_out * f_out, 0.0);
  auto window_count = [=](std::size_t ot, std::size_t of) {
    const std::size_t nt = std::min(stride_t, t_in - ot * stride_t);
    const std::size_t nf = std::min(stride_f, f_in - of * stride_f);
    return static_cast<double>(nt * nf);
  };
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t t = 0; t < t_in; ++t) {
      for (std::size_t f = 0; f < f_in; ++f) {
        out[(p * t_out + t / stride_t) * f_out + f / stride_f] += v[(p * t_in + t) * f_in + f];
      }
    }
    for (std::size_t ot = 0; ot < t_out; ++ot) {
      for (std::size_t of = 0; of < f_out; ++of) {
        out[(p * t_out + ot) * f_out + of] /= window_count(ot, of);
      }
    }
  }
  Shape out_shape{a.dim(0), a.dim(1), t_out, f_out};
  Tensor result = make_result(out_shape, std::move(out), track, "avg_pool_ceil");
  if (track) {
    on_backward(result, [an = a.node(), planes, t_in, f_in, t_out, f_out, stride_t, stride_f,
                         window_count](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t t = 0; t < t_in; ++t) {
          for (std::size_t f = 0; f < f_in; ++f) {
            const std::size_t ot = t / stride_t;
            const std::size_t of = f / stride_f;
            (*ga)[(p * t_in + t) * f_in + f] +=
                g[(p * t_out + ot) * f_out + of] / window_count(ot, of);
          }
        }
      }
    });
  }
  return result;
}

Tensor mul_leading(const Tensor& a, const Tensor& s) {
  const Shape& as = a.shape();
  const Shape& ss = s.shape();
  if (ss.size() > as.size() || !std::equal(ss.begin(), ss.end(), as.begin())) {
    throw DimensionError("mul_leading: " + shape_string(ss) + " is not a prefix of " +
                         shape_string(as));
  }
  const std::size_t outer = s.size();
  const std::size_t inner = a.size() / outer;
  const bool track = should_track({&a, &s});
  auto x = a.values();
  auto w = s.values();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = x[o * inner + i] * w[o];
  }
  Tensor result = make_result(as, std::move(out), track, "mul_leading");
  if (track) {
    on_backward(result, [an = a.node(), sn = s.node(), outer, inner](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      auto* gs = grad_of(sn);
      for (std::size_t o = 0; o < outer; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = o * inner + i;
          if (ga) (*ga)[idx] += g[idx] * sn->values[o];
          acc += g[idx] * an->values[idx];
        }
        if (gs) (*gs)[o] += acc;
      }
    });
  }
  return result;
}

namespace {

struct ChannelLayout {
  std::size_t batch;
  std::size_t channels;
  std::size_t area;
};

ChannelLayout channel_layout(const Tensor& a, const Tensor& v, const char* op) {
  if (a.rank() < 2 || v.rank() != 1 || v.dim(0) != a.dim(1)) {
    throw DimensionError(std::string(op) + ": cannot apply " + shape_string(v.shape()) +
                         " along axis 1 of " + shape_string(a.shape()));
  }
  return {a.dim(0), a.dim(1), a.size() / (a.dim(0) * a.dim(1))};
}

}  // namespace

Tensor add_channel(const Tensor& a, const Tensor& v) {
  const ChannelLayout l = channel_layout(a, v, "add_channel");
  const bool track = should_track({&a, &v});
  auto x = a.values();
  auto b = v.values();
  std::vector<double> out(x.size());
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t base = (n * l.channels + c) * l.area;
      for (std::size_t i = 0; i < l.area; ++i) out[base + i] = x[base + i] + b[c];
    }
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "add_channel");
  if (track) {
    on_backward(result, [an = a.node(), vn = v.node(), l](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      auto* gv = grad_of(vn);
      for (std::size_t n = 0; n < l.batch; ++n) {
        for (std::size_t c = 0; c < l.channels; ++c) {
          const std::size_t base = (n * l.channels + c) * l.area;
          double acc = 0.0;
          for (std::size_t i = 0; i < l.area; ++i) {
            if (ga) (*ga)[base + i] += g[base + i];
            acc += g[base + i];
          }
          if (gv) (*gv)[c] += acc;
        }
      }
    });
  }
  return result;
}

Tensor mul_channel(const Tensor& a, const Tensor& v) {
  const ChannelLayout l = channel_layout(a, v, "mul_channel");
  const bool track = should_track({&a, &v});
  auto x = a.values();
  auto s = v.values();
  std::vector<double> out(x.size());
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t base = (n * l.channels + c) * l.area;
      for (std::size_t i = 0; i < l.area; ++i) out[base + i] = x[base + i] * s[c];
    }
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "mul_channel");
  if (track) {
    on_backward(result, [an = a.node(), vn = v.node(), l](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      auto* gv = grad_of(vn);
      for (std::size_t n = 0; n < l.batch; ++n) {
        for (std::size_t c = 0; c < l.channels; ++c) {
          const std::size_t base = (n * l.channels + c) * l.area;
          double acc = 0.0;
          for (std::size_t i = 0; i < l.area; ++i) {
            if (ga) (*ga)[base + i] += g[base + i] * vn->values[c];
            acc += g[base + i] * an->values[base + i];
          }
          if (gv) (*gv)[c] += acc;
        }
      }
    });
  }
  return result;
}

Tensor weight_standardize(const Tensor& kernel, const Tensor& gain, double eps) {
  if (kernel.rank() < 2) throw DimensionError("weight_standardize: kernel rank must be >= 2");
  const std::size_t out_ch = kernel.dim(0);
  const std::size_t fan_in = kernel.size() / out_ch;
  if (gain.shape() != Shape{out_ch}) {
    throw DimensionError("weight_standardize: gain must have shape [" + std::to_string(out_ch) +
                         "]");
  }
  const bool track = should_track({&kernel, &gain});
  auto w = kernel.values();
  auto gv = gain.values();
  const double sqrt_fan = std::sqrt(static_cast<double>(fan_in));
  std::vector<double> out(w.size(), 0.0);
  std::vector<double> mu(out_ch);
  std::vector<double> sigma(out_ch);
  for (std::size_t o = 0; o < out_ch; ++o) {
    const double* row = w.data() + o * fan_in;
    double m = 0.0;
    for (std::size_t i = 0; i < fan_in; ++i) m += row[i];
    m /= static_cast<double>(fan_in);
    double var = 0.0;
    for (std::size_t i = 0; i < fan_in; ++i) var += (row[i] - m) * (row[i] - m);
    var /= static_cast<double>(fan_in);
    mu[o] = m;
    sigma[o] = std::sqrt(var);
    // A (numerically) constant row standardizes to exactly zero.
    if (sigma[o] <= eps) continue;
    const double denom = sigma[o] * sqrt_fan;
    for (std::size_t i = 0; i < fan_in; ++i) out[o * fan_in + i] = gv[o] * (row[i] - m) / denom;
  }
  Tensor result = make_result(kernel.shape(), std::move(out), track, "weight_standardize");
  if (track) {
    on_backward(result, [kn = kernel.node(), gn = gain.node(), mu, sigma, out_ch, fan_in, sqrt_fan,
                         eps](const std::vector<double>& g) {
      auto* gk = grad_of(kn);
      auto* gg = grad_of(gn);
      const double inv_fan = 1.0 / static_cast<double>(fan_in);
      for (std::size_t o = 0; o < out_ch; ++o) {
        const double* row = kn->values.data() + o * fan_in;
        const double* grow = g.data() + o * fan_in;
        const double denom = std::max(sigma[o], eps) * sqrt_fan;
        const double gain_o = gn->values[o];
        double dgain = 0.0;
        double gsum = 0.0;
        double gdot = 0.0;  // sum g * centered
        for (std::size_t i = 0; i < fan_in; ++i) {
          const double centered = row[i] - mu[o];
          dgain += grow[i] * centered / denom;
          gsum += grow[i];
          gdot += grow[i] * centered;
        }
        if (gg) (*gg)[o] += dgain;
        if (!gk) continue;
        const double c = gain_o / denom;
        const bool live_sigma = sigma[o] > eps;
        const double var_term = live_sigma ? gdot / (sigma[o] * sigma[o]) * inv_fan : 0.0;
        for (std::size_t i = 0; i < fan_in; ++i) {
          const double centered = row[i] - mu[o];
          (*gk)[o * fan_in + i] += c * (grow[i] - gsum * inv_fan - centered * var_term);
        }
      }
    });
  }
  return result;
}

Tensor moment_normalize(const Tensor& a, MomentGroups groups, double eps, MomentStats* stats) {
  require_rank(a, 4, "moment_normalize");
  const std::size_t n = a.dim(0);
  const std::size_t c = a.dim(1);
  const std::size_t area = a.dim(2) * a.dim(3);
  std::size_t num_groups = 0;
  auto group_of = [groups, c](std::size_t ni, std::size_t ci) -> std::size_t {
    switch (groups) {
      case MomentGroups::kPerChannel:
        return ci;
      case MomentGroups::kPerExample:
        return ni;
      case MomentGroups::kPerExampleChannel:
        return ni * c + ci;
    }
    return 0;
  };
  switch (groups) {
    case MomentGroups::kPerChannel:
      num_groups = c;
      break;
    case MomentGroups::kPerExample:
      num_groups = n;
      break;
    case MomentGroups::kPerExampleChannel:
      num_groups = n * c;
      break;
  }
  const double group_size = static_cast<double>(a.size() / num_groups);
  auto x = a.values();
  std::vector<double> mu(num_groups, 0.0);
  std::vector<double> var(num_groups, 0.0);
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const std::size_t base = (ni * c + ci) * area;
      double acc = 0.0;
      for (std::size_t i = 0; i < area; ++i) acc += x[base + i];
      mu[group_of(ni, ci)] += acc;
    }
  }
  for (double& m : mu) m /= group_size;
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const std::size_t base = (ni * c + ci) * area;
      const double m = mu[group_of(ni, ci)];
      double acc = 0.0;
      for (std::size_t i = 0; i < area; ++i) acc += (x[base + i] - m) * (x[base + i] - m);
      var[group_of(ni, ci)] += acc;
    }
  }
  for (double& v : var) v /= group_size;
  std::vector<double> inv_std(num_groups);
  for (std::size_t k = 0; k < num_groups; ++k) inv_std[k] = 1.0 / std::sqrt(var[k] + eps);

  const bool track = should_track({&a});
  std::vector<double> out(x.size());
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const std::size_t gi = group_of(ni, ci);
      const std::size_t base = (ni * c + ci) * area;
      for (std::size_t i = 0; i < area; ++i) out[base + i] = (x[base + i] - mu[gi]) * inv_std[gi];
    }
  }
  if (stats) {
    stats->mean = mu;
    stats->variance = var;
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "moment_normalize");
  if (track) {
    on_backward(result, [an = a.node(), on = result.node(), inv_std, group_of, n, c, area,
                         num_groups, group_size](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      const auto& y = on->values;
      std::vector<double> gmean(num_groups, 0.0);
      std::vector<double> gdot(num_groups, 0.0);
      for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t ci = 0; ci < c; ++ci) {
          const std::size_t gi = group_of(ni, ci);
          const std::size_t base = (ni * c + ci) * area;
          for (std::size_t i = 0; i < area; ++i) {
            gmean[gi] += g[base + i];
            gdot[gi] += g[base + i] * y[base + i];
          }
        }
      }
      for (std::size_t k = 0; k < num_groups; ++k) {
        gmean[k] /= group_size;
        gdot[k] /= group_size;
      }
      for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t ci = 0; ci < c; ++ci) {
          const std::size_t gi = group_of(ni, ci);
          const std::size_t base = (ni * c + ci) * area;
          for (std::size_t i = 0; i < area; ++i) {
            (*ga)[base + i] += inv_std[gi] * (g[base + i] - gmean[gi] - y[base + i] * gdot[gi]);
          }
        }
      }
    });
  }
  return result;
}

Tensor l2_normalize_rows(const Tensor& a) {
  require_rank(a, 2, "l2_normalize_rows");
  constexpr double kFloor = 1e-12;
  const std::size_t rows = a.dim(0);
  const std::size_t cols = a.dim(1);
  const bool track = should_track({&a});
  auto x = a.values();
  std::vector<double> norms(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += x[r * cols + j] * x[r * cols + j];
    norms[r] = std::max(std::sqrt(acc), kFloor);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = x[r * cols + j] / norms[r];
  }
  Tensor result = make_result(a.shape(), std::move(out), track, "l2_normalize_rows");
  if (track) {
    on_backward(result, [an = a.node(), on = result.node(), norms, rows,
                         cols](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      const auto& y = on->values;
      for (std::size_t r = 0; r < rows; ++r) {
        // Below the floor the norm is a constant and the map is linear.
        const bool clamped = norms[r] <= kFloor;
        double dot = 0.0;
        if (!clamped) {
          for (std::size_t j = 0; j < cols; ++j) dot += y[r * cols + j] * g[r * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
          (*ga)[r * cols + j] += (g[r * cols + j] - y[r * cols + j] * dot) / norms[r];
        }
      }
    });
  }
  return result;
}

Tensor sigmoid_bce_with_logits(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "sigmoid_bce_with_logits");
  const bool track = should_track({&logits});
  auto x = logits.values();
  auto t = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += std::max(x[i], 0.0) - x[i] * t[i] + std::log1p(std::exp(-std::abs(x[i])));
  }
  const double count = static_cast<double>(x.size());
  Tensor result = make_result(Shape{}, {total / count}, track, "sigmoid_bce_with_logits");
  if (track) {
    on_backward(result, [ln = logits.node(), tn = targets.node(), count](const std::vector<double>& g) {
      auto* gl = grad_of(ln);
      if (!gl) return;
      for (std::size_t i = 0; i < gl->size(); ++i) {
        const double xv = ln->values[i];
        const double p = xv >= 0.0 ? 1.0 / (1.0 + std::exp(-xv)) : std::exp(xv) / (1.0 + std::exp(xv));
        (*gl)[i] += g[0] * (p - tn->values[i]) / count;
      }
    });
  }
  return result;
}

}  // namespace aures
