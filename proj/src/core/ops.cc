/*
 * Copyright 2026 The WeightLeak Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "weightleak/ops.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "weightleak/errors.h"

namespace weightleak::ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(a.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.mutable_data()) v = f(v);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out = a;
  auto o = out.mutable_data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(o[i], bv[i]);
  return out;
}

// Broadcasts a rank-0 value to `shape`. Adjoint of sum().
Var expand(const Var& s, const Shape& shape) {
  return s.tape().record(Tensor::filled(shape, s.value().item()), {s},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{sum(g)};
                         });
}

// ---- raw convolution kernels ----

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, oh, ow, pad, stride;
};

ConvGeometry conv_geometry(const Shape& x, const Shape& k, Conv2dParams p, const char* op) {
  if (x.size() != 4 || k.size() != 4) {
    throw DimensionError(std::string(op) + ": expected input [B,C,H,W] and kernel [O,C,kH,kW], got " +
                         shape_string(x) + " and " + shape_string(k));
  }
  if (x[1] != k[1]) {
    throw DimensionError(std::string(op) + ": input channels " + std::to_string(x[1]) +
                         " do not match kernel " + shape_string(k));
  }
  if (p.stride == 0) throw ArgumentError(std::string(op) + ": stride must be >= 1");
  const long long hp = static_cast<long long>(x[2] + 2 * p.pad) - static_cast<long long>(k[2]);
  const long long wp = static_cast<long long>(x[3] + 2 * p.pad) - static_cast<long long>(k[3]);
  if (hp < 0 || wp < 0) {
    throw DimensionError(std::string(op) + ": kernel " + shape_string(k) +
                         " larger than padded input " + shape_string(x));
  }
  return {x[0], x[1], x[2], x[3], k[0], k[2], k[3],
          static_cast<std::size_t>(hp) / p.stride + 1, static_cast<std::size_t>(wp) / p.stride + 1,
          p.pad, p.stride};
}

// Calls f(x_index, k_index, y_index) for every multiply-accumulate term.
template <typename F>
void for_each_tap(const ConvGeometry& g, F f) {
  const long long pad = static_cast<long long>(g.pad);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
          const std::size_t yi = ((b * g.cout + co) * g.oh + oy) * g.ow + ox;
          const long long iy0 = static_cast<long long>(oy * g.stride) - pad;
          const long long ix0 = static_cast<long long>(ox * g.stride) - pad;
          for (std::size_t ci = 0; ci < g.cin; ++ci) {
            const std::size_t xbase = (b * g.cin + ci) * g.h;
            const std::size_t kbase = (co * g.cin + ci) * g.kh;
            for (std::size_t ky = 0; ky < g.kh; ++ky) {
              const long long iy = iy0 + static_cast<long long>(ky);
              if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
              const std::size_t xrow = (xbase + static_cast<std::size_t>(iy)) * g.w;
              const std::size_t krow = (kbase + ky) * g.kw;
              for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const long long ix = ix0 + static_cast<long long>(kx);
                if (ix < 0 || ix >= static_cast<long long>(g.w)) continue;
                f(xrow + static_cast<std::size_t>(ix), krow + kx, yi);
              }
            }
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& x, const Tensor& k, const ConvGeometry& g) {
  Tensor y({g.batch, g.cout, g.oh, g.ow});
  auto yd = y.mutable_data();
  auto xd = x.data();
  auto kd = k.data();
  for_each_tap(g, [&](std::size_t xi, std::size_t ki, std::size_t yi) { yd[yi] += xd[xi] * kd[ki]; });
  return y;
}

Tensor conv_input_adjoint(const Tensor& gy, const Tensor& k, const Shape& x_shape,
                          const ConvGeometry& g) {
  Tensor gx(x_shape);
  auto gxd = gx.mutable_data();
  auto gyd = gy.data();
  auto kd = k.data();
  for_each_tap(g, [&](std::size_t xi, std::size_t ki, std::size_t yi) { gxd[xi] += gyd[yi] * kd[ki]; });
  return gx;
}

Tensor conv_kernel_adjoint(const Tensor& x, const Tensor& gy, const Shape& k_shape,
                           const ConvGeometry& g) {
  Tensor gk(k_shape);
  auto gkd = gk.mutable_data();
  auto gyd = gy.data();
  auto xd = x.data();
  for_each_tap(g, [&](std::size_t xi, std::size_t ki, std::size_t yi) { gkd[ki] += gyd[yi] * xd[xi]; });
  return gk;
}

void require_output_shape(const Var& grad_out, const ConvGeometry& g, const char* op) {
  const Shape expected{g.batch, g.cout, g.oh, g.ow};
  if (grad_out.shape() != expected) {
    throw DimensionError(std::string(op) + ": gradient shape " + shape_string(grad_out.shape()) +
                         " does not match conv output " + shape_string(expected));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{g, g};
                         });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b},
                         [](const Var&, const Var& g, std::span<const bool> needs) {
                           return std::vector<Var>{g, needs[1] ? neg(g) : Var()};
                         });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return a.tape().record(zip(a.value(), b.value(), std::multiplies<>()), {a, b},
                         [a, b](const Var&, const Var& g, std::span<const bool> needs) {
                           return std::vector<Var>{needs[0] ? mul(g, b) : Var(),
                                                   needs[1] ? mul(g, a) : Var()};
                         });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  return a.tape().record(c * a.value(), {a},
                         [c](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{scale(g, c)};
                         });
}

Var add_scalar(const Var& a, double c) {
  return a.tape().record(map(a.value(), [c](double v) { return v + c; }), {a},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{g};
                         });
}

Var reciprocal(const Var& a) {
  return a.tape().record(map(a.value(), [](double v) { return 1.0 / v; }), {a},
                         [](const Var& y, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{neg(mul(g, mul(y, y)))};
                         });
}

Var sqrt(const Var& a) {
  return a.tape().record(map(a.value(), [](double v) { return std::sqrt(v); }), {a},
                         [](const Var& y, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{scale(mul(g, reciprocal(y)), 0.5)};
                         });
}

Var abs(const Var& a) {
  return a.tape().record(map(a.value(), [](double v) { return std::abs(v); }), {a},
                         [a](const Var&, const Var& g, std::span<const bool>) {
                           // Subgradient 0 at 0.
                           Tensor sign = map(a.value(), [](double v) {
                             return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                           });
                           return std::vector<Var>{mul(g, g.tape().constant(std::move(sign)))};
                         });
}

Var sigmoid(const Var& a) {
  return a.tape().record(map(a.value(),
                             [](double v) {
                               return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                               : std::exp(v) / (1.0 + std::exp(v));
                             }),
                         {a}, [](const Var& y, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{mul(g, mul(y, add_scalar(neg(y), 1.0)))};
                         });
}

Var relu(const Var& a) {
  return a.tape().record(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                         [a](const Var&, const Var& g, std::span<const bool>) {
                           Tensor mask = map(a.value(), [](double v) { return v > 0.0 ? 1.0 : 0.0; });
                           return std::vector<Var>{mul(g, g.tape().constant(std::move(mask)))};
                         });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.value().size() != 1) {
    throw DimensionError("mul_scalar: factor must hold one value, got " + shape_string(s.shape()));
  }
  return a.tape().record(s.value()[0] * a.value(), {a, s},
                         [a, s](const Var&, const Var& g, std::span<const bool> needs) {
                           return std::vector<Var>{needs[0] ? mul_scalar(g, s) : Var(),
                                                   needs[1] ? reshape(sum(mul(g, a)), s.shape())
                                                            : Var()};
                         });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const Shape shape = a.shape();
  return a.tape().record(Tensor::scalar(total), {a},
                         [shape](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{expand(g, shape)};
                         });
}

Var reshape(const Var& a, Shape shape) {
  if (a.shape() == shape) return a;
  Tensor value = a.value().reshaped(std::move(shape));
  const Shape original = a.shape();
  return a.tape().record(std::move(value), {a},
                         [original](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{reshape(g, original)};
                         });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  auto o = out.mutable_data();
  auto ad = a.value().data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &bd[p * n];
      double* orow = &o[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return a.tape().record(std::move(out), {a, b},
                         [a, b](const Var&, const Var& g, std::span<const bool> needs) {
                           return std::vector<Var>{needs[0] ? matmul(g, transpose(b)) : Var(),
                                                   needs[1] ? matmul(transpose(a), g) : Var()};
                         });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  auto o = out.mutable_data();
  auto ad = a.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) o[j * m + i] = ad[i * n + j];
  }
  return a.tape().record(std::move(out), {a},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{transpose(g)};
                         });
}

Var sum_rows(const Var& a) {
  require_rank(a, 2, "sum_rows");
  const std::size_t rows = a.shape()[0], n = a.shape()[1];
  Tensor out({n});
  auto ad = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[j] += ad[r * n + j];
  }
  return a.tape().record(std::move(out), {a},
                         [rows](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{broadcast_rows(g, rows)};
                         });
}

Var broadcast_rows(const Var& v, std::size_t rows) {
  require_rank(v, 1, "broadcast_rows");
  const std::size_t n = v.shape()[0];
  Tensor out({rows, n});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(v.value().values().begin(), v.value().values().end(),
              out.mutable_data().begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return v.tape().record(std::move(out), {v},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{sum_rows(g)};
                         });
}

Var row_sum(const Var& a) {
  require_rank(a, 2, "row_sum");
  const std::size_t rows = a.shape()[0], n = a.shape()[1];
  Tensor out({rows});
  auto ad = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ad[r * n + j];
    out[r] = s;
  }
  return a.tape().record(std::move(out), {a},
                         [n](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{broadcast_cols(g, n)};
                         });
}

Var broadcast_cols(const Var& v, std::size_t cols) {
  require_rank(v, 1, "broadcast_cols");
  const std::size_t rows = v.shape()[0];
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = v.value()[r];
  }
  return v.tape().record(std::move(out), {v},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{row_sum(g)};
                         });
}

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t rows = a.shape()[0], n = a.shape()[1];
  Tensor out = a.value();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &o[r * n];
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= z;
  }
  return a.tape().record(std::move(out), {a},
                         [n](const Var& s, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{
                               mul(s, sub(g, broadcast_cols(row_sum(mul(g, s)), n)))};
                         });
}

Var log_softmax_rows(const Var& a) {
  require_rank(a, 2, "log_softmax_rows");
  const std::size_t rows = a.shape()[0], n = a.shape()[1];
  Tensor out = a.value();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &o[r * n];
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) row[j] -= lse;
  }
  return a.tape().record(std::move(out), {a},
                         [a, n](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{
                               sub(g, mul(softmax_rows(a), broadcast_cols(row_sum(g), n)))};
                         });
}

Var conv2d(const Var& input, const Var& kernel, Conv2dParams params) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), params, "conv2d");
  return input.tape().record(
      conv_forward(input.value(), kernel.value(), g), {input, kernel},
      [input, kernel, params](const Var&, const Var& gy, std::span<const bool> needs) {
        return std::vector<Var>{
            needs[0] ? conv2d_input_grad(gy, kernel, input.shape(), params) : Var(),
            needs[1] ? conv2d_kernel_grad(input, gy, kernel.shape(), params) : Var()};
      });
}

Var conv2d_input_grad(const Var& grad_out, const Var& kernel, const Shape& input_shape,
                      Conv2dParams params) {
  const ConvGeometry g = conv_geometry(input_shape, kernel.shape(), params, "conv2d_input_grad");
  require_output_shape(grad_out, g, "conv2d_input_grad");
  return grad_out.tape().record(
      conv_input_adjoint(grad_out.value(), kernel.value(), input_shape, g), {grad_out, kernel},
      [grad_out, kernel, params](const Var&, const Var& h, std::span<const bool> needs) {
        return std::vector<Var>{
            needs[0] ? conv2d(h, kernel, params) : Var(),
            needs[1] ? conv2d_kernel_grad(h, grad_out, kernel.shape(), params) : Var()};
      });
}

Var conv2d_kernel_grad(const Var& input, const Var& grad_out, const Shape& kernel_shape,
                       Conv2dParams params) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel_shape, params, "conv2d_kernel_grad");
  require_output_shape(grad_out, g, "conv2d_kernel_grad");
  return input.tape().record(
      conv_kernel_adjoint(input.value(), grad_out.value(), kernel_shape, g), {input, grad_out},
      [input, grad_out, params](const Var&, const Var& h, std::span<const bool> needs) {
        return std::vector<Var>{
            needs[0] ? conv2d_input_grad(grad_out, h, input.shape(), params) : Var(),
            needs[1] ? conv2d(input, h, params) : Var()};
      });
}

Var sum_channels(const Var& a) {
  require_rank(a, 4, "sum_channels");
  const Shape shape = a.shape();
  const std::size_t c = shape[1], plane = shape[2] * shape[3];
  Tensor out({c});
  auto ad = a.value().data();
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = &ad[(b * c + ch) * plane];
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      out[ch] += s;
    }
  }
  return a.tape().record(std::move(out), {a},
                         [shape](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{broadcast_channels(g, shape)};
                         });
}

Var broadcast_channels(const Var& bias, const Shape& shape) {
  require_rank(bias, 1, "broadcast_channels");
  if (shape.size() != 4 || shape[1] != bias.shape()[0]) {
    throw DimensionError("broadcast_channels: bias " + shape_string(bias.shape()) +
                         " does not fit " + shape_string(shape));
  }
  Tensor out(shape);
  const std::size_t c = shape[1], plane = shape[2] * shape[3];
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill_n(o.begin() + static_cast<std::ptrdiff_t>((b * c + ch) * plane), plane,
                  bias.value()[ch]);
    }
  }
  return bias.tape().record(std::move(out), {bias},
                            [](const Var&, const Var& g, std::span<const bool>) {
                              return std::vector<Var>{sum_channels(g)};
                            });
}

Var add_channel_bias(const Var& input, const Var& bias) {
  require_rank(input, 4, "add_channel_bias");
  return add(input, broadcast_channels(bias, input.shape()));
}

Var diff_h(const Var& image) {
  require_rank(image, 4, "diff_h");
  const Shape s = image.shape();
  if (s[2] < 2) throw DimensionError("diff_h: height must be >= 2, got " + shape_string(s));
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor out({s[0], s[1], h - 1, w});
  auto x = image.value().data();
  auto o = out.mutable_data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i + 1 < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        o[(p * (h - 1) + i) * w + j] = x[(p * h + i + 1) * w + j] - x[(p * h + i) * w + j];
      }
    }
  }
  return image.tape().record(std::move(out), {image},
                             [s](const Var&, const Var& g, std::span<const bool>) {
                               return std::vector<Var>{diff_h_adjoint(g, s)};
                             });
}

Var diff_h_adjoint(const Var& d, const Shape& s) {
  const Shape expected{s.at(0), s.at(1), s.at(2) - 1, s.at(3)};
  if (d.shape() != expected) {
    throw DimensionError("diff_h_adjoint: expected " + shape_string(expected) + ", got " +
                         shape_string(d.shape()));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor out(s);
  auto dv = d.value().data();
  auto o = out.mutable_data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i + 1 < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double v = dv[(p * (h - 1) + i) * w + j];
        o[(p * h + i + 1) * w + j] += v;
        o[(p * h + i) * w + j] -= v;
      }
    }
  }
  return d.tape().record(std::move(out), {d},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{diff_h(g)};
                         });
}

Var diff_w(const Var& image) {
  require_rank(image, 4, "diff_w");
  const Shape s = image.shape();
  if (s[3] < 2) throw DimensionError("diff_w: width must be >= 2, got " + shape_string(s));
  const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
  Tensor out({s[0], s[1], s[2], w - 1});
  auto x = image.value().data();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j + 1 < w; ++j) o[r * (w - 1) + j] = x[r * w + j + 1] - x[r * w + j];
  }
  return image.tape().record(std::move(out), {image},
                             [s](const Var&, const Var& g, std::span<const bool>) {
                               return std::vector<Var>{diff_w_adjoint(g, s)};
                             });
}

Var diff_w_adjoint(const Var& d, const Shape& s) {
  const Shape expected{s.at(0), s.at(1), s.at(2), s.at(3) - 1};
  if (d.shape() != expected) {
    throw DimensionError("diff_w_adjoint: expected " + shape_string(expected) + ", got " +
                         shape_string(d.shape()));
  }
  const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
  Tensor out(s);
  auto dv = d.value().data();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j + 1 < w; ++j) {
      const double v = dv[r * (w - 1) + j];
      o[r * w + j + 1] += v;
      o[r * w + j] -= v;
    }
  }
  return d.tape().record(std::move(out), {d},
                         [](const Var&, const Var& g, std::span<const bool>) {
                           return std::vector<Var>{diff_w(g)};
                         });
}

// ---- composites ----

Var affine(const Var& input, const Var& weight, const std::optional<Var>& bias) {
  if (input.value().rank() != 2 || weight.value().rank() != 2 ||
      input.shape()[1] != weight.shape()[0]) {
    throw DimensionError("affine: input " + shape_string(input.shape()) +
                         " does not chain with weight " + shape_string(weight.shape()));
  }
  Var out = matmul(input, weight);
  if (bias) {
    if (bias->shape() != Shape{weight.shape()[1]}) {
      throw DimensionError("affine: bias " + shape_string(bias->shape()) +
                           " does not match weight " + shape_string(weight.shape()));
    }
    out = add(out, broadcast_rows(*bias, input.shape()[0]));
  }
  return out;
}

Var cross_entropy_probs(const Var& logits, const Var& target_probs) {
  require_rank(logits, 2, "cross_entropy");
  require_same_shape(logits, target_probs, "cross_entropy");
  const double batch = static_cast<double>(logits.shape()[0]);
  return scale(sum(mul(target_probs, log_softmax_rows(logits))), -1.0 / batch);
}

Var cross_entropy_soft(const Var& logits, const Var& label_logits) {
  require_same_shape(logits, label_logits, "cross_entropy_soft");
  return cross_entropy_probs(logits, softmax_rows(label_logits));
}

Var squared_norm_all(std::span<const Var> tensors) {
  if (tensors.empty()) throw ArgumentError("squared_norm_all: empty tensor list");
  Var total = sum(mul(tensors[0], tensors[0]));
  for (std::size_t i = 1; i < tensors.size(); ++i) {
    total = add(total, sum(mul(tensors[i], tensors[i])));
  }
  return total;
}

Var frobenius_norm_all(std::span<const Var> tensors) {
  if (tensors.empty()) throw ArgumentError("frobenius_norm_all: empty tensor list");
  return sqrt(squared_norm_all(tensors));
}

Var total_variation(const Var& image) {
  require_rank(image, 4, "total_variation");
  const Shape& s = image.shape();
  std::optional<Var> tv;
  if (s[2] >= 2) tv = sum(abs(diff_h(image)));
  if (s[3] >= 2) {
    Var horizontal = sum(abs(diff_w(image)));
    tv = tv ? add(*tv, horizontal) : horizontal;
  }
  if (!tv) return image.tape().constant(Tensor::scalar(0.0));
  return *tv;
}

}  // namespace weightleak::ad
