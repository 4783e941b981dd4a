// Copyright 2026 The MaIL Lab Authors
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

#include "mail/ssm.h"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mail/kernels.h"
#include "mail/ops.h"

namespace mail {
namespace {

using Grads = std::span<std::vector<double>* const>;

// expm1(z) / z and its derivative, both finite at z = 0.
// expm1(z) / z and its derivative, given m1 = expm1(z).
double phi_ratio(double z, double m1) { return z == 0.0 ? 1.0 : m1 / z; }

double phi_ratio_derivative(double z, double m1) {
  if (std::abs(z) < 1e-3) {
    return 0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z / 144.0)));
  }
  return (z * (m1 + 1.0) - m1) / (z * z);
}

struct ZohShape {
  std::size_t rows;  // product of leading dims and L
  std::size_t channels;
  std::size_t state;
};

ZohShape check_zoh(const Tensor& a, const Tensor& delta) {
  if (a.rank() != 2) throw DimensionError("discretize_zoh: A must be [D, N], got " + to_string(a.shape()));
  const std::size_t d = a.dim(0);
  if (delta.rank() < 1 || delta.shape().back() != d) {
    throw DimensionError("discretize_zoh: delta " + to_string(delta.shape()) + " does not match " +
                         std::to_string(d) + " channels");
  }
  for (double v : a.data()) {
    if (!(v < 0.0)) throw ContractError("discretize_zoh: A must be strictly negative for stability");
  }
  for (double v : delta.data()) {
    if (!(v > 0.0)) throw ContractError("discretize_zoh: step size delta must be positive");
  }
  return {delta.numel() / d, d, a.dim(1)};
}

Shape state_shape(const Tensor& delta, std::size_t state) {
  Shape s = delta.shape();
  s.push_back(state);
  return s;
}

Tensor zoh_decay(const Tensor& delta, const Tensor& a) {
  const auto [rows, channels, state] = check_zoh(a, delta);
  const auto dt = delta.data();
  const auto av = a.data();
  std::vector<double> out(rows * channels * state);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t d = 0; d < channels; ++d) {
      for (std::size_t n = 0; n < state; ++n) {
        out[(r * channels + d) * state + n] = std::exp(dt[r * channels + d] * av[d * state + n]);
      }
    }
  }
  Tensor result(state_shape(delta, state), std::move(out));
  if (auto* tape = GradientTape::recording({&delta, &a})) {
    tape->record({&delta, &a}, result,
                 [delta, a, result, rows, channels, state](std::span<const double> g, Grads gin) {
                   const auto dt = delta.data();
                   const auto av = a.data();
                   const auto y = result.data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t d = 0; d < channels; ++d) {
                       const std::size_t rd = r * channels + d;
                       double gd = 0.0;
                       for (std::size_t n = 0; n < state; ++n) {
                         const std::size_t i = rd * state + n;
                         const double gy = g[i] * y[i];
                         gd += gy * av[d * state + n];
                         if (gin[1]) (*gin[1])[d * state + n] += gy * dt[rd];
                       }
                       if (gin[0]) (*gin[0])[rd] += gd;
                     }
                   }
                 });
  }
  return result;
}

Tensor zoh_input(const Tensor& delta, const Tensor& a, const Tensor& b) {
  const auto [rows, channels, state] = check_zoh(a, delta);
  Shape expect_b = delta.shape();
  expect_b.back() = state;
  if (b.shape() != expect_b) {
    throw DimensionError("discretize_zoh: B must be " + to_string(expect_b) + ", got " +
                         to_string(b.shape()));
  }
  const auto dt = delta.data();
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(rows * channels * state);
  auto em1 = std::make_shared<std::vector<double>>(rows * channels * state);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t d = 0; d < channels; ++d) {
      const double step = dt[r * channels + d];
      for (std::size_t n = 0; n < state; ++n) {
        const std::size_t i = (r * channels + d) * state + n;
        const double z = step * av[d * state + n];
        (*em1)[i] = std::expm1(z);
        out[i] = step * phi_ratio(z, (*em1)[i]) * bv[r * state + n];
      }
    }
  }
  Tensor result(state_shape(delta, state), std::move(out));
  if (auto* tape = GradientTape::recording({&delta, &a, &b})) {
    tape->record({&delta, &a, &b}, result,
                 [delta, a, b, em1, rows, channels, state](std::span<const double> g, Grads gin) {
                   const auto dt = delta.data();
                   const auto av = a.data();
                   const auto bv = b.data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t d = 0; d < channels; ++d) {
                       const std::size_t rd = r * channels + d;
                       const double step = dt[rd];
                       double gd = 0.0;
                       for (std::size_t n = 0; n < state; ++n) {
                         const double z = step * av[d * state + n];
                         const double m1 = (*em1)[rd * state + n];
                         const double gi = g[rd * state + n];
                         const double bn = bv[r * state + n];
                         gd += gi * bn * (m1 + 1.0);
                         if (gin[1]) {
                           (*gin[1])[d * state + n] += gi * bn * step * step * phi_ratio_derivative(z, m1);
                         }
                         if (gin[2]) (*gin[2])[r * state + n] += gi * step * phi_ratio(z, m1);
                       }
                       if (gin[0]) (*gin[0])[rd] += gd;
                     }
                   }
                 });
  }
  return result;
}

kernels::ScanDims check_scan(const DiscretizedParams& dp, const Tensor& c, const Tensor& x) {
  const Shape& sx = x.shape();
  if (sx.size() < 2) throw DimensionError("scan: x must be [..., L, D]");
  const std::size_t length = sx[sx.size() - 2];
  const std::size_t channels = sx.back();
  const Shape& sa = dp.a_bar.shape();
  if (sa.size() != sx.size() + 1 || !std::equal(sx.begin(), sx.end(), sa.begin())) {
    throw DimensionError("scan: A_bar " + to_string(sa) + " does not match x " + to_string(sx));
  }
  if (dp.b_bar.shape() != sa) {
    throw DimensionError("scan: B_bar " + to_string(dp.b_bar.shape()) + " does not match A_bar " +
                         to_string(sa));
  }
  const std::size_t state = sa.back();
  Shape sc = sx;
  sc.back() = state;
  if (c.shape() != sc) {
    throw DimensionError("scan: C must be " + to_string(sc) + ", got " + to_string(c.shape()));
  }
  const std::size_t batch = length * channels == 0 ? 0 : x.numel() / (length * channels);
  return {batch, length, channels, state};
}

Tensor scan_op(const DiscretizedParams& dp, const Tensor& c, const Tensor& x, ScanMode mode) {
  const kernels::ScanDims dims = check_scan(dp, c, x);
  std::vector<double> h(dp.a_bar.numel());
  std::vector<double> y(x.numel());
  const double* a = dp.a_bar.data().data();
  const double* b = dp.b_bar.data().data();
  if (mode == ScanMode::kParallel) {
    kernels::scan_blelloch(a, b, x.data().data(), c.data().data(), h.data(), y.data(), dims);
  } else {
    kernels::scan_sequential(a, b, x.data().data(), c.data().data(), h.data(), y.data(), dims);
  }
  Tensor result(x.shape(), std::move(y));
  const Tensor& a_bar = dp.a_bar;
  const Tensor& b_bar = dp.b_bar;
  if (auto* tape = GradientTape::recording({&a_bar, &b_bar, &c, &x})) {
    tape->record({&a_bar, &b_bar, &c, &x}, result,
                 [a_bar, b_bar, c, x, h = std::move(h), dims](std::span<const double> g, Grads gin) {
                   auto ptr = [&](std::size_t i) { return gin[i] ? gin[i]->data() : nullptr; };
                   kernels::scan_backward(a_bar.data().data(), b_bar.data().data(), x.data().data(),
                                          c.data().data(), h.data(), g.data(), ptr(0), ptr(1),
                                          ptr(3), ptr(2), dims);
                 });
  }
  return result;
}

}  // namespace

ScanMode parse_scan_mode(const std::string& name) {
  if (name == "sequential") return ScanMode::kSequential;
  if (name == "parallel") return ScanMode::kParallel;
  if (name == "convolution") return ScanMode::kConvolution;
  throw std::invalid_argument("unknown scan mode '" + name + "'");
}

std::string to_string(ScanMode mode) {
  switch (mode) {
    case ScanMode::kSequential: return "sequential";
    case ScanMode::kParallel: return "parallel";
    case ScanMode::kConvolution: return "convolution";
  }
  return "?";
}

SelectiveSsmParams SelectiveSsmParams::init(std::size_t channels, std::size_t state, Rng& rng) {
  SelectiveSsmParams p;
  std::vector<double> a_log(channels * state);
  for (std::size_t d = 0; d < channels; ++d) {
    for (std::size_t n = 0; n < state; ++n) a_log[d * state + n] = std::log(static_cast<double>(n + 1));
  }
  p.a_log = Tensor::parameter({channels, state}, std::move(a_log));
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  p.w_b = uniform_parameter({channels, state}, bound, rng);
  p.w_c = uniform_parameter({channels, state}, bound, rng);
  p.w_delta = uniform_parameter({channels, 1}, bound, rng);
  std::vector<double> bias(channels);
  for (double& v : bias) {
    const double step = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    v = step + std::log(-std::expm1(-step));  // inverse softplus
  }
  p.b_delta = Tensor::parameter({channels}, std::move(bias));
  return p;
}

Tensor SelectiveSsmParams::a() const { return neg(exp(a_log)); }

void SelectiveSsmParams::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "a_log", a_log);
  out.add(prefix + "w_b", w_b);
  out.add(prefix + "w_c", w_c);
  out.add(prefix + "w_delta", w_delta);
  out.add(prefix + "b_delta", b_delta);
}

SelectiveProjections selective_projections(const Tensor& x, const SelectiveSsmParams& p) {
  if (x.rank() < 1 || x.shape().back() != p.channels()) {
    throw DimensionError("selective_projections: input " + to_string(x.shape()) + " does not have " +
                         std::to_string(p.channels()) + " channels");
  }
  SelectiveProjections out;
  out.b = linear(x, p.w_b);
  out.c = linear(x, p.w_c);
  out.delta = softplus(add(expand_last(linear(x, p.w_delta), p.channels()), p.b_delta));
  return out;
}

DiscretizedParams discretize_zoh(const Tensor& a, const Tensor& b, const Tensor& delta) {
  return {zoh_decay(delta, a), zoh_input(delta, a, b)};
}

Tensor scan_sequential(const DiscretizedParams& dp, const Tensor& c, const Tensor& x) {
  return scan_op(dp, c, x, ScanMode::kSequential);
}

Tensor scan_parallel(const DiscretizedParams& dp, const Tensor& c, const Tensor& x) {
  return scan_op(dp, c, x, ScanMode::kParallel);
}

Tensor scan(const DiscretizedParams& dp, const Tensor& c, const Tensor& x, ScanMode mode) {
  if (mode == ScanMode::kConvolution) {
    throw ContractError("convolution mode needs time-invariant parameters; use ssm_convolution_mode");
  }
  return scan_op(dp, c, x, mode);
}

Tensor ssm_convolution_kernel(const Tensor& a_bar, const Tensor& b_bar, const Tensor& c,
                              std::size_t length) {
  if (a_bar.rank() != 2 || b_bar.shape() != a_bar.shape() || c.rank() != 1 ||
      c.dim(0) != a_bar.dim(1)) {
    throw ContractError(
        "convolution mode takes time-invariant A_bar, B_bar [D, N] and C [N]; got A_bar " +
        to_string(a_bar.shape()) + ", B_bar " + to_string(b_bar.shape()) + ", C " +
        to_string(c.shape()));
  }
  const std::size_t channels = a_bar.dim(0);
  const std::size_t state = a_bar.dim(1);
  const auto av = a_bar.data();
  const auto bv = b_bar.data();
  const auto cv = c.data();
  std::vector<double> kernel(length * channels, 0.0);
  for (std::size_t d = 0; d < channels; ++d) {
    for (std::size_t n = 0; n < state; ++n) {
      double power = 1.0;  // a_bar^k
      for (std::size_t k = 0; k < length; ++k) {
        kernel[k * channels + d] += cv[n] * power * bv[d * state + n];
        power *= av[d * state + n];
      }
    }
  }
  return Tensor({length, channels}, std::move(kernel));
}

Tensor ssm_convolution_mode(const Tensor& a_bar, const Tensor& b_bar, const Tensor& c,
                            const Tensor& x) {
  if (x.rank() != 2) throw ContractError("convolution mode takes x as [L, D]");
  const std::size_t length = x.dim(0);
  const std::size_t channels = x.dim(1);
  const Tensor kernel = ssm_convolution_kernel(a_bar, b_bar, c, length);
  if (kernel.dim(1) != channels) {
    throw DimensionError("convolution mode: x has " + std::to_string(channels) +
                         " channels, parameters have " + std::to_string(kernel.dim(1)));
  }
  const auto kv = kernel.data();
  const auto xv = x.data();
  std::vector<double> y(length * channels, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t k = 0; k <= t; ++k) {
      for (std::size_t d = 0; d < channels; ++d) {
        y[t * channels + d] += kv[k * channels + d] * xv[(t - k) * channels + d];
      }
    }
  }
  return Tensor({length, channels}, std::move(y));
}

Tensor selective_ssm_forward(const Tensor& x, const SelectiveSsmParams& p, ScanMode mode) {
  if (mode == ScanMode::kConvolution) {
    throw ContractError("selective parameters vary per token; convolution mode does not apply");
  }
  const SelectiveProjections proj = selective_projections(x, p);
  const DiscretizedParams dp = discretize_zoh(p.a(), proj.b, proj.delta);
  return scan(dp, proj.c, x, mode);
}

}  // namespace mail
