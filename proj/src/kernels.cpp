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

#include "mail/kernels.h"

#include <algorithm>
#include <cstddef>
#include <vector>

#include <omp.h>

namespace mail::kernels {
namespace {

using Index = std::ptrdiff_t;

// Below this much work the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = ci[j];
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t k,
             std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void causal_conv(const double* x, const double* kernel, const double* bias,
                 double* y, std::size_t batch, std::size_t length,
                 std::size_t channels, std::size_t width) {
  const std::size_t rows = batch * length;
#pragma omp parallel for schedule(static) if (rows * channels * width > kParallelWork)
  for (Index r = 0; r < static_cast<Index>(rows); ++r) {
    const std::size_t l = static_cast<std::size_t>(r) % length;
    const double* xb = x + (r - static_cast<Index>(l)) * channels;
    double* yr = y + r * channels;
    for (std::size_t d = 0; d < channels; ++d) yr[d] = bias[d];
    for (std::size_t w = 0; w < width; ++w) {
      // source position l - width + 1 + w, skipped when left of the sequence
      if (l + 1 + w < width) continue;
      const std::size_t src = l + 1 + w - width;
      const double* xs = xb + src * channels;
      const double* kw = kernel + w * channels;
      for (std::size_t d = 0; d < channels; ++d) yr[d] += kw[d] * xs[d];
    }
  }
}

void causal_conv_backward(const double* x, const double* kernel,
                          const double* grad_y, double* grad_x,
                          double* grad_kernel, double* grad_bias,
                          std::size_t batch, std::size_t length,
                          std::size_t channels, std::size_t width) {
  const std::size_t rows = batch * length;
  const bool big = rows * channels * width > kParallelWork;
  if (grad_x != nullptr) {
#pragma omp parallel for schedule(static) if (big)
    for (Index r = 0; r < static_cast<Index>(rows); ++r) {
      const std::size_t l = static_cast<std::size_t>(r) % length;
      const double* gyb = grad_y + (r - static_cast<Index>(l)) * channels;
      double* gx = grad_x + r * channels;
      for (std::size_t w = 0; w < width; ++w) {
        // output position that read x[l] through tap w
        const std::size_t dst = l + width - 1 - w;
        if (dst >= length) continue;
        const double* gy = gyb + dst * channels;
        const double* kw = kernel + w * channels;
        for (std::size_t d = 0; d < channels; ++d) gx[d] += kw[d] * gy[d];
      }
    }
  }
  if (grad_kernel != nullptr || grad_bias != nullptr) {
#pragma omp parallel for schedule(static) if (big)
    for (Index di = 0; di < static_cast<Index>(channels); ++di) {
      const std::size_t d = static_cast<std::size_t>(di);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t l = r % length;
        const double gy = grad_y[r * channels + d];
        if (grad_bias != nullptr) grad_bias[d] += gy;
        if (grad_kernel == nullptr) continue;
        for (std::size_t w = 0; w < width; ++w) {
          if (l + 1 + w < width) continue;
          const std::size_t src = r - l + (l + 1 + w - width);
          grad_kernel[w * channels + d] += gy * x[src * channels + d];
        }
      }
    }
  }
}

void scan_sequential(const double* a, const double* b, const double* x,
                     const double* c, double* h, double* y, const ScanDims& dims) {
  const auto [batch, length, channels, state] = dims;
  const std::size_t lanes = batch * channels;
#pragma omp parallel for schedule(static) if (lanes * length * state > kParallelWork)
  for (Index lane = 0; lane < static_cast<Index>(lanes); ++lane) {
    const std::size_t bi = static_cast<std::size_t>(lane) / channels;
    const std::size_t d = static_cast<std::size_t>(lane) % channels;
    for (std::size_t l = 0; l < length; ++l) {
      const std::size_t row = bi * length + l;
      const std::size_t base = (row * channels + d) * state;
      const double xv = x[row * channels + d];
      const double* cl = c + row * state;
      double acc = 0.0;
      for (std::size_t n = 0; n < state; ++n) {
        const double prev = l == 0 ? 0.0 : h[base - channels * state + n];
        const double hv = a[base + n] * prev + b[base + n] * xv;
        h[base + n] = hv;
        acc += cl[n] * hv;
      }
      y[row * channels + d] = acc;
    }
  }
}

void scan_blelloch(const double* a, const double* b, const double* x,
                   const double* c, double* h, double* y, const ScanDims& dims) {
  const auto [batch, length, channels, state] = dims;
  const std::size_t lanes = batch * channels;
  const std::size_t span = next_pow2(length);
  const std::size_t stride_l = channels * state;
#pragma omp parallel if (lanes * length * state > kParallelWork)
  {
    std::vector<double> mul(span);
    std::vector<double> add(span);
#pragma omp for schedule(static)
    for (Index lane = 0; lane < static_cast<Index>(lanes); ++lane) {
      const std::size_t bi = static_cast<std::size_t>(lane) / channels;
      const std::size_t d = static_cast<std::size_t>(lane) % channels;
      const std::size_t row0 = bi * length;
      for (std::size_t n = 0; n < state; ++n) {
        const std::size_t base = (row0 * channels + d) * state + n;
        for (std::size_t l = 0; l < span; ++l) {
          if (l < length) {
            mul[l] = a[base + l * stride_l];
            add[l] = b[base + l * stride_l] * x[(row0 + l) * channels + d];
          } else {
            mul[l] = 1.0;
            add[l] = 0.0;
          }
        }
        // up-sweep: node i accumulates its subtree, later element on the left
        for (std::size_t step = 1; step < span; step <<= 1) {
          for (std::size_t i = 2 * step - 1; i < span; i += 2 * step) {
            const std::size_t j = i - step;
            add[i] = mul[i] * add[j] + add[i];
            mul[i] = mul[i] * mul[j];
          }
        }
        // down-sweep to exclusive prefixes
        mul[span - 1] = 1.0;
        add[span - 1] = 0.0;
        for (std::size_t step = span >> 1; step >= 1; step >>= 1) {
          for (std::size_t i = 2 * step - 1; i < span; i += 2 * step) {
            const std::size_t j = i - step;
            const double pm = mul[i];
            const double pa = add[i];
            const double lm = mul[j];
            const double la = add[j];
            mul[j] = pm;
            add[j] = pa;
            mul[i] = lm * pm;
            add[i] = lm * pa + la;
          }
        }
        // inclusive state: h = a * (exclusive offset) + b * x, with h[-1] = 0
        for (std::size_t l = 0; l < length; ++l) {
          const std::size_t idx = base + l * stride_l;
          h[idx] = a[idx] * add[l] + b[idx] * x[(row0 + l) * channels + d];
        }
      }
      for (std::size_t l = 0; l < length; ++l) {
        const std::size_t row = row0 + l;
        const double* hl = h + (row * channels + d) * state;
        const double* cl = c + row * state;
        double acc = 0.0;
        for (std::size_t n = 0; n < state; ++n) acc += cl[n] * hl[n];
        y[row * channels + d] = acc;
      }
    }
  }
}

void scan_backward(const double* a, const double* b, const double* x,
                   const double* c, const double* h, const double* grad_y,
                   double* grad_a, double* grad_b, double* grad_x,
                   double* grad_c, const ScanDims& dims) {
  const auto [batch, length, channels, state] = dims;
  const std::size_t rows = batch * length;
  const bool big = rows * channels * state > kParallelWork;
  if (grad_c != nullptr) {
#pragma omp parallel for schedule(static) if (big)
    for (Index r = 0; r < static_cast<Index>(rows); ++r) {
      const double* gy = grad_y + r * channels;
      const double* hr = h + r * channels * state;
      double* gc = grad_c + r * state;
      for (std::size_t d = 0; d < channels; ++d) {
        for (std::size_t n = 0; n < state; ++n) gc[n] += gy[d] * hr[d * state + n];
      }
    }
  }
  if (grad_a == nullptr && grad_b == nullptr && grad_x == nullptr) return;
  const std::size_t lanes = batch * channels;
  const std::size_t stride_l = channels * state;
#pragma omp parallel if (big)
  {
    std::vector<double> carry(state);
#pragma omp for schedule(static)
    for (Index lane = 0; lane < static_cast<Index>(lanes); ++lane) {
      const std::size_t bi = static_cast<std::size_t>(lane) / channels;
      const std::size_t d = static_cast<std::size_t>(lane) % channels;
      std::fill(carry.begin(), carry.end(), 0.0);
      for (std::size_t li = length; li-- > 0;) {
        const std::size_t row = bi * length + li;
        const std::size_t base = (row * channels + d) * state;
        const double gy = grad_y[row * channels + d];
        const double xv = x[row * channels + d];
        const double* cl = c + row * state;
        double gx = 0.0;
        for (std::size_t n = 0; n < state; ++n) {
          const double dh = cl[n] * gy + carry[n];
          if (grad_a != nullptr && li > 0) grad_a[base + n] += dh * h[base - stride_l + n];
          if (grad_b != nullptr) grad_b[base + n] += dh * xv;
          gx += dh * b[base + n];
          carry[n] = a[base + n] * dh;
        }
        if (grad_x != nullptr) grad_x[row * channels + d] += gx;
      }
    }
  }
}

}  // namespace mail::kernels
