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

// Reference loops. No parallelism, no blocking, no reordering.

namespace mail::kernels::serial {

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t k,
             std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void causal_conv(const double* x, const double* kernel, const double* bias,
                 double* y, std::size_t batch, std::size_t length,
                 std::size_t channels, std::size_t width) {
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t l = 0; l < length; ++l) {
      for (std::size_t d = 0; d < channels; ++d) {
        double s = bias[d];
        for (std::size_t w = 0; w < width; ++w) {
          const long src = static_cast<long>(l) - static_cast<long>(width) + 1 +
                           static_cast<long>(w);
          if (src < 0) continue;
          s += kernel[w * channels + d] *
               x[(bi * length + static_cast<std::size_t>(src)) * channels + d];
        }
        y[(bi * length + l) * channels + d] = s;
      }
    }
  }
}

void scan(const double* a, const double* b, const double* x, const double* c,
          double* h, double* y, const ScanDims& dims) {
  const auto [batch, length, channels, state] = dims;
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t d = 0; d < channels; ++d) {
      for (std::size_t n = 0; n < state; ++n) {
        double hv = 0.0;
        for (std::size_t l = 0; l < length; ++l) {
          const std::size_t row = bi * length + l;
          const std::size_t idx = (row * channels + d) * state + n;
          hv = a[idx] * hv + b[idx] * x[row * channels + d];
          h[idx] = hv;
        }
      }
    }
    for (std::size_t l = 0; l < length; ++l) {
      const std::size_t row = bi * length + l;
      for (std::size_t d = 0; d < channels; ++d) {
        double acc = 0.0;
        for (std::size_t n = 0; n < state; ++n) {
          acc += c[row * state + n] * h[(row * channels + d) * state + n];
        }
        y[row * channels + d] = acc;
      }
    }
  }
}

}  // namespace mail::kernels::serial
