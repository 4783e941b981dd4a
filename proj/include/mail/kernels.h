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

#pragma once

#include <cstddef>

// Dense numeric kernels behind the tensor ops. Every kernel in `mail::kernels`
// parallelizes with OpenMP over independent outputs only, so each output value
// is produced by one thread in a fixed summation order and results do not
// depend on the thread count. `mail::kernels::serial` holds the plain reference
// loops the parallel versions are tested and benchmarked against.

namespace mail::kernels {

// c[m,n] += a[m,k] * b[k,n]
void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n);
// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
// c[m,n] += a[k,m]^T * b[k,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k,
             std::size_t m, std::size_t n);

// Depthwise causal convolution over x[batch, length, channels] with
// kernel[width, channels]: y[l,d] = bias[d] + sum_w kernel[w,d] x[l-width+1+w, d].
void causal_conv(const double* x, const double* kernel, const double* bias,
                 double* y, std::size_t batch, std::size_t length,
                 std::size_t channels, std::size_t width);
// Accumulates into any non-null gradient buffer.
void causal_conv_backward(const double* x, const double* kernel,
                          const double* grad_y, double* grad_x,
                          double* grad_kernel, double* grad_bias,
                          std::size_t batch, std::size_t length,
                          std::size_t channels, std::size_t width);

struct ScanDims {
  std::size_t batch = 1;
  std::size_t length = 0;
  std::size_t channels = 0;
  std::size_t state = 0;
};

// Diagonal linear recurrence per (batch, channel, state) lane:
//   h[l] = a[l] * h[l-1] + b[l] * x[l],   h[-1] = 0
//   y[l, d] = sum_n c[l, n] * h[l, d, n]
// Layouts: a, b, h: [batch, length, channels, state]; x, y: [batch, length,
// channels]; c: [batch, length, state]. `h` receives every hidden state.
void scan_sequential(const double* a, const double* b, const double* x,
                     const double* c, double* h, double* y, const ScanDims& dims);
// Same recurrence through the associative combine
// (a2, u2) o (a1, u1) = (a2 a1, a2 u1 + u2), evaluated with a work-efficient
// up-sweep/down-sweep over each lane.
void scan_blelloch(const double* a, const double* b, const double* x,
                   const double* c, double* h, double* y, const ScanDims& dims);
// Reverse-mode sweep of the recurrence above. Gradient buffers accumulate and
// may be null.
void scan_backward(const double* a, const double* b, const double* x,
                   const double* c, const double* h, const double* grad_y,
                   double* grad_a, double* grad_b, double* grad_x,
                   double* grad_c, const ScanDims& dims);

namespace serial {

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t k,
             std::size_t m, std::size_t n);
void causal_conv(const double* x, const double* kernel, const double* bias,
                 double* y, std::size_t batch, std::size_t length,
                 std::size_t channels, std::size_t width);
void scan(const double* a, const double* b, const double* x, const double* c,
          double* h, double* y, const ScanDims& dims);

}  // namespace serial
}  // namespace mail::kernels
