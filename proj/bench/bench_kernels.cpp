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

// Times the OpenMP kernels against their serial references.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "mail/kernels.h"
#include "mail/rng.h"

using namespace mail;

namespace {

double seconds_per_call(const std::function<void()>& fn, int reps) {
  fn();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / reps;
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void row(const char* name, const char* size, double serial, double parallel, double diff) {
  std::printf("%-14s %-22s %12.3f %12.3f %8.2fx %10.1e\n", name, size, serial * 1e3, parallel * 1e3, serial / parallel, diff);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-14s %-22s %12s %12s %9s %10s\n", "kernel", "size", "serial ms", "openmp ms", "speedup", "max diff");
  Rng rng(1);

  for (std::size_t n : {64, 128, 256}) {
    const auto a = random_vector(n * n, rng), b = random_vector(n * n, rng);
    std::vector<double> c1(n * n), c2(n * n);
    const int reps = n <= 128 ? 20 : 5;
    const double ts = seconds_per_call([&] { std::fill(c1.begin(), c1.end(), 0.0); kernels::serial::gemm(a.data(), b.data(), c1.data(), n, n, n); }, reps);
    const double tp = seconds_per_call([&] { std::fill(c2.begin(), c2.end(), 0.0); kernels::gemm(a.data(), b.data(), c2.data(), n, n, n); }, reps);
    char size[32];
    std::snprintf(size, sizeof size, "%zux%zux%zu", n, n, n);
    row("gemm", size, ts, tp, max_diff(c1, c2));
  }

  for (std::size_t length : {64, 512}) {
    kernels::ScanDims dims{16, length, 64, 16};
    const std::size_t big = dims.batch * length * dims.channels * dims.state;
    const auto a = random_vector(big, rng, 0.5, 0.99), b = random_vector(big, rng);
    const auto x = random_vector(dims.batch * length * dims.channels, rng);
    const auto c = random_vector(dims.batch * length * dims.state, rng);
    std::vector<double> h1(big), h2(big), h3(big), y1(dims.batch * length * dims.channels), y2(y1.size()), y3(y1.size());
    const double ts = seconds_per_call([&] { kernels::serial::scan(a.data(), b.data(), x.data(), c.data(), h1.data(), y1.data(), dims); }, 5);
    const double tq = seconds_per_call([&] { kernels::scan_sequential(a.data(), b.data(), x.data(), c.data(), h2.data(), y2.data(), dims); }, 5);
    const double tb = seconds_per_call([&] { kernels::scan_blelloch(a.data(), b.data(), x.data(), c.data(), h3.data(), y3.data(), dims); }, 5);
    char size[32];
    std::snprintf(size, sizeof size, "B16 L%zu D64 N16", length);
    row("scan seq", size, ts, tq, max_diff(y1, y2));
    row("scan blelloch", size, ts, tb, max_diff(y1, y3));
  }

  {
    const std::size_t batch = 32, length = 256, channels = 128, width = 4;
    const auto x = random_vector(batch * length * channels, rng), k = random_vector(width * channels, rng);
    const auto bias = random_vector(channels, rng);
    std::vector<double> y1(x.size()), y2(x.size());
    const double ts = seconds_per_call([&] { kernels::serial::causal_conv(x.data(), k.data(), bias.data(), y1.data(), batch, length, channels, width); }, 10);
    const double tp = seconds_per_call([&] { kernels::causal_conv(x.data(), k.data(), bias.data(), y2.data(), batch, length, channels, width); }, 10);
    row("causal conv", "B32 L256 D128 W4", ts, tp, max_diff(y1, y2));
  }
  return 0;
}
