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

#include <array>
#include <vector>

#include "doctest.h"
#include "mail/kernels.h"
#include "mail/rng.h"

namespace {

std::vector<double> randoms(std::size_t n, mail::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("parallel gemm variants match the serial reference bitwise") {
  mail::Rng rng(3);
  const std::vector<std::array<std::size_t, 3>> sizes{{3, 4, 2}, {17, 33, 9}, {64, 40, 128}};
  for (auto [m, k, n] : sizes) {
    const auto a = randoms(m * k, rng);
    const auto b = randoms(k * n, rng);
    auto c0 = randoms(m * n, rng);
    auto c1 = c0;
    mail::kernels::gemm(a.data(), b.data(), c0.data(), m, k, n);
    mail::kernels::serial::gemm(a.data(), b.data(), c1.data(), m, k, n);
    CHECK(c0 == c1);

    const auto bt = randoms(n * k, rng);
    auto d0 = randoms(m * n, rng);
    auto d1 = d0;
    mail::kernels::gemm_nt(a.data(), bt.data(), d0.data(), m, k, n);
    mail::kernels::serial::gemm_nt(a.data(), bt.data(), d1.data(), m, k, n);
    CHECK(d0 == d1);

    const auto at = randoms(k * m, rng);
    auto e0 = randoms(m * n, rng);
    auto e1 = e0;
    mail::kernels::gemm_tn(at.data(), b.data(), e0.data(), k, m, n);
    mail::kernels::serial::gemm_tn(at.data(), b.data(), e1.data(), k, m, n);
    CHECK(e0 == e1);
  }
}

TEST_CASE("parallel causal conv matches the serial reference") {
  mail::Rng rng(5);
  const std::size_t batch = 3, length = 11, channels = 6, width = 4;
  const auto x = randoms(batch * length * channels, rng);
  const auto k = randoms(width * channels, rng);
  const auto b = randoms(channels, rng);
  std::vector<double> y0(x.size()), y1(x.size());
  mail::kernels::causal_conv(x.data(), k.data(), b.data(), y0.data(), batch, length, channels, width);
  mail::kernels::serial::causal_conv(x.data(), k.data(), b.data(), y1.data(), batch, length, channels,
                                     width);
  CHECK(y0 == y1);
}

TEST_CASE("scan kernels agree with the serial recurrence") {
  mail::Rng rng(7);
  for (std::size_t length : {1u, 2u, 13u, 16u, 33u}) {
    const mail::kernels::ScanDims dims{2, length, 5, 4};
    const std::size_t big = dims.batch * length * dims.channels * dims.state;
    std::vector<double> a(big), b = randoms(big, rng);
    for (double& v : a) v = rng.uniform(0.0, 1.0);
    const auto x = randoms(dims.batch * length * dims.channels, rng);
    const auto c = randoms(dims.batch * length * dims.state, rng);
    std::vector<double> h_ref(big), y_ref(x.size()), h_seq(big), y_seq(x.size()), h_par(big),
        y_par(x.size());
    mail::kernels::serial::scan(a.data(), b.data(), x.data(), c.data(), h_ref.data(), y_ref.data(), dims);
    mail::kernels::scan_sequential(a.data(), b.data(), x.data(), c.data(), h_seq.data(), y_seq.data(),
                                   dims);
    mail::kernels::scan_blelloch(a.data(), b.data(), x.data(), c.data(), h_par.data(), y_par.data(),
                                 dims);
    CHECK(h_seq == h_ref);
    CHECK(y_seq == y_ref);
    CHECK(max_diff(h_par, h_ref) <= 1e-12);
    CHECK(max_diff(y_par, y_ref) <= 1e-12);
  }
}
