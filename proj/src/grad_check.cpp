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

#include "mail/grad_check.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace mail {
namespace {

double evaluate(const std::function<Tensor()>& f) {
  const double v = f().item();
  if (!std::isfinite(v)) throw ContractError("grad_check: non-finite function value");
  return v;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + floor);
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double h) {
  const Tensor leaf = Tensor::parameter(point.shape(), std::vector<double>(point.data().begin(),
                                                                           point.data().end()));
  return grad_check_parameters([&] { return f(leaf); }, {leaf}, h);
}

double grad_check_parameters(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                             double h, std::size_t coords_per_tensor, double floor) {
  Gradients grads;
  {
    GradientTape tape;
    const Tensor loss = f();
    if (!std::isfinite(loss.item())) throw ContractError("grad_check: non-finite function value");
    grads = tape.backward(loss);
  }
  double worst = 0.0;
  for (Tensor leaf : leaves) {
    const Tensor analytic = grads.of(leaf);
    const std::size_t n = leaf.numel();
    const std::size_t probes = coords_per_tensor == 0 ? n : std::min(n, coords_per_tensor);
    auto values = leaf.mutable_data();
    for (std::size_t p = 0; p < probes; ++p) {
      const std::size_t i = probes == n ? p : p * n / probes;
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate(f);
      values[i] = saved - h;
      const double down = evaluate(f);
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2.0 * h), floor));
    }
  }
  return worst;
}

}  // namespace mail
