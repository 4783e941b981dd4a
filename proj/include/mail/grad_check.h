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
#include <functional>
#include <vector>

#include "mail/tensor.h"

namespace mail {

/// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-8)
/// for a scalar function at `point`. Throws ContractError if f is non-finite
/// at any probe.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double h = 1e-5);

/// Same measure with respect to trainable leaves that `f` closes over. Each
/// leaf is perturbed in place and restored. `coords_per_tensor` caps how many
/// (evenly spaced) coordinates of each leaf are probed; 0 means all. `floor`
/// replaces the 1e-8 in the denominator.
double grad_check_parameters(const std::function<Tensor()>& f,
                             const std::vector<Tensor>& leaves, double h = 1e-5,
                             std::size_t coords_per_tensor = 0, double floor = 1e-8);

}  // namespace mail
