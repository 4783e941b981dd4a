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
#include <map>
#include <string>
#include <vector>

#include "mail/rng.h"
#include "mail/tensor.h"

namespace mail {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of a network's tensors. Trainable entries are leaves with
/// requires_grad; buffers (normalization constants) are stored alongside them
/// so checkpoints carry both, but they are not counted or optimized.
class ParameterList {
 public:
  void add(std::string name, Tensor tensor);
  const std::vector<NamedTensor>& items() const { return items_; }
  std::vector<Tensor> trainable() const;
  const Tensor* find(const std::string& name) const;
  /// Trainable scalar count.
  std::size_t count() const;
  /// Trainable scalars grouped by the name prefix before the first '.'.
  std::map<std::string, std::size_t> count_by_module() const;

 private:
  std::vector<NamedTensor> items_;
};

/// Entries uniform in [-bound, bound].
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);
Tensor constant_parameter(Shape shape, double value);

}  // namespace mail
