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

#include "mail/params.h"

#include <stdexcept>
#include <utility>

namespace mail {

void ParameterList::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name " + name);
  items_.push_back({std::move(name), std::move(tensor)});
}

std::vector<Tensor> ParameterList::trainable() const {
  std::vector<Tensor> out;
  for (const auto& item : items_) {
    if (item.tensor.requires_grad()) out.push_back(item.tensor);
  }
  return out;
}

const Tensor* ParameterList::find(const std::string& name) const {
  for (const auto& item : items_) {
    if (item.name == name) return &item.tensor;
  }
  return nullptr;
}

std::size_t ParameterList::count() const {
  std::size_t n = 0;
  for (const auto& item : items_) {
    if (item.tensor.requires_grad()) n += item.tensor.numel();
  }
  return n;
}

std::map<std::string, std::size_t> ParameterList::count_by_module() const {
  std::map<std::string, std::size_t> out;
  for (const auto& item : items_) {
    if (!item.tensor.requires_grad()) continue;
    out[item.name.substr(0, item.name.find('.'))] += item.tensor.numel();
  }
  return out;
}

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor constant_parameter(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, value));
}

}  // namespace mail
