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

#include "mail/tensor.h"

#include <atomic>
#include <sstream>
#include <utility>

namespace mail {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (mail::numel(shape) != data.size()) {
    throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                         std::to_string(mail::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = mail::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  return Tensor(std::move(shape), std::move(data), true);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("index rank mismatch for shape " + to_string(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for shape " + to_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data, requires_grad()); }

// ---------------------------------------------------------------------------

namespace {

std::atomic<std::uint64_t> g_next_serial{1};
thread_local GradientTape* t_active = nullptr;

}  // namespace

Tensor Gradients::of(const Tensor& leaf) const {
  auto it = grads_.find(leaf.impl());
  if (it == grads_.end() || it->second.empty()) return Tensor::zeros(leaf.shape());
  return Tensor(leaf.shape(), it->second);
}

bool Gradients::contains(const Tensor& leaf) const { return grads_.count(leaf.impl()) > 0; }

GradientTape::GradientTape() : serial_(g_next_serial++), previous_(t_active) {
  t_active = this;
}

GradientTape::~GradientTape() { t_active = previous_; }

GradientTape* GradientTape::active() { return t_active; }

GradientTape* GradientTape::recording(std::initializer_list<const Tensor*> inputs) {
  GradientTape* tape = t_active;
  if (tape == nullptr) return nullptr;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && tape->tracks(*t)) return tape;
  }
  return nullptr;
}

bool GradientTape::tracks(const Tensor& t) const {
  const TensorImpl* impl = t.impl();
  if (impl == nullptr) return false;
  if (impl->tape_serial == serial_) return true;
  return impl->requires_grad;
}

int GradientTape::lookup(const Tensor& t) const {
  const TensorImpl* impl = t.impl();
  if (impl == nullptr) return -1;
  if (impl->tape_serial == serial_) return impl->tape_id;
  auto it = leaves_.find(impl);
  return it == leaves_.end() ? -1 : it->second;
}

int GradientTape::id_of(const Tensor& t) {
  if (!t.defined() || !tracks(t)) return -1;
  const int known = lookup(t);
  if (known >= 0) return known;
  const int id = static_cast<int>(sizes_.size());
  sizes_.push_back(t.numel());
  leaves_.emplace(t.impl(), id);
  return id;
}

void GradientTape::record_ids(std::vector<int> ids, const Tensor& output,
                              BackwardFn backward) {
  if (consumed_) throw TapeError("recording on a consumed gradient tape");
  const int out = static_cast<int>(sizes_.size());
  sizes_.push_back(output.numel());
  output.impl()->tape_serial = serial_;
  output.impl()->tape_id = out;
  ops_.push_back(Op{std::move(ids), out, std::move(backward)});
}

void GradientTape::record(std::initializer_list<const Tensor*> inputs,
                          const Tensor& output, BackwardFn backward) {
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const Tensor* t : inputs) ids.push_back(t == nullptr ? -1 : id_of(*t));
  record_ids(std::move(ids), output, std::move(backward));
}

void GradientTape::record(const std::vector<Tensor>& inputs, const Tensor& output,
                          BackwardFn backward) {
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const Tensor& t : inputs) ids.push_back(id_of(t));
  record_ids(std::move(ids), output, std::move(backward));
}

Gradients GradientTape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward called twice on one gradient tape");
  if (!loss.defined() || loss.numel() != 1) {
    throw TapeError("backward needs a scalar loss, got shape " +
                    (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  const int loss_id = lookup(loss);
  if (loss_id < 0) throw TapeError("loss was not produced on this gradient tape");
  consumed_ = true;

  std::vector<std::vector<double>> grads(sizes_.size());
  grads[loss_id].assign(1, 1.0);
  std::vector<std::vector<double>*> slots;
  for (auto op = ops_.rbegin(); op != ops_.rend(); ++op) {
    std::vector<double>& gout = grads[op->output];
    if (gout.empty()) continue;
    slots.assign(op->inputs.size(), nullptr);
    for (std::size_t i = 0; i < op->inputs.size(); ++i) {
      const int id = op->inputs[i];
      if (id < 0) continue;
      if (grads[id].empty()) grads[id].assign(sizes_[id], 0.0);
      slots[i] = &grads[id];
    }
    op->backward(gout, slots);
    // intermediate gradients are dead once propagated
    std::vector<double>().swap(gout);
    op->backward = nullptr;
  }

  Gradients result;
  for (const auto& [impl, id] : leaves_) result.grads_.emplace(impl, std::move(grads[id]));
  ops_.clear();
  return result;
}

Gradients backward(GradientTape& tape, const Tensor& loss) { return tape.backward(loss); }

}  // namespace mail
