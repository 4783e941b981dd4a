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
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mail {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand extents do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is called outside its contract (wrong mode,
/// unstable parameters, out-of-range indices).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Misuse of a gradient tape (non-scalar loss, second backward pass).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Identity on the tape that produced this tensor, if any.
  std::uint64_t tape_serial = 0;
  int tape_id = -1;
};

/// Dense row-major double tensor. Copies share storage; values are treated as
/// immutable once an op has produced them. Leaves created with
/// `requires_grad` are the parameters a GradientTape differentiates against.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Trainable leaf.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::span<const double> data() const;
  /// Write access for optimizers and loaders. Never use while a tape that saw
  /// this tensor is still alive.
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_ != nullptr && impl_->requires_grad; }
  /// Fresh, untracked copy of the values.
  Tensor detach() const;
  /// Fresh copy with its own storage, keeping the requires_grad flag.
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

class GradientTape;

/// Result of one backward pass: dloss/dleaf for every tracked leaf.
class Gradients {
 public:
  /// Gradient with the leaf's shape; zeros when the leaf did not influence the
  /// loss.
  Tensor of(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;

 private:
  friend class GradientTape;
  std::unordered_map<const TensorImpl*, std::vector<double>> grads_;
};

/// Records differentiable ops executed on this thread while alive. Tapes nest;
/// the innermost one records. Single-threaded, single use.
class GradientTape {
 public:
  /// grad_in[i] is null when input i is not tracked; buffers accumulate.
  using BackwardFn = std::function<void(std::span<const double> grad_out,
                                        std::span<std::vector<double>* const> grad_in)>;

  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  /// Innermost live tape on this thread, or null.
  static GradientTape* active();
  /// The active tape when it tracks at least one of `inputs`, else null.
  static GradientTape* recording(std::initializer_list<const Tensor*> inputs);

  bool tracks(const Tensor& t) const;
  void record(std::initializer_list<const Tensor*> inputs, const Tensor& output,
              BackwardFn backward);
  void record(const std::vector<Tensor>& inputs, const Tensor& output,
              BackwardFn backward);

  Gradients backward(const Tensor& loss);
  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Op {
    std::vector<int> inputs;
    int output;
    BackwardFn backward;
  };
  int id_of(const Tensor& t);
  int lookup(const Tensor& t) const;
  void record_ids(std::vector<int> ids, const Tensor& output, BackwardFn backward);

  std::uint64_t serial_;
  GradientTape* previous_;
  bool consumed_ = false;
  std::vector<Op> ops_;
  std::vector<std::size_t> sizes_;
  std::unordered_map<const TensorImpl*, int> leaves_;
};

Gradients backward(GradientTape& tape, const Tensor& loss);

}  // namespace mail
