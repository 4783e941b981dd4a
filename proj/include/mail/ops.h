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
#include <vector>

#include "mail/tensor.h"

// Differentiable tensor primitives. Each op records itself on the active
// GradientTape when any input is tracked; otherwise it is a plain forward
// computation. Broadcasting is limited to "suffix" operands: the second
// operand of add/sub/mul may have a shape equal to the trailing dims of the
// first.

namespace mail {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
/// ln(1 + e^x) in the overflow-safe form max(x, 0) + log1p(e^-|x|).
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// x * sigmoid(x)
Tensor silu(const Tensor& a);

/// Sum of all entries, as a rank-0 tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// y[..., j] = sum_i x[..., i] w[i, j] + b[j]; `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor());
/// Batched matrix product over identical leading dims: [..., m, k] x [..., k, n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
/// [..., 1] -> [..., width] by repetition.
Tensor expand_last(const Tensor& a, std::size_t width);
/// Prepends `leading` dims, repeating `a` for each leading index.
Tensor broadcast_leading(const Tensor& a, const Shape& leading);

/// Softmax over the last axis. With `causal`, entry j of query row i is
/// masked when j > i + (keys - queries).
Tensor softmax_last(const Tensor& a, bool causal = false);

/// Per trailing slice: (x - mean) / sqrt(var + eps) * gamma + beta, with the
/// population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// x[..., L, D] convolved per channel with kernels[W, D], zero-padded on the
/// left so y[l] only sees x[l - W + 1 .. l].
Tensor causal_depthwise_conv(const Tensor& x, const Tensor& kernels, const Tensor& bias);

/// Squared Euclidean norm of each item, averaged over the leading (batch)
/// axis: mean_b sum_{rest} (a - b)^2.
Tensor batch_squared_error(const Tensor& prediction, const Tensor& target);

}  // namespace mail
