// Copyright 2026 The progseq Authors
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

#include "progseq/tensor.hpp"

#include <span>
#include <vector>

namespace progseq {

/// Attention mask: true marks a disallowed (masked-out) position.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor add_scalar(const Tensor& a, Scalar s);
/// a (n x m) + row (1 x m), broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
/// x W + b
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
/// Appends zero rows up to `total_rows`.
Tensor pad_rows(const Tensor& a, Index total_rows);
/// Rows of `table` selected by `ids` (embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

/// Row-wise softmax. Masked entries get exactly zero weight; a row with
/// every entry masked is an error.
Tensor softmax_rows(const Tensor& a, const Mask* mask = nullptr);
Tensor log_softmax_rows(const Tensor& a);
/// Stable log(sum(exp(row))) per row, n x 1.
Tensor logsumexp_rows(const Tensor& a);
/// Per-row normalisation to zero mean and unit variance, then gain and bias
/// (both 1 x m).
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-6);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Scalar negative_slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
/// max(a, lo); gradient passes only where a > lo.
Tensor clamp_min(const Tensor& a, Scalar lo);
/// Clamps to [lo, hi]; gradient passes only inside the interval.
Tensor clamp(const Tensor& a, Scalar lo, Scalar hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column sums over all rows: 1 x m.
Tensor sum_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);
/// Row sums over all columns: n x 1.
Tensor sum_cols(const Tensor& a);

/// Time-axis unfolding for 1D convolution with "same" zero padding:
/// row u of the result is [a[u-k/2], ..., a[u+k/2]] flattened; `kernel` odd.
Tensor unfold_time(const Tensor& a, Index kernel);

}  // namespace progseq
