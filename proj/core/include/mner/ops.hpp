#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mner/tensor.hpp"

namespace mner {

// Elementwise arithmetic. `b` may broadcast when its shape is a trailing
// suffix of `a`'s shape (e.g. a bias row added to every row of a matrix).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x [n x in] * W [in x out] + b [out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
// tanh approximation
Tensor gelu(const Tensor& x);

// Axis may be negative (counted from the end).
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);
// Reduces `axis`; a rank-1 input yields shape [1].
Tensor log_sum_exp(const Tensor& x, int axis = -1);
Tensor mean(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Inverted dropout: survivors are scaled by 1/(1-p); identity when !train or p == 0.
Tensor dropout(const Tensor& x, double p, bool train, std::mt19937_64& rng);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor reshape(const Tensor& x, Shape shape);
// Contiguous row / column ranges of a matrix.
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);

// Rows of `table` selected by `indices`: [indices.size() x table.dim(1)].
Tensor embedding_gather(const Tensor& table, std::span<const std::size_t> indices);
// Elements by flat row-major index: [indices.size()].
Tensor take(const Tensor& x, std::span<const std::size_t> flat_indices);

// Each row divided by max(||row||, eps). Throws NumericError on an exactly zero row.
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

// Single-image 2-D convolution. x [Cin x H x W], weight [Cout x Cin x k x k], bias [Cout].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding);

// Splits [C x H x W] into non-overlapping P x P patches in row-major patch
// order; each row is the patch flattened as (channel, row, col).
Tensor patchify(const Tensor& image, std::size_t patch);

}  // namespace mner
