#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nmd/tensor/tensor.hpp"

// Differentiable operations. Elementwise binaries accept exactly matching
// shapes or a single-element operand on either side; anything else throws a
// TensorError naming both shapes. Row-wise operations treat axis 0 as the
// row index and flatten the remaining axes.
namespace nmd {

enum class BinaryKind { add, sub, mul, div };

Tensor elementwise(BinaryKind kind, const Tensor& a, const Tensor& b);
Tensor elementwise(BinaryKind kind, const Tensor& a, double b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double b);
Tensor operator-(const Tensor& a, double b);
Tensor operator*(const Tensor& a, double b);
Tensor operator/(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator-(const Tensor& a);

// Reductions to a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// [m,k]·[k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// x·W + b with b broadcast over rows; x [m,k], W [k,n], b [n].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Batched product [B,m,k]·[B,k,n] -> [B,m,n].
Tensor bmm(const Tensor& a, const Tensor& b);
// [B,m,n] -> [B,n], summing the middle axis.
Tensor sum_axis1(const Tensor& x);
// [m,k] -> [k].
Tensor sum_rows(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
// Per-group arithmetic mean of rows; an empty group yields a zero row.
Tensor mean_agg(const Tensor& values, const std::vector<std::vector<std::size_t>>& groups);
// Column concatenation of two rank-2 tensors with equal row counts.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// K tensors of shape [m,c] -> [m,K,c].
Tensor stack_axis1(const std::vector<Tensor>& parts);
// Multiplies every row of x [m,...] by the matching entry of s [m] or [m,1].
Tensor scale_rows(const Tensor& x, const Tensor& s);

// Row-wise 3-vector geometry on [m,3] tensors.
Tensor cross_rows(const Tensor& a, const Tensor& b);
Tensor norm_rows(const Tensor& v);       // [m,1]
Tensor normalize_rows(const Tensor& v);  // [m,3]

}  // namespace nmd
