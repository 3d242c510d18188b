#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "emocause/rng.hpp"
#include "emocause/tensor.hpp"

// Differentiable primitives. Unless noted otherwise, operands are rank-2
// tensors laid out row-major.
namespace emocause {

// a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m×k] · b[n×k]ᵀ, the dense-layer product with weights stored [out×in].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
// x[r×c] + row[1×c] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& row);

// Sum of all elements, shape {1}.
Tensor sum(const Tensor& x);
// Column-wise mean / max over rows: [r×c] -> [1×c].
Tensor mean_rows(const Tensor& x);
Tensor max_rows(const Tensor& x);

// Max-subtracted softmax along `axis` (any rank). NaN input -> NumericError.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// Row-wise normalisation with affine gain/bias of length cols.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Inverted dropout. p outside [0,1) -> ConfigError. Identity when !training.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
// Rows may repeat (embedding lookup); gradients accumulate.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// [1×c] -> [n×c].
Tensor repeat_rows(const Tensor& row, std::size_t n);
// Entries x[r, c] for each (r, c) pair as an [m×1] column.
Tensor pick(const Tensor& x, std::span<const std::pair<std::size_t, std::size_t>> entries);

// A contiguous run of rows [start, start+length) forming one sequence inside
// a packed batch.
struct RowRange {
  std::size_t start = 0;
  std::size_t length = 0;
};

// Multi-head scaled dot-product self-attention over packed sequences.
// q, k, v are [T×d]; each head uses a d/n_heads column block. Rows attend
// only to rows of the same sequence. When `probabilities` is non-null it
// receives one row-major [len×len] matrix per (sequence, head), sequence
// major.
Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                      std::span<const RowRange> sequences, std::size_t n_heads,
                      std::vector<std::vector<double>>* probabilities = nullptr);

}  // namespace emocause
