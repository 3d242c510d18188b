#pragma once

#include <span>
#include <string>
#include <string_view>

#include "emocause/tensor.hpp"

namespace emocause {

enum class PoolMode { cls, mean, max, attention };

PoolMode parse_pool_mode(std::string_view name);
std::string to_string(PoolMode mode);

// Trainable scorer for attention pooling: weight [1×d], bias [1].
struct AttentionPoolParams {
  Tensor weight;
  Tensor bias;
};

// Reduces hidden states H [T×d] to one [1×d] vector. `cls` selects row 0;
// the other modes reduce over `content_rows`, which must be non-empty.
// Attention mode scores each content row with weight·h + bias and pools with
// the softmax of those scores; the weights are written to `alpha` ([n×1])
// when it is non-null.
Tensor pool(const Tensor& hidden, std::span<const std::size_t> content_rows, PoolMode mode,
            const AttentionPoolParams* attention = nullptr, Tensor* alpha = nullptr);

}  // namespace emocause
