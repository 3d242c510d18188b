#include "emocause/pooling.hpp"

#include "emocause/error.hpp"
#include "emocause/ops.hpp"

namespace emocause {

PoolMode parse_pool_mode(std::string_view name) {
  if (name == "cls") return PoolMode::cls;
  if (name == "mean") return PoolMode::mean;
  if (name == "max") return PoolMode::max;
  if (name == "attention") return PoolMode::attention;
  throw ConfigError("unknown pooler '" + std::string(name) + "' (expected cls, mean, max or attention)");
}

std::string to_string(PoolMode mode) {
  switch (mode) {
    case PoolMode::cls: return "cls";
    case PoolMode::mean: return "mean";
    case PoolMode::max: return "max";
    case PoolMode::attention: return "attention";
  }
  throw ConfigError("invalid pooler value");
}

Tensor pool(const Tensor& hidden, std::span<const std::size_t> content_rows, PoolMode mode,
            const AttentionPoolParams* attention, Tensor* alpha) {
  if (mode == PoolMode::cls) return slice_rows(hidden, 0, 1);
  if (content_rows.empty()) throw DataError("pooling needs at least one content token");
  const Tensor content = gather_rows(hidden, content_rows);
  switch (mode) {
    case PoolMode::mean: return mean_rows(content);
    case PoolMode::max: return max_rows(content);
    case PoolMode::attention: {
      if (!attention || !attention->weight.defined() || !attention->bias.defined()) {
        throw ConfigError("attention pooling requires W_a and b_a");
      }
      const Tensor scores = add_row(matmul_nt(content, attention->weight), attention->bias);
      const Tensor weights = softmax(scores, 0);
      if (alpha) *alpha = weights;
      return matmul(transpose(weights), content);
    }
    case PoolMode::cls: break;
  }
  throw ConfigError("invalid pooler value");
}

}  // namespace emocause
