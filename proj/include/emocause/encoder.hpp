#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emocause/ops.hpp"
#include "emocause/params.hpp"
#include "emocause/rng.hpp"
#include "emocause/text.hpp"

namespace emocause {

enum class Activation { gelu, relu };

Activation parse_activation(std::string_view name);
std::string to_string(Activation activation);

// Shape of the from-scratch transformer encoder.
struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_positions = kDefaultPairMaxLen;
  std::size_t vocab_size = 0;
  double dropout_p = 0.1;
  Activation activation = Activation::gelu;
  double layer_norm_eps = 1e-12;

  // ConfigError when dims are zero or d_model % n_heads != 0.
  void validate() const;
};

inline constexpr double kDefaultInitScale = 0.07;

// Adds every encoder parameter under the "encoder." prefix. Weight matrices
// and embeddings are drawn from U[-scale, scale]; dense biases start at 0,
// layer-norm gains at 1 and layer-norm biases at 0.
void init_encoder_params(ParamStore& params, const EncoderConfig& config, Rng& rng,
                         double scale = kDefaultInitScale);

// Hidden states for a batch of inputs packed row-wise: sequence i occupies
// rows [sequences[i].start, +length), one row per unpadded position
// ([CLS] and [SEP] included). Padding never enters the computation.
struct EncoderOutput {
  Tensor hidden;
  std::vector<RowRange> sequences;
};

struct EncoderTrace {
  // Attention probabilities per layer, as produced by self_attention.
  std::vector<std::vector<std::vector<double>>> attention;
};

EncoderOutput encode(std::span<const EncodedInput* const> batch, const ParamStore& params,
                     const EncoderConfig& config, bool training, Rng& rng, EncoderTrace* trace = nullptr);

// Single input: returns H with one row per unpadded position.
Tensor encode(const EncodedInput& input, const ParamStore& params, const EncoderConfig& config, bool training,
              Rng& rng);

}  // namespace emocause
