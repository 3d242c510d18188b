#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "emocause/encoder.hpp"
#include "emocause/heads.hpp"
#include "emocause/text.hpp"

namespace emocause {

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig heads;
  // Half-width of the uniform weight init.
  double init_scale = kDefaultInitScale;
};

struct ForwardOptions {
  // Enables dropout.
  bool training = false;
  // Multi_C→E attends with the gold span; Multi_E→C tags with the gold
  // emotion. Requires the corresponding gold labels.
  bool teacher_forcing = false;
};

struct BatchOutput {
  // Defined only when gold labels for every active task were supplied.
  Tensor loss;
  Tensor emotion_loss;
  Tensor cause_loss;
  // [b×7]; undefined for single_cause.
  Tensor emotion_probs;
  // Per example, tag distributions [n×3] over its headline positions.
  std::vector<Tensor> tag_probs;
  // Per example pooling weights [n×1] (attention pooler or cause attention).
  std::vector<Tensor> attention;
  // Per example emotion memory M [1×d_e] (Multi_E→C only).
  std::vector<Tensor> memory;
  // Per example headline token positions within the encoded input.
  std::vector<std::vector<std::size_t>> headline_positions;
};

struct Prediction {
  std::size_t emotion = 0;
  std::vector<double> emotion_probs;
  // Argmax tag of each headline word's first subword; O for truncated words.
  std::vector<int> word_tags;
  std::vector<WordSpan> cause_spans;
};

// Shared encoder plus the task heads selected by the variant.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);
  Model(ModelConfig config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // `gold_emotions` is empty or has one label per input. Cause gold comes from
  // the inputs' iob_tags; only first subwords of headline words are scored.
  BatchOutput forward(std::span<const EncodedInput* const> inputs, std::span<const std::size_t> gold_emotions,
                      const ForwardOptions& options, Rng& rng) const;

  // Eval-mode, free-running predictions.
  std::vector<Prediction> predict(std::span<const EncodedInput* const> inputs) const;

 private:
  ModelConfig config_;
  ParamStore params_;
};

}  // namespace emocause
