#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emocause/params.hpp"
#include "emocause/pooling.hpp"
#include "emocause/tensor.hpp"

namespace emocause {

enum class Variant { single_emotion, single_cause, multi, multi_c2e, multi_e2c };

Variant parse_variant(std::string_view name);
std::string to_string(Variant variant);

bool has_emotion_task(Variant variant);
bool has_cause_task(Variant variant);
bool is_multi_task(Variant variant);

inline constexpr std::size_t kDefaultEmotionEmbeddingDim = 300;

struct HeadConfig {
  Variant variant = Variant::multi;
  PoolMode pooler = PoolMode::cls;
  // Weight of the emotion loss; only meaningful for multi-task variants.
  double lambda = 0.5;
  std::size_t emotion_embedding_dim = kDefaultEmotionEmbeddingDim;
  // Dropout on the input of each dense head layer.
  double dropout_p = 0.1;
  // Multi_C→E inference: attend with hard 0/1 cause indicators from the
  // argmax tags instead of the soft 1 − P(O).
  bool hard_c2e_inference = false;

  void validate() const;
};

// Adds the head parameters the variant uses: W_a/b_a (attention pooler),
// W_e/b_e, W_c/b_c, and for Multi_E→C W_c'/b_c' with the emotion embedding
// matrix E. Weights are drawn from U[-scale, scale]; biases start at 0.
void init_head_params(ParamStore& params, const HeadConfig& config, std::size_t d_model, Rng& rng,
                      double scale = 0.07);

// Parameters that only one task's loss can reach, for a given variant and
// forcing mode. Used to check loss-weight gating.
struct TaskParamSplit {
  std::vector<std::string> cause_only;
  std::vector<std::string> emotion_only;
};
TaskParamSplit task_specific_params(const HeadConfig& config, bool teacher_forcing);

struct ScoreOutput {
  Tensor logits;
  Tensor probs;
  Tensor log_probs;
};

// e = softmax(W_e h_f + b_e) for each row of h_f [b×d].
ScoreOutput emotion_scores(const Tensor& pooled, const Tensor& w_e, const Tensor& b_e);
// c_i = softmax(W_c h_i + b_c) for each row of H [n×d]. Also used for the
// Multi_E→C tagger with [h_i ; M] rows and W_c'/b_c'.
ScoreOutput cause_scores(const Tensor& hidden, const Tensor& w_c, const Tensor& b_c);

// −(1/b) Σ_j log e_{j,gold(j)}. Empty batch or size mismatch -> DataError.
Tensor nll_emotion(const Tensor& log_probs, std::span<const std::size_t> gold);

// −(1/b) Σ_j Σ_i log c_{i,j,gold(i,j)}, where b is the number of sentences.
// Tokens whose gold tag is kIgnoreTag are skipped; the token sum is not
// normalised by length. No scored token in the batch -> DataError.
Tensor nll_cause(std::span<const Tensor> log_probs, std::span<const std::vector<int>> gold_tags);

// λ·nll_e + (1−λ)·nll_c; λ outside [0,1] -> ConfigError.
Tensor combine_losses(const Tensor& nll_e, const Tensor& nll_c, double lambda);

// Attention over content tokens from per-token cause probabilities [n×1]:
// α_i = exp(p_i) / Σ_j exp(p_j).
Tensor cause_attention(const Tensor& cause_probability);

// P(Cause|x_i) = 1 − P(O|x_i) from tag probabilities [n×3].
Tensor cause_probability(const Tensor& tag_probs);

// 0/1 indicators from gold token tags (B or I -> 1).
Tensor gold_cause_indicator(std::span<const int> tags);

// M = Σ_k e_k E[k] for e [1×7] and E [7×d_e].
Tensor emotion_memory(const Tensor& emotion_probs, const Tensor& embeddings);

// One-hot row for the gold emotion.
Tensor one_hot_emotion(std::size_t gold);

}  // namespace emocause
