#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emocause/encoder.hpp"
#include "emocause/heads.hpp"
#include "emocause/knowledge.hpp"
#include "emocause/model.hpp"

namespace emocause {

enum class TargetMetric { emotion_macro_f1, cause_span_f1 };

// Accepts "emotion"/"cause" as well as the full metric names.
TargetMetric parse_target(std::string_view name);
std::string to_string(TargetMetric target);

inline const std::vector<std::uint64_t> kDefaultSeeds = {13, 42, 1234, 2021, 31337};

// Every knob of one experiment. Serialized as a flat JSON object whose keys
// are the field names below.
struct RunConfig {
  // Model.
  Variant variant = Variant::multi;
  PoolMode pooler = PoolMode::cls;
  double lambda = 0.5;
  // Applied to the encoder and to the head inputs.
  double dropout = 0.1;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t emotion_embedding_dim = kDefaultEmotionEmbeddingDim;
  Activation activation = Activation::gelu;
  double init_scale = kDefaultInitScale;
  bool hard_c2e_inference = false;

  // Text and knowledge. `knowledge` is none, lexicon, lexicon:PATH,
  // file:PATH, or corpus (use each example's own knowledge text).
  std::size_t vocab_size = 2000;
  std::size_t max_len = kDefaultSingleMaxLen;
  std::size_t max_len_pair = kDefaultPairMaxLen;
  std::string knowledge = "none";
  Relations relations = Relations::both;
  std::size_t top_k = 2;

  // Data.
  std::uint64_t split_seed = 0;

  // Optimization.
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 5;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  // Empty means: emotion macro F1, or cause span F1 for single_cause.
  std::string target;
  // Global gradient-norm clipping; 0 disables it.
  double clip_norm = 0.0;

  bool uses_knowledge() const { return knowledge != "none"; }
  TargetMetric target_metric() const;
  ModelConfig model_config(std::size_t vocab_entries) const;
  // Throws ConfigError on any out-of-range field.
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);
// Unknown keys -> ConfigError; missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

nlohmann::ordered_json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace emocause
