#include "emocause/heads.hpp"

#include <algorithm>

#include "emocause/error.hpp"
#include "emocause/labels.hpp"
#include "emocause/ops.hpp"

namespace emocause {

Variant parse_variant(std::string_view name) {
  if (name == "single_emotion") return Variant::single_emotion;
  if (name == "single_cause") return Variant::single_cause;
  if (name == "multi") return Variant::multi;
  if (name == "multi_c2e") return Variant::multi_c2e;
  if (name == "multi_e2c") return Variant::multi_e2c;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected single_emotion, single_cause, multi, multi_c2e or multi_e2c)");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::single_emotion: return "single_emotion";
    case Variant::single_cause: return "single_cause";
    case Variant::multi: return "multi";
    case Variant::multi_c2e: return "multi_c2e";
    case Variant::multi_e2c: return "multi_e2c";
  }
  throw ConfigError("invalid variant value");
}

bool has_emotion_task(Variant variant) { return variant != Variant::single_cause; }
bool has_cause_task(Variant variant) { return variant != Variant::single_emotion; }
bool is_multi_task(Variant variant) { return has_emotion_task(variant) && has_cause_task(variant); }

void HeadConfig::validate() const {
  if (is_multi_task(variant) && !(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("head dropout must lie in [0, 1)");
  if (variant == Variant::multi_e2c && emotion_embedding_dim == 0) {
    throw ConfigError("emotion embedding dimension must be positive");
  }
}

namespace {

bool uses_attention_pooler(const HeadConfig& c) {
  return has_emotion_task(c.variant) && c.variant != Variant::multi_c2e && c.pooler == PoolMode::attention;
}

}  // namespace

void init_head_params(ParamStore& params, const HeadConfig& config, std::size_t d_model, Rng& rng,
                      double scale) {
  config.validate();
  const std::size_t d = d_model;
  if (uses_attention_pooler(config)) {
    params.add_uniform("W_a", {1, d}, scale, rng);
    params.add_constant("b_a", {1}, 0.0);
  }
  if (has_emotion_task(config.variant)) {
    params.add_uniform("W_e", {kNumEmotions, d}, scale, rng);
    params.add_constant("b_e", {kNumEmotions}, 0.0);
  }
  if (config.variant == Variant::multi_e2c) {
    const std::size_t de = config.emotion_embedding_dim;
    params.add_uniform("W_c'", {kNumCauseTags, d + de}, scale, rng);
    params.add_constant("b_c'", {kNumCauseTags}, 0.0);
    params.add_uniform("E", {kNumEmotions, de}, scale, rng);
  } else if (has_cause_task(config.variant)) {
    params.add_uniform("W_c", {kNumCauseTags, d}, scale, rng);
    params.add_constant("b_c", {kNumCauseTags}, 0.0);
  }
}

TaskParamSplit task_specific_params(const HeadConfig& config, bool teacher_forcing) {
  TaskParamSplit split;
  const bool attn = uses_attention_pooler(config);
  switch (config.variant) {
    case Variant::single_emotion:
    case Variant::single_cause:
      break;
    case Variant::multi:
      split.cause_only = {"W_c", "b_c"};
      split.emotion_only = {"W_e", "b_e"};
      if (attn) split.emotion_only.insert(split.emotion_only.end(), {"W_a", "b_a"});
      break;
    case Variant::multi_c2e:
      split.emotion_only = {"W_e", "b_e"};
      // Free-running attention routes the emotion loss through W_c.
      if (teacher_forcing) split.cause_only = {"W_c", "b_c"};
      break;
    case Variant::multi_e2c:
      split.cause_only = {"W_c'", "b_c'", "E"};
      // Free-running tagging reads the predicted emotion distribution.
      if (teacher_forcing) {
        split.emotion_only = {"W_e", "b_e"};
        if (attn) split.emotion_only.insert(split.emotion_only.end(), {"W_a", "b_a"});
      }
      break;
  }
  return split;
}

ScoreOutput emotion_scores(const Tensor& pooled, const Tensor& w_e, const Tensor& b_e) {
  ScoreOutput out;
  out.logits = add_row(matmul_nt(pooled, w_e), b_e);
  out.probs = softmax(out.logits, 1);
  out.log_probs = log_softmax(out.logits, 1);
  return out;
}

ScoreOutput cause_scores(const Tensor& hidden, const Tensor& w_c, const Tensor& b_c) {
  ScoreOutput out;
  out.logits = add_row(matmul_nt(hidden, w_c), b_c);
  out.probs = softmax(out.logits, 1);
  out.log_probs = log_softmax(out.logits, 1);
  return out;
}

Tensor nll_emotion(const Tensor& log_probs, std::span<const std::size_t> gold) {
  if (gold.empty()) throw DataError("nll_emotion: empty batch");
  if (log_probs.rows() != gold.size()) {
    throw DataError("nll_emotion: " + std::to_string(log_probs.rows()) + " predictions for " +
                    std::to_string(gold.size()) + " labels");
  }
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  entries.reserve(gold.size());
  for (std::size_t j = 0; j < gold.size(); ++j) entries.emplace_back(j, gold[j]);
  return scale(sum(pick(log_probs, entries)), -1.0 / static_cast<double>(gold.size()));
}

Tensor nll_cause(std::span<const Tensor> log_probs, std::span<const std::vector<int>> gold_tags) {
  if (log_probs.empty()) throw DataError("nll_cause: empty batch");
  if (log_probs.size() != gold_tags.size()) throw DataError("nll_cause: predictions and gold differ in count");
  std::vector<Tensor> picked;
  for (std::size_t j = 0; j < log_probs.size(); ++j) {
    if (log_probs[j].rows() != gold_tags[j].size()) {
      throw DataError("nll_cause: sentence " + std::to_string(j) + " has " + std::to_string(log_probs[j].rows()) +
                      " scored rows but " + std::to_string(gold_tags[j].size()) + " tags");
    }
    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for (std::size_t i = 0; i < gold_tags[j].size(); ++i) {
      const int tag = gold_tags[j][i];
      if (tag == kIgnoreTag) continue;
      if (tag < 0 || static_cast<std::size_t>(tag) >= kNumCauseTags) throw DataError("nll_cause: bad tag id");
      entries.emplace_back(i, static_cast<std::size_t>(tag));
    }
    if (!entries.empty()) picked.push_back(pick(log_probs[j], entries));
  }
  if (picked.empty()) throw DataError("nll_cause: every token is ignored");
  return scale(sum(concat_rows(picked)), -1.0 / static_cast<double>(log_probs.size()));
}

Tensor combine_losses(const Tensor& nll_e, const Tensor& nll_c, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return add(scale(nll_e, lambda), scale(nll_c, 1.0 - lambda));
}

Tensor cause_attention(const Tensor& cause_probability) { return softmax(cause_probability, 0); }

Tensor cause_probability(const Tensor& tag_probs) {
  return add_scalar(scale(slice_cols(tag_probs, static_cast<std::size_t>(kTagOutside), 1), -1.0), 1.0);
}

Tensor gold_cause_indicator(std::span<const int> tags) {
  if (tags.empty()) throw DataError("gold_cause_indicator: no tags");
  std::vector<double> values(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    values[i] = (tags[i] == kTagBegin || tags[i] == kTagInside) ? 1.0 : 0.0;
  }
  return Tensor::from_data({tags.size(), 1}, std::move(values));
}

Tensor emotion_memory(const Tensor& emotion_probs, const Tensor& embeddings) {
  return matmul(emotion_probs, embeddings);
}

Tensor one_hot_emotion(std::size_t gold) {
  if (gold >= kNumEmotions) throw DataError("emotion index " + std::to_string(gold) + " out of range");
  std::vector<double> v(kNumEmotions, 0.0);
  v[gold] = 1.0;
  return Tensor::row(std::move(v));
}

}  // namespace emocause
