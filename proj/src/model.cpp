#include "emocause/model.hpp"

#include <algorithm>

#include "emocause/error.hpp"
#include "emocause/labels.hpp"
#include "emocause/ops.hpp"

namespace emocause {

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.encoder.validate();
  config_.heads.validate();
  Rng rng(init_seed);
  init_encoder_params(params_, config_.encoder, rng, config_.init_scale);
  init_head_params(params_, config_.heads, config_.encoder.d_model, rng, config_.init_scale);
}

Model::Model(ModelConfig config, ParamStore params) : config_(std::move(config)), params_(std::move(params)) {
  config_.encoder.validate();
  config_.heads.validate();
}

namespace {

std::vector<int> scored_tags(const EncodedInput& input, std::span<const std::size_t> positions) {
  std::vector<int> tags;
  tags.reserve(positions.size());
  for (std::size_t p : positions) tags.push_back(input.is_first_subword[p] ? input.iob_tags[p] : kIgnoreTag);
  return tags;
}

std::vector<int> raw_tags(const EncodedInput& input, std::span<const std::size_t> positions) {
  std::vector<int> tags;
  tags.reserve(positions.size());
  for (std::size_t p : positions) tags.push_back(input.iob_tags[p]);
  return tags;
}

Tensor argmax_cause_indicator(const Tensor& tag_probs) {
  const std::size_t n = tag_probs.rows();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumCauseTags; ++k) {
      if (tag_probs.at(i, k) > tag_probs.at(i, best)) best = k;
    }
    v[i] = best == static_cast<std::size_t>(kTagOutside) ? 0.0 : 1.0;
  }
  return Tensor::from_data({n, 1}, std::move(v));
}

}  // namespace

BatchOutput Model::forward(std::span<const EncodedInput* const> inputs, std::span<const std::size_t> gold_emotions,
                           const ForwardOptions& options, Rng& rng) const {
  const HeadConfig& hc = config_.heads;
  const Variant variant = hc.variant;
  const std::size_t b = inputs.size();
  if (!gold_emotions.empty() && gold_emotions.size() != b) {
    throw DataError("forward: " + std::to_string(gold_emotions.size()) + " gold emotions for " +
                    std::to_string(b) + " inputs");
  }
  const bool have_emotion_gold = !gold_emotions.empty();
  const bool have_cause_gold =
      std::all_of(inputs.begin(), inputs.end(), [](const EncodedInput* in) { return !in->iob_tags.empty(); });
  if (options.teacher_forcing) {
    if (variant == Variant::multi_c2e && !have_cause_gold) {
      throw DataError("teacher-forced Multi_C→E needs gold cause spans");
    }
    if (variant == Variant::multi_e2c && !have_emotion_gold) {
      throw DataError("teacher-forced Multi_E→C needs gold emotions");
    }
  }

  const EncoderOutput enc = encode(inputs, params_, config_.encoder, options.training, rng);
  BatchOutput out;
  out.tag_probs.resize(b);
  out.attention.resize(b);
  out.memory.resize(b);

  // Headline rows of every example, gathered into one block.
  std::vector<std::size_t> rows;
  std::vector<RowRange> blocks;
  for (std::size_t j = 0; j < b; ++j) {
    out.headline_positions.push_back(inputs[j]->headline_positions());
    const auto& pos = out.headline_positions.back();
    if (pos.empty()) throw DataError("forward: input " + std::to_string(j) + " has no headline tokens");
    blocks.push_back({rows.size(), pos.size()});
    for (std::size_t p : pos) rows.push_back(enc.sequences[j].start + p);
  }
  const Tensor headline = gather_rows(enc.hidden, rows);
  auto block = [&](const Tensor& t, std::size_t j) { return slice_rows(t, blocks[j].start, blocks[j].length); };

  // Emotion distribution from a pooled representation.
  ScoreOutput emotion;
  if (variant == Variant::single_emotion || variant == Variant::multi || variant == Variant::multi_e2c) {
    AttentionPoolParams attn;
    if (hc.pooler == PoolMode::attention) attn = {params_.get("W_a"), params_.get("b_a")};
    std::vector<Tensor> pooled;
    pooled.reserve(b);
    for (std::size_t j = 0; j < b; ++j) {
      const Tensor seq = slice_rows(enc.hidden, enc.sequences[j].start, enc.sequences[j].length);
      Tensor* alpha = hc.pooler == PoolMode::attention ? &out.attention[j] : nullptr;
      pooled.push_back(pool(seq, out.headline_positions[j], hc.pooler, &attn, alpha));
    }
    emotion = emotion_scores(dropout(concat_rows(pooled), hc.dropout_p, options.training, rng),
                             params_.get("W_e"), params_.get("b_e"));
  }

  // Cause tagging.
  ScoreOutput cause;
  if (variant == Variant::multi_e2c) {
    std::vector<Tensor> memory_rows;
    memory_rows.reserve(b);
    for (std::size_t j = 0; j < b; ++j) {
      const Tensor e = options.teacher_forcing ? one_hot_emotion(gold_emotions[j]) : slice_rows(emotion.probs, j, 1);
      out.memory[j] = emotion_memory(e, params_.get("E"));
      memory_rows.push_back(repeat_rows(out.memory[j], blocks[j].length));
    }
    const Tensor parts[] = {headline, concat_rows(memory_rows)};
    cause = cause_scores(dropout(concat_cols(parts), hc.dropout_p, options.training, rng), params_.get("W_c'"),
                         params_.get("b_c'"));
  } else if (has_cause_task(variant)) {
    cause = cause_scores(dropout(headline, hc.dropout_p, options.training, rng), params_.get("W_c"),
                         params_.get("b_c"));
  }
  if (cause.probs.defined()) {
    for (std::size_t j = 0; j < b; ++j) out.tag_probs[j] = block(cause.probs, j);
  }

  // Multi_C→E: emotion from cause-weighted attention over headline tokens.
  if (variant == Variant::multi_c2e) {
    std::vector<Tensor> pooled;
    pooled.reserve(b);
    for (std::size_t j = 0; j < b; ++j) {
      Tensor p_cause;
      if (options.teacher_forcing) {
        p_cause = gold_cause_indicator(raw_tags(*inputs[j], out.headline_positions[j]));
      } else if (hc.hard_c2e_inference) {
        p_cause = argmax_cause_indicator(out.tag_probs[j]);
      } else {
        p_cause = cause_probability(out.tag_probs[j]);
      }
      out.attention[j] = cause_attention(p_cause);
      pooled.push_back(matmul(transpose(out.attention[j]), block(headline, j)));
    }
    emotion = emotion_scores(dropout(concat_rows(pooled), hc.dropout_p, options.training, rng),
                             params_.get("W_e"), params_.get("b_e"));
  }
  if (emotion.probs.defined()) out.emotion_probs = emotion.probs;

  const bool emotion_loss = has_emotion_task(variant) && have_emotion_gold;
  const bool cause_loss = has_cause_task(variant) && have_cause_gold;
  if (emotion_loss) out.emotion_loss = nll_emotion(emotion.log_probs, gold_emotions);
  if (cause_loss) {
    std::vector<Tensor> log_probs;
    std::vector<std::vector<int>> tags;
    for (std::size_t j = 0; j < b; ++j) {
      log_probs.push_back(block(cause.log_probs, j));
      tags.push_back(scored_tags(*inputs[j], out.headline_positions[j]));
    }
    out.cause_loss = nll_cause(log_probs, tags);
  }
  if (is_multi_task(variant)) {
    if (emotion_loss && cause_loss) out.loss = combine_losses(out.emotion_loss, out.cause_loss, hc.lambda);
  } else if (emotion_loss) {
    out.loss = out.emotion_loss;
  } else if (cause_loss) {
    out.loss = out.cause_loss;
  }
  return out;
}

std::vector<Prediction> Model::predict(std::span<const EncodedInput* const> inputs) const {
  NoGradGuard no_grad;
  Rng unused(0);
  const BatchOutput out = forward(inputs, {}, ForwardOptions{}, unused);
  std::vector<Prediction> preds(inputs.size());
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    Prediction& p = preds[j];
    if (out.emotion_probs.defined()) {
      p.emotion_probs.assign(out.emotion_probs.data().begin() + static_cast<std::ptrdiff_t>(j * kNumEmotions),
                             out.emotion_probs.data().begin() + static_cast<std::ptrdiff_t>((j + 1) * kNumEmotions));
      p.emotion = static_cast<std::size_t>(
          std::max_element(p.emotion_probs.begin(), p.emotion_probs.end()) - p.emotion_probs.begin());
    }
    if (out.tag_probs[j].defined()) {
      const EncodedInput& in = *inputs[j];
      p.word_tags.assign(in.headline_words, kTagOutside);
      const auto& pos = out.headline_positions[j];
      for (std::size_t i = 0; i < pos.size(); ++i) {
        if (!in.is_first_subword[pos[i]]) continue;
        std::size_t best = 0;
        for (std::size_t k = 1; k < kNumCauseTags; ++k) {
          if (out.tag_probs[j].at(i, k) > out.tag_probs[j].at(i, best)) best = k;
        }
        p.word_tags[static_cast<std::size_t>(in.word_index[pos[i]])] = static_cast<int>(best);
      }
      p.cause_spans = decode_iob(p.word_tags);
    }
  }
  return preds;
}

}  // namespace emocause
