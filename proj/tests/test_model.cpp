#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "emocause/error.hpp"
#include "emocause/gradcheck.hpp"
#include "emocause/labels.hpp"
#include "emocause/ops.hpp"
#include "model_fixture.hpp"
#include "test_util.hpp"

using namespace emocause;
using testing::make_batch;
using testing::random_tensor;
using testing::small_config;

namespace {

// Model-level losses sit around 1..10 with gradients down to ~1e-6, so the
// rounding error of a 1e-5 step dominates; 1e-4 keeps both error terms small.
constexpr double kModelStep = 1e-4;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

BatchOutput run(const Model& m, const testing::Batch& b, bool teacher_forcing, bool training = true,
                std::uint64_t seed = 5) {
  Rng rng(seed);
  const auto ptrs = b.pointers();
  return m.forward(ptrs, b.emotions, {.training = training, .teacher_forcing = teacher_forcing}, rng);
}

}  // namespace

TEST_CASE("encoder init") {
  EncoderConfig cfg;
  cfg.vocab_size = 500;
  cfg.d_model = 64;
  ParamStore a, b;
  Rng ra(1), rb(1);
  init_encoder_params(a, cfg, ra);
  init_encoder_params(b, cfg, rb);
  REQUIRE(a.size() == b.size());
  double lo = 1.0, hi = -1.0, total = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    CHECK(values(a.entries()[p].tensor) == values(b.entries()[p].tensor));
    const std::string& name = a.entries()[p].name;
    if (name.find("norm.gain") != std::string::npos) {
      for (double v : a.entries()[p].tensor.data()) CHECK(v == 1.0);
      continue;
    }
    if (name.find("bias") != std::string::npos) continue;
    for (double v : a.entries()[p].tensor.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      total += v;
      ++count;
    }
  }
  CHECK(lo >= -0.07);
  CHECK(hi <= 0.07);
  REQUIRE(count >= 100000);
  CHECK(std::abs(total / static_cast<double>(count)) < 0.002);

  EncoderConfig bad = cfg;
  bad.n_heads = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.vocab_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder forward") {
  const auto batch = make_batch();
  const ModelConfig mc = small_config(Variant::multi, batch.vocab.size());
  ParamStore params;
  Rng init(3);
  init_encoder_params(params, mc.encoder, init);
  Rng rng(0);

  const EncodedInput in = encode_single("Flood waters", batch.vocab, 48);
  const Tensor h = encode(in, params, mc.encoder, false, rng);
  CHECK(h.rows() == in.valid_length());
  CHECK(h.cols() == mc.encoder.d_model);

  // Padding content is never read: rewriting the padded ids changes nothing.
  EncodedInput scrambled = in;
  REQUIRE(scrambled.length() > scrambled.valid_length() + 1);
  std::swap(scrambled.token_ids.back(), scrambled.token_ids[scrambled.valid_length()]);
  scrambled.token_ids.back() = 7;
  CHECK(values(encode(scrambled, params, mc.encoder, false, rng)) == values(h));

  // Batched and single encoding agree; eval mode is pure.
  std::vector<const EncodedInput*> ptrs = batch.pointers();
  ptrs.insert(ptrs.begin(), &in);
  EncoderTrace trace;
  const EncoderOutput out = encode(ptrs, params, mc.encoder, false, rng, &trace);
  const Tensor first = slice_rows(out.hidden, out.sequences[0].start, out.sequences[0].length);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(first.data()[i] - h.data()[i]) < 1e-12);
  CHECK(values(encode(in, params, mc.encoder, false, rng)) == values(h));

  REQUIRE(trace.attention.size() == mc.encoder.n_layers);
  for (const auto& layer : trace.attention) {
    for (std::size_t s = 0; s < layer.size(); ++s) {
      const auto& p = layer[s];
      const auto len = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(p.size()))));
      for (std::size_t i = 0; i < len; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) total += p[i * len + j];
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }

  // A lone [CLS] still gives a finite vector.
  EncodedInput lone;
  lone.token_ids = {batch.vocab.cls_id()};
  lone.segment_ids = {0};
  lone.word_index = {kNoWord};
  lone.is_first_subword = {false};
  lone.attention_mask = {true};
  const Tensor one = encode(lone, params, mc.encoder, false, rng);
  CHECK(one.rows() == 1);
  for (double v : one.data()) CHECK(std::isfinite(v));

  EncodedInput bad_id = in;
  bad_id.token_ids[1] = static_cast<int>(batch.vocab.size()) + 3;
  CHECK_THROWS_AS(encode(bad_id, params, mc.encoder, false, rng), DataError);
  EncoderConfig tiny = mc.encoder;
  tiny.max_positions = 4;
  ParamStore tiny_params;
  init_encoder_params(tiny_params, tiny, init);
  CHECK_THROWS_AS(encode(in, tiny_params, tiny, false, rng), DataError);
}

TEST_CASE("emotion and cause scores") {
  const Tensor h = Tensor::matrix({{0.3, -0.2, 0.9}});
  const ScoreOutput zero = emotion_scores(h, Tensor::zeros({7, 3}), Tensor::zeros({7}));
  for (double p : zero.probs.data()) CHECK(std::abs(p - 1.0 / 7.0) < 1e-15);

  Rng rng(4);
  const Tensor w = random_tensor({7, 3}, rng, 1.0, false);
  const Tensor b = random_tensor({7}, rng, 1.0, false);
  const ScoreOutput s = emotion_scores(h, w, b);
  // Independent hand softmax.
  std::vector<double> logits(7);
  double z = 0.0;
  for (std::size_t k = 0; k < 7; ++k) {
    logits[k] = b.data()[k];
    for (std::size_t j = 0; j < 3; ++j) logits[k] += w.at(k, j) * h.at(0, j);
    z += std::exp(logits[k]);
  }
  for (std::size_t k = 0; k < 7; ++k) CHECK(std::abs(s.probs.data()[k] - std::exp(logits[k]) / z) < 1e-14);
  const ScoreOutput shifted = emotion_scores(h, w, add_scalar(b, 4.2));
  const auto argmax = [](const Tensor& t) { return std::max_element(t.data().begin(), t.data().end()) - t.data().begin(); };
  CHECK(argmax(s.probs) == argmax(shifted.probs));

  const Tensor hs = random_tensor({5, 3}, rng, 1.0, false);
  const ScoreOutput c0 = cause_scores(hs, Tensor::zeros({3, 3}), Tensor::zeros({3}));
  for (double p : c0.probs.data()) CHECK(std::abs(p - 1.0 / 3.0) < 1e-15);
  const ScoreOutput c = cause_scores(hs, random_tensor({3, 3}, rng, 1.0, false), Tensor::zeros({3}));
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(c.probs.at(i, 0) + c.probs.at(i, 1) + c.probs.at(i, 2) - 1.0) < 1e-10);
}

TEST_CASE("losses") {
  const double ln7 = std::log(7.0), ln3 = std::log(3.0);
  const Tensor uniform7 = log_softmax(Tensor::zeros({1, 7}), 1);
  const std::size_t gold0[] = {2};
  CHECK(std::abs(nll_emotion(uniform7, gold0).item() - ln7) < 1e-12);

  std::vector<double> rows(14, std::log(1.0 / 7.0));
  for (std::size_t k = 0; k < 7; ++k) rows[k] = k == 4 ? 0.0 : -1e300;
  const Tensor two = Tensor::from_data({2, 7}, rows);
  const std::size_t gold2[] = {4, 1};
  CHECK(std::abs(nll_emotion(two, gold2).item() - ln7 / 2.0) < 1e-12);
  CHECK(nll_emotion(slice_rows(two, 0, 1), std::vector<std::size_t>{4}).item() == 0.0);
  CHECK_THROWS_AS(nll_emotion(uniform7, {}), DataError);

  const Tensor uniform3 = log_softmax(Tensor::zeros({6, 3}), 1);
  const std::vector<int> tags = {kIgnoreTag, kTagOutside, kTagBegin, kTagInside, kTagOutside, kIgnoreTag};
  const Tensor lp[] = {uniform3};
  const std::vector<int> tag_sets[] = {tags};
  CHECK(std::abs(nll_cause(lp, tag_sets).item() - 4 * ln3) < 1e-10);

  const Tensor lp2[] = {log_softmax(Tensor::zeros({12, 3}), 1)};
  std::vector<int> doubled = tags;
  doubled.insert(doubled.end(), tags.begin(), tags.end());
  const std::vector<int> tag_sets2[] = {doubled};
  CHECK(std::abs(nll_cause(lp2, tag_sets2).item() - 2 * nll_cause(lp, tag_sets).item()) < 1e-12);

  const Tensor lp_two[] = {uniform3, uniform3};
  const std::vector<int> tag_two[] = {tags, tags};
  CHECK(std::abs(nll_cause(lp_two, tag_two).item() - 4 * ln3) < 1e-10);

  const std::vector<int> ignored[] = {std::vector<int>(6, kIgnoreTag)};
  CHECK_THROWS_AS(nll_cause(lp, ignored), DataError);

  // Ignored positions get exactly zero gradient.
  Tensor logits = Tensor::zeros({6, 3}, true);
  const Tensor lpg[] = {log_softmax(logits, 1)};
  nll_cause(lpg, tag_sets).backward();
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(logits.grad()[0 * 3 + k] == 0.0);
    CHECK(logits.grad()[5 * 3 + k] == 0.0);
  }

  const Tensor e = Tensor::scalar(2.0), c = Tensor::scalar(4.0);
  CHECK(combine_losses(e, c, 0.5).item() == 3.0);
  CHECK(combine_losses(e, c, 1.0).item() == 2.0);
  CHECK(combine_losses(e, c, 0.0).item() == 4.0);
  CHECK_THROWS_AS(combine_losses(e, c, 1.5), ConfigError);
}

TEST_CASE("cause attention and emotion memory algebra") {
  const Tensor alpha = cause_attention(gold_cause_indicator(std::vector<int>{kTagOutside, kTagBegin, kTagInside, kTagOutside}));
  const double e = std::numbers::e;
  CHECK(std::abs(alpha.data()[1] - e / (2 * e + 2)) < 1e-15);
  CHECK(std::abs(alpha.data()[0] - 1 / (2 * e + 2)) < 1e-15);
  CHECK(std::abs(alpha.data()[1] - 0.365529) < 1e-6);
  CHECK(std::abs(alpha.data()[0] - 0.134471) < 1e-6);
  CHECK(std::abs(alpha.data()[1] / alpha.data()[0] - e) < 1e-12);
  CHECK(std::abs(sum(alpha).item() - 1.0) < 1e-12);

  const Tensor all = cause_attention(gold_cause_indicator(std::vector<int>{kTagBegin, kTagInside, kTagInside}));
  for (double a : all.data()) CHECK(std::abs(a - 1.0 / 3.0) < 1e-15);

  // Soft attention ratios are bounded by e.
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const Tensor probs = softmax(random_tensor({n, 3}, rng, 5.0, false), 1);
    const Tensor a = cause_attention(cause_probability(probs));
    const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
    CHECK(*hi / *lo <= e + 1e-12);
    CHECK(*lo >= 1.0 / (static_cast<double>(n) * e) - 1e-15);
    CHECK(std::abs(sum(a).item() - 1.0) < 1e-12);
  }

  const Tensor E = random_tensor({7, 5}, rng, 1.0, false);
  const Tensor m = emotion_memory(one_hot_emotion(3), E);
  for (std::size_t j = 0; j < 5; ++j) CHECK(m.data()[j] == E.at(3, j));
  const Tensor mu = emotion_memory(Tensor::full({1, 7}, 1.0 / 7.0), E);
  for (std::size_t j = 0; j < 5; ++j) {
    double col = 0.0;
    for (std::size_t k = 0; k < 7; ++k) col += E.at(k, j);
    CHECK(std::abs(mu.data()[j] - col / 7.0) < 1e-15);
  }

  // With the M block of W_c' zeroed the tagger equals a plain cause head.
  const Tensor h = random_tensor({4, 6}, rng, 1.0, false);
  const Tensor wc = random_tensor({3, 6}, rng, 1.0, false);
  const Tensor bc = random_tensor({3}, rng, 1.0, false);
  const Tensor blocks[] = {wc, Tensor::zeros({3, 5})};
  const Tensor rows[] = {h, repeat_rows(mu, 4)};
  const ScoreOutput joint = cause_scores(concat_cols(rows), concat_cols(blocks), bc);
  const ScoreOutput plain = cause_scores(h, wc, bc);
  for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(joint.probs.data()[i] - plain.probs.data()[i]) < 1e-15);
}

TEST_CASE("head parameters per variant") {
  const auto names = [](Variant v, PoolMode p) {
    ParamStore s;
    Rng rng(0);
    HeadConfig h;
    h.variant = v;
    h.pooler = p;
    h.emotion_embedding_dim = 8;
    init_head_params(s, h, 16, rng);
    std::vector<std::string> out;
    for (const auto& e : s.entries()) out.push_back(e.name);
    return out;
  };
  CHECK(names(Variant::single_emotion, PoolMode::cls) == std::vector<std::string>{"W_e", "b_e"});
  CHECK(names(Variant::single_cause, PoolMode::attention) == std::vector<std::string>{"W_c", "b_c"});
  CHECK(names(Variant::multi, PoolMode::attention) == std::vector<std::string>{"W_a", "b_a", "W_e", "b_e", "W_c", "b_c"});
  CHECK(names(Variant::multi_c2e, PoolMode::attention) == std::vector<std::string>{"W_e", "b_e", "W_c", "b_c"});
  CHECK(names(Variant::multi_e2c, PoolMode::mean) == std::vector<std::string>{"W_e", "b_e", "W_c'", "b_c'", "E"});
  CHECK_THROWS_AS(parse_variant("multi_x"), ConfigError);
  HeadConfig bad;
  bad.lambda = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("model gradients match finite differences for every variant") {
  const auto batch = make_batch();
  struct Case {
    Variant variant;
    bool teacher_forcing;
    PoolMode pooler;
  };
  const Case cases[] = {
      {Variant::single_emotion, false, PoolMode::attention}, {Variant::single_emotion, false, PoolMode::max},
      {Variant::single_cause, false, PoolMode::cls},         {Variant::multi, false, PoolMode::mean},
      {Variant::multi_c2e, true, PoolMode::cls},             {Variant::multi_c2e, false, PoolMode::cls},
      {Variant::multi_e2c, true, PoolMode::attention},       {Variant::multi_e2c, false, PoolMode::attention},
  };
  for (const Case& c : cases) {
    CAPTURE(to_string(c.variant));
    CAPTURE(c.teacher_forcing);
    Model model(small_config(c.variant, batch.vocab.size()), 11);
    const GradCheckResult r =
        finite_diff_check([&] { return run(model, batch, c.teacher_forcing).loss; }, model.params(), {.step = kModelStep, .samples = 300});
    CAPTURE(r.worst_parameter);
    CHECK(r.max_relative_error <= 1e-4);
  }
}

TEST_CASE("lambda gating is exact") {
  const auto batch = make_batch();
  for (Variant v : {Variant::multi, Variant::multi_c2e, Variant::multi_e2c}) {
    for (bool tf : {true, false}) {
      for (double lambda : {0.0, 1.0}) {
        ModelConfig cfg = small_config(v, batch.vocab.size());
        cfg.heads.lambda = lambda;
        Model model(cfg, 12);
        model.params().zero_grad();
        run(model, batch, tf).loss.backward();
        const TaskParamSplit split = task_specific_params(cfg.heads, tf);
        const auto& silenced = lambda == 1.0 ? split.cause_only : split.emotion_only;
        for (const std::string& name : silenced) {
          CAPTURE(name);
          const Tensor& p = model.params().get(name);
          REQUIRE(p.has_grad());
          for (double g : p.grad()) CHECK(g == 0.0);
        }
      }
    }
  }
  ModelConfig cfg = small_config(Variant::multi, batch.vocab.size());
  CHECK(task_specific_params(cfg.heads, false).cause_only == std::vector<std::string>{"W_c", "b_c"});
}

TEST_CASE("teacher forcing") {
  const auto batch = make_batch();

  // C→E attention depends only on the gold pattern, not on W_c.
  Model c2e(small_config(Variant::multi_c2e, batch.vocab.size()), 13);
  const BatchOutput a = run(c2e, batch, true, false);
  for (double& w : c2e.params().get("W_c").mutable_data()) w += 0.5;
  const BatchOutput b = run(c2e, batch, true, false);
  for (std::size_t j = 0; j < batch.inputs.size(); ++j) {
    CHECK(values(a.attention[j]) == values(b.attention[j]));
    CHECK(values(a.tag_probs[j]) != values(b.tag_probs[j]));
  }
  // Free-running attention does move with W_c.
  const BatchOutput fa = run(c2e, batch, false, false);
  for (double& w : c2e.params().get("W_c").mutable_data()) w -= 0.5;
  const BatchOutput fb = run(c2e, batch, false, false);
  CHECK(values(fa.attention[0]) != values(fb.attention[0]));

  // E→C memory equals the gold row of E.
  Model e2c(small_config(Variant::multi_e2c, batch.vocab.size()), 14);
  const BatchOutput m = run(e2c, batch, true, false);
  const Tensor& E = e2c.params().get("E");
  for (std::size_t j = 0; j < batch.inputs.size(); ++j) {
    for (std::size_t k = 0; k < E.cols(); ++k) CHECK(m.memory[j].data()[k] == E.at(batch.emotions[j], k));
  }
  // Cause loss under teacher forcing never reaches W_e.
  e2c.params().zero_grad();
  m.cause_loss.backward();
  const Tensor& w_e = e2c.params().get("W_e");
  CHECK_FALSE(w_e.has_grad());

  // Missing gold labels are rejected.
  Rng rng(0);
  const auto ptrs = batch.pointers();
  CHECK_THROWS_AS(e2c.forward(ptrs, {}, {.training = true, .teacher_forcing = true}, rng), DataError);
  std::vector<EncodedInput> unlabeled = batch.inputs;
  for (auto& in : unlabeled) in.iob_tags.clear();
  std::vector<const EncodedInput*> up;
  for (const auto& in : unlabeled) up.push_back(&in);
  CHECK_THROWS_AS(c2e.forward(up, batch.emotions, {.training = true, .teacher_forcing = true}, rng), DataError);
}

TEST_CASE("multi equals the two single-task heads on the same encoder") {
  const auto batch = make_batch();
  Model multi(small_config(Variant::multi, batch.vocab.size(), 16, PoolMode::attention), 15);
  ParamStore emo, cause;
  for (const auto& e : multi.params().entries()) {
    const bool cause_head = e.name == "W_c" || e.name == "b_c";
    const bool emo_head = e.name == "W_e" || e.name == "b_e" || e.name == "W_a" || e.name == "b_a";
    if (!cause_head) emo.add(e.name, e.tensor.detach());
    if (!emo_head) cause.add(e.name, e.tensor.detach());
  }
  Model single_e(small_config(Variant::single_emotion, batch.vocab.size()), std::move(emo));
  Model single_c(small_config(Variant::single_cause, batch.vocab.size()), std::move(cause));
  const BatchOutput m = run(multi, batch, false, false);
  const BatchOutput e = run(single_e, batch, false, false);
  const BatchOutput c = run(single_c, batch, false, false);
  CHECK(values(m.emotion_probs) == values(e.emotion_probs));
  for (std::size_t j = 0; j < batch.inputs.size(); ++j) CHECK(values(m.tag_probs[j]) == values(c.tag_probs[j]));
  CHECK(std::abs(m.loss.item() - (0.5 * e.loss.item() + 0.5 * c.loss.item())) < 1e-12);
}

TEST_CASE("knowledge segment is excluded from tagging and pooling") {
  const auto batch = make_batch(true);
  Model model(small_config(Variant::multi_c2e, batch.vocab.size()), 16);
  const BatchOutput out = run(model, batch, false, false);
  for (std::size_t j = 0; j < batch.inputs.size(); ++j) {
    CHECK(out.tag_probs[j].rows() == batch.inputs[j].headline_positions().size());
    CHECK(out.attention[j].rows() == batch.inputs[j].headline_positions().size());
  }
  const GradCheckResult r =
      finite_diff_check([&] { return run(model, batch, true).loss; }, model.params(), {.step = kModelStep, .samples = 200});
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("predict") {
  const auto batch = make_batch();
  Model model(small_config(Variant::multi, batch.vocab.size()), 17);
  const auto ptrs = batch.pointers();
  const auto preds = model.predict(ptrs);
  REQUIRE(preds.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(preds[j].emotion < kNumEmotions);
    CHECK(preds[j].word_tags.size() == batch.inputs[j].headline_words);
    CHECK(preds[j].cause_spans == decode_iob(preds[j].word_tags));
  }
  CHECK(model.predict(ptrs)[1].emotion_probs == preds[1].emotion_probs);
  // Batch composition only changes GEMM blocking, i.e. the last bits.
  const auto again = model.predict(std::span(ptrs).subspan(1, 1));
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    CHECK(std::abs(again[0].emotion_probs[k] - preds[1].emotion_probs[k]) < 1e-14);
  }
}
