#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <set>

#include "emocause/checkpoint.hpp"
#include "emocause/config.hpp"
#include "emocause/dataset.hpp"
#include "emocause/error.hpp"
#include "emocause/optim.hpp"
#include "emocause/pipeline.hpp"
#include "emocause/search.hpp"
#include "emocause/stats.hpp"
#include "emocause/train.hpp"

using namespace emocause;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(Variant variant) {
  RunConfig c;
  c.variant = variant;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.emotion_embedding_dim = 8;
  c.vocab_size = 300;
  c.max_len = 24;
  c.max_epochs = 3;
  c.lr = 3e-3;
  return c;
}

struct TinyData {
  Vocab vocab;
  PreparedData train, dev;
};

TinyData tiny_data(const RunConfig& c, std::size_t n = 140) {
  const auto bank = TemplateBank::load(resource_dir() + "/synthetic_templates.txt");
  const Splits s = split(generate_synthetic(n, 3, bank), {0.8, 0.1, 0.1, 0});
  TinyData d;
  d.vocab = build_vocab(s.train, c);
  d.train = prepare(s.train, d.vocab, c);
  d.dev = prepare(s.dev, d.vocab, c);
  return d;
}

}  // namespace

// ---- optimizer -----------------------------------------------------------------

TEST_CASE("adam: first step from zero state moves by about lr") {
  ParamStore ps;
  ps.add("x", Tensor::scalar(0.5));
  AdamState st(ps);
  ps.get("x").mutable_grad()[0] = 1.0;
  adam_step(ps, st, 0.01);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  CHECK(ps.get("x").item() == doctest::Approx(0.5 - 0.01 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(st.step == 1);

  // Second step with g = 1 again: still exactly lr / (1 + eps).
  ps.get("x").mutable_grad()[0] = 1.0;
  adam_step(ps, st, 0.01);
  CHECK(ps.get("x").item() == doctest::Approx(0.5 - 2 * 0.01 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam: hand-applied update for a varying gradient") {
  ParamStore ps;
  ps.add("w", Tensor::row({1.0, -2.0}));
  AdamState st(ps);
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -2.0};
  const double grads[3][2] = {{0.3, -1.0}, {-0.2, 0.5}, {0.1, 0.0}};
  for (int t = 1; t <= 3; ++t) {
    auto g = ps.get("w").mutable_grad();
    for (int i = 0; i < 2; ++i) {
      g[i] = grads[t - 1][i];
      m[i] = b1 * m[i] + (1 - b1) * grads[t - 1][i];
      v[i] = b2 * v[i] + (1 - b2) * grads[t - 1][i] * grads[t - 1][i];
      w[i] -= lr * (m[i] / (1 - std::pow(b1, t))) / (std::sqrt(v[i] / (1 - std::pow(b2, t))) + eps);
    }
    adam_step(ps, st, lr);
  }
  CHECK(ps.get("w").data()[0] == doctest::Approx(w[0]).epsilon(1e-14));
  CHECK(ps.get("w").data()[1] == doctest::Approx(w[1]).epsilon(1e-14));
}

TEST_CASE("adam: zero gradient, missing gradient, non-finite gradient") {
  ParamStore ps;
  ps.add("a", Tensor::row({1.0, 2.0}));
  ps.add("b", Tensor::row({3.0}));
  AdamState st(ps);
  ps.get("a").mutable_grad()[0] = 0.0;  // buffer exists, all zero
  adam_step(ps, st, 0.1);
  CHECK(ps.get("a").data()[0] == 1.0);
  CHECK(ps.get("b").data()[0] == 3.0);  // never had a buffer
  CHECK(st.step == 1);

  ps.get("b").mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(ps, st, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(st.step == 1);
  CHECK(ps.get("a").data()[0] == 1.0);
  ps.get("b").mutable_grad()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(ps, st, 0.1), NumericError);
}

TEST_CASE("clip_grad_norm") {
  ParamStore ps;
  ps.add("a", Tensor::row({0.0, 0.0}));
  ps.add("b", Tensor::row({0.0}));
  ps.get("a").mutable_grad()[0] = 3.0;
  ps.get("b").mutable_grad()[0] = 4.0;
  CHECK(clip_grad_norm(ps, 10.0) == 5.0);
  CHECK(ps.get("a").grad()[0] == 3.0);
  CHECK(clip_grad_norm(ps, 1.0) == 5.0);
  CHECK(ps.get("a").grad()[0] == doctest::Approx(0.6));
  CHECK(ps.get("b").grad()[0] == doctest::Approx(0.8));
}

// ---- statistics -----------------------------------------------------------------

TEST_CASE("mean, population std, formatting") {
  const std::vector<double> xs = {0.2, 0.4, 0.6};
  CHECK(mean(xs) == doctest::Approx(0.4));
  CHECK(population_std(xs) == doctest::Approx(std::sqrt(0.08 / 3.0)));
  CHECK(format_mean_std(xs) == "40.00 ± 16.33");
  const std::vector<double> same = {0.3725, 0.3725};
  CHECK(format_mean_std(same) == "37.25 ± 0.00");
  CHECK_THROWS_AS(mean(std::vector<double>{}), DataError);
}

TEST_CASE("paired t-test: Student's sleep data") {
  // Extra hours of sleep under two drugs for ten patients. Differences
  // 1.2 2.4 1.3 1.3 0 1 1.8 0.8 4.6 1.4: mean 1.58, sd 1.22997, so
  // t = 1.58 / (1.22997 / sqrt(10)) = 4.062 on 9 df. The tabled two-sided
  // 1% critical value for 9 df is 3.250, so p < 0.01.
  const std::vector<double> a = {1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4};
  const std::vector<double> b = {0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0};
  const TTestResult r = paired_t_test(a, b);
  CHECK(r.df == 9);
  CHECK(r.t == doctest::Approx(4.062).epsilon(5e-4));
  CHECK(std::round(r.t * 1000) / 1000 == 4.062);
  CHECK(r.p_value < 0.01);
  CHECK(r.p_value == doctest::Approx(0.002833).epsilon(1e-3));
  CHECK(paired_t_test(b, a).t == doctest::Approx(-r.t));
  CHECK(paired_t_test(b, a).p_value == doctest::Approx(r.p_value));
}

TEST_CASE("paired t-test: conventions and errors") {
  const std::vector<double> x = {1, 1, 1};
  const std::vector<double> y = {2, 2, 2};
  CHECK(paired_t_test(x, y).p_value == 0.0);
  CHECK(paired_t_test(x, x).p_value == 1.0);
  const std::vector<double> u = {0.3, 0.5, 0.4};
  CHECK(paired_t_test(u, u).p_value == 1.0);
  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), DataError);
  CHECK_THROWS_AS(paired_t_test(x, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("chi-squared uniformity") {
  const std::vector<std::size_t> flat = {100, 100, 100, 100};
  CHECK(chi_squared_uniform_p(flat) == doctest::Approx(1.0));
  const std::vector<std::size_t> skewed = {400, 0, 0, 0};
  CHECK(chi_squared_uniform_p(skewed) < 1e-10);
  // stat = (10² + 10²) / 50 = 4 on 1 df, i.e. P(|Z| > 2) = 0.0455003.
  const std::vector<std::size_t> two = {60, 40};
  CHECK(chi_squared_uniform_p(two) == doctest::Approx(0.0455003).epsilon(1e-6));
}

// ---- configuration -----------------------------------------------------------

TEST_CASE("run config JSON round trip and validation") {
  RunConfig c;
  c.variant = Variant::multi_e2c;
  c.knowledge = "file:/tmp/x.jsonl";
  c.relations = Relations::o_react;
  c.seeds = {1, 2};
  c.lr = 3e-5;
  const RunConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.target_metric() == TargetMetric::emotion_macro_f1);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"learning_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"lr", "fast"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"dropout", 1.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"variant", "single_cause"}, {"target", "emotion"}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"knowledge", "comet"}}), ConfigError);
  CHECK(config_from_json(nlohmann::json{{"variant", "single_cause"}}).target_metric() ==
        TargetMetric::cause_span_f1);
  CHECK(parse_target("cause") == TargetMetric::cause_span_f1);
  CHECK(kDefaultSeeds.size() == 5);
}

// ---- training -----------------------------------------------------------------

TEST_CASE("train: determinism and best-checkpoint bookkeeping") {
  const RunConfig c = tiny_config(Variant::multi);
  const TinyData d = tiny_data(c);
  const ModelConfig mc = c.model_config(d.vocab.size());
  TrainOptions o = TrainOptions::from(c);
  o.max_epochs = 4;

  const TrainResult a = train(mc, d.train, d.dev, o, 13);
  const TrainResult b = train(mc, d.train, d.dev, o, 13);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].target == b.history[i].target);
  }
  for (std::size_t p = 0; p < a.model.params().size(); ++p) {
    const auto x = a.model.params().entries()[p].tensor.data();
    const auto y = b.model.params().entries()[p].tensor.data();
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  const TrainResult other = train(mc, d.train, d.dev, o, 14);
  CHECK(other.history.front().train_loss != a.history.front().train_loss);

  // The kept parameters reproduce the recorded dev score exactly, and no
  // earlier epoch scored higher.
  const EvalReport again = evaluate_model(a.model, d.dev);
  CHECK(target_value(again, o.target) == a.best_target);
  CHECK(report_to_json(again) == report_to_json(a.best_dev));
  for (const auto& rec : a.history) {
    if (rec.epoch <= a.best_epoch) CHECK(rec.target <= a.best_target);
  }
  CHECK(a.history[a.best_epoch - 1].improved);
}

TEST_CASE("train: patience") {
  const RunConfig c = tiny_config(Variant::single_emotion);
  const TinyData d = tiny_data(c);
  const ModelConfig mc = c.model_config(d.vocab.size());
  TrainOptions o = TrainOptions::from(c);
  o.max_epochs = 30;
  o.patience = 0;
  o.lr = 1e-7;  // barely moves, so the dev score stalls at once
  const TrainResult r = train(mc, d.train, d.dev, o, 1);
  // Stops at the first epoch that fails to improve.
  std::size_t first_stall = 0;
  for (const auto& rec : r.history) {
    if (!rec.improved) {
      first_stall = rec.epoch;
      break;
    }
  }
  REQUIRE(first_stall > 0);
  CHECK(r.history.size() == first_stall);
  CHECK(r.stopped_early);

  o.patience = 2;
  const TrainResult r2 = train(mc, d.train, d.dev, o, 1);
  std::size_t bad = 0;
  for (const auto& rec : r2.history) bad = rec.improved ? 0 : bad + 1;
  CHECK(bad == 3);

  PreparedData empty;
  CHECK_THROWS_AS(train(mc, empty, d.dev, o, 1), DataError);
  CHECK_THROWS_AS(train(mc, d.train, empty, o, 1), DataError);
}

TEST_CASE("run_seeds: duplicated seeds give zero spread; mean of accuracies") {
  const RunConfig c = tiny_config(Variant::multi_c2e);
  const TinyData d = tiny_data(c);
  const ModelConfig mc = c.model_config(d.vocab.size());
  TrainOptions o = TrainOptions::from(c);
  o.max_epochs = 2;

  const SeedSummary dup = run_seeds(mc, d.train, d.dev, nullptr, o, {5, 5, 5});
  CHECK(dup.dev.at("emotion_accuracy").std == 0.0);
  CHECK(dup.dev.at("cause_span_f1").std == 0.0);
  CHECK(dup.test.empty());

  const SeedSummary s = run_seeds(mc, d.train, d.dev, &d.dev, o, {1, 2, 3});
  REQUIRE(s.runs.size() == 3);
  // Accuracy is linear in per-example hits: the mean of per-seed accuracies
  // equals the accuracy over all seeds' predictions pooled together.
  std::size_t hits = 0, total = 0;
  for (const auto& run : s.runs) {
    hits += static_cast<std::size_t>(std::llround(*run.dev.emotion_accuracy * run.dev.examples));
    total += run.dev.examples;
  }
  CHECK(s.dev.at("emotion_accuracy").mean ==
        doctest::Approx(static_cast<double>(hits) / static_cast<double>(total)).epsilon(1e-12));
  const std::string f = s.dev.at("emotion_macro_f1").formatted;
  CHECK(std::regex_match(f, std::regex(R"(\d{1,3}\.\d{2} ± \d{1,3}\.\d{2})")));
}

// ---- search -----------------------------------------------------------------

TEST_CASE("search: samples stay in range; lr is log-uniform") {
  RunConfig base;
  base.knowledge = "lexicon";
  const SearchSpace space;
  Rng rng(99);
  constexpr int kDraws = 10000, kBins = 20;
  std::vector<std::size_t> bins(kBins, 0);
  std::set<PoolMode> poolers;
  std::set<Relations> relations;
  for (int i = 0; i < kDraws; ++i) {
    const RunConfig c = sample_config(base, space, rng);
    REQUIRE(c.lr >= 1e-6);
    REQUIRE(c.lr <= 1e-4);
    REQUIRE(c.dropout >= 0.0);
    REQUIRE(c.dropout <= 0.9);
    REQUIRE(c.lambda >= 0.1);
    REQUIRE(c.lambda <= 0.9);
    poolers.insert(c.pooler);
    relations.insert(c.relations);
    const double u = (std::log10(c.lr) + 6.0) / 2.0;
    ++bins[std::min<std::size_t>(kBins - 1, static_cast<std::size_t>(u * kBins))];
  }
  CHECK(poolers.size() == 4);
  CHECK(relations.size() == 3);
  const double p = chi_squared_uniform_p(bins);
  MESSAGE("log-lr uniformity p = " << p);
  CHECK(p > 0.01);

  // Without knowledge the relations field is left alone.
  RunConfig plain;
  plain.relations = Relations::x_react;
  for (int i = 0; i < 50; ++i) CHECK(sample_config(plain, space, rng).relations == Relations::x_react);
}

TEST_CASE("search: budget, ties, rigged objective") {
  const RunConfig base;
  const SearchSpace space;
  CHECK_THROWS_AS(random_search(base, space, 0, 1, [](const RunConfig&) { return 0.0; }), ConfigError);

  const SearchResult one = random_search(base, space, 1, 4, [](const RunConfig& c) { return c.lr; });
  REQUIRE(one.trials.size() == 1);
  Rng rng(4);
  CHECK(to_json(one.best_trial().config) == to_json(sample_config(base, space, rng)));

  const SearchResult flat = random_search(base, space, 10, 4, [](const RunConfig&) { return 0.5; });
  CHECK(flat.best == 0);

  // Attention pooling strictly dominates; p = 1/4 per draw.
  auto rigged = [](const RunConfig& c) { return c.pooler == PoolMode::attention ? 1.0 : 0.0; };
  const double p = 0.25;
  constexpr int kSearches = 2000;
  int found = 0;
  for (int s = 0; s < kSearches; ++s) {
    found += random_search(base, space, 5, 1000 + s, rigged).best_trial().config.pooler == PoolMode::attention;
  }
  const double expected = 1.0 - std::pow(1.0 - p, 5);
  const double sigma = std::sqrt(expected * (1 - expected) / kSearches);
  const double rate = static_cast<double>(found) / kSearches;
  MESSAGE("budget 5: found " << rate << ", expected " << expected);
  CHECK(std::abs(rate - expected) < 4 * sigma);
  for (int s = 0; s < 200; ++s) {
    CHECK(random_search(base, space, 75, s, rigged).best_trial().config.pooler == PoolMode::attention);
  }

  CHECK_THROWS_AS(search_space_from_json(nlohmann::json{{"lr", {1e-3, 1e-5}}}), ConfigError);
  CHECK_THROWS_AS(search_space_from_json(nlohmann::json{{"momentum", {0, 1}}}), ConfigError);
  const SearchSpace narrow = search_space_from_json(nlohmann::json{{"pooler", {"max"}}, {"lr", {1e-5, 1e-5}}});
  CHECK(sample_config(base, narrow, rng).pooler == PoolMode::max);
  CHECK(sample_config(base, narrow, rng).lr == 1e-5);
}

// ---- checkpoints -----------------------------------------------------------------

TEST_CASE("checkpoint round trip") {
  RunConfig c = tiny_config(Variant::multi_e2c);
  c.pooler = PoolMode::attention;
  const TinyData d = tiny_data(c);
  const Model model(c.model_config(d.vocab.size()), 21);
  const fs::path dir = fs::temp_directory_path() / "emocause-test-checkpoint";
  fs::remove_all(dir);
  save_checkpoint(dir.string(), model, d.vocab, c, 21, 3);

  const Checkpoint ck = load_checkpoint(dir.string());
  CHECK(ck.seed == 21);
  CHECK(ck.best_epoch == 3);
  CHECK(to_json(ck.run) == to_json(c));
  CHECK(to_json(ck.model_config) == to_json(model.config()));
  CHECK(ck.vocab.tokens() == d.vocab.tokens());
  const Model restored = ck.model();
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    const auto x = model.params().entries()[p].tensor.data();
    const auto y = restored.params().entries()[p].tensor.data();
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  CHECK(report_to_json(evaluate_model(restored, d.dev)) == report_to_json(evaluate_model(model, d.dev)));

  CHECK_THROWS_AS(load_checkpoint((dir / "absent").string()), NotFoundError);
  std::ofstream(dir / "checkpoint.json") << "{\"format\": \"something-else\"}";
  CHECK_THROWS_AS(load_checkpoint(dir.string()), DataError);
}
