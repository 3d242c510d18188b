#include "emocause/train.hpp"

#include <limits>
#include <numeric>

#include "emocause/error.hpp"
#include "emocause/optim.hpp"
#include "emocause/stats.hpp"

namespace emocause {

TrainOptions TrainOptions::from(const RunConfig& config) {
  TrainOptions o;
  o.lr = config.lr;
  o.batch_size = config.batch_size;
  o.max_epochs = config.max_epochs;
  o.patience = config.patience;
  o.target = config.target_metric();
  o.clip_norm = config.clip_norm;
  return o;
}

TrainResult train(const ModelConfig& model_config, const PreparedData& train_data, const PreparedData& dev_data,
                  const TrainOptions& options, std::uint64_t seed) {
  if (train_data.size() == 0) throw DataError("training split is empty");
  if (dev_data.size() == 0) throw DataError("dev split is empty");
  if (options.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (options.max_epochs == 0) throw ConfigError("max_epochs must be at least 1");

  Model model(model_config, seed);
  Rng rng(seed);
  rng.fork_seed();  // keep the training stream distinct from the init stream
  AdamState adam(model.params());
  const Variant variant = model_config.heads.variant;
  const bool forcing = variant == Variant::multi_c2e || variant == Variant::multi_e2c;

  const auto all_inputs = train_data.pointers();
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result(Model(model_config, model.params().clone()));
  result.best_target = -std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const EncodedInput*> batch;
    std::vector<std::size_t> gold;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      gold.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(all_inputs[order[i]]);
        gold.push_back(train_data.emotions[order[i]]);
      }
      model.params().zero_grad();
      BatchOutput out = model.forward(batch, gold, {.training = true, .teacher_forcing = forcing}, rng);
      out.loss.backward();
      if (options.clip_norm > 0.0) clip_grad_norm(model.params(), options.clip_norm);
      adam_step(model.params(), adam, options.lr);
      loss_sum += out.loss.item();
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.dev = evaluate_model(model, dev_data);
    rec.target = target_value(rec.dev, options.target);
    rec.improved = rec.target > result.best_target;
    if (rec.improved) {
      result.best_target = rec.target;
      result.best_epoch = epoch;
      result.best_dev = rec.dev;
      result.model.params().assign_values(model.params());
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (bad_epochs > options.patience) {
      result.stopped_early = epoch < options.max_epochs;
      break;
    }
  }
  return result;
}

std::map<std::string, double> scalar_metrics(const EvalReport& r) {
  std::map<std::string, double> m;
  if (r.emotion_macro_f1) m["emotion_macro_f1"] = *r.emotion_macro_f1;
  if (r.emotion_accuracy) m["emotion_accuracy"] = *r.emotion_accuracy;
  if (r.cause_span_f1) m["cause_span_f1"] = *r.cause_span_f1;
  if (r.spans) {
    m["cause_span_precision"] = r.spans->precision();
    m["cause_span_recall"] = r.spans->recall();
  }
  if (r.gold_accuracy) m["gold_accuracy"] = *r.gold_accuracy;
  if (r.not_gold_accuracy) m["not_gold_accuracy"] = *r.not_gold_accuracy;
  return m;
}

std::map<std::string, MeanStd> summarize(const std::vector<EvalReport>& reports) {
  std::map<std::string, MeanStd> out;
  if (reports.empty()) return out;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : reports) {
    for (const auto& [k, v] : scalar_metrics(r)) values[k].push_back(v);
  }
  for (const auto& [k, vs] : values) {
    if (vs.size() != reports.size()) continue;
    out[k] = MeanStd{mean(vs), population_std(vs), format_mean_std(vs)};
  }
  return out;
}

SeedSummary run_seeds(const ModelConfig& model_config, const PreparedData& train_data, const PreparedData& dev_data,
                      const PreparedData* test_data, const TrainOptions& options,
                      const std::vector<std::uint64_t>& seeds, const SeedCallback& on_seed) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  SeedSummary s;
  std::vector<EvalReport> dev_reports, test_reports;
  for (auto seed : seeds) {
    TrainResult tr = train(model_config, train_data, dev_data, options, seed);
    SeedRun run{seed, tr.best_epoch, tr.best_dev, std::nullopt};
    if (test_data) run.test = evaluate_model(tr.model, *test_data);
    dev_reports.push_back(run.dev);
    if (run.test) test_reports.push_back(*run.test);
    if (on_seed) on_seed(run, tr);
    s.runs.push_back(std::move(run));
  }
  s.dev = summarize(dev_reports);
  s.test = summarize(test_reports);
  return s;
}

}  // namespace emocause
