#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emocause/config.hpp"
#include "emocause/metrics.hpp"
#include "emocause/model.hpp"
#include "emocause/pipeline.hpp"

namespace emocause {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over minibatches
  EvalReport dev;
  double target = 0.0;
  bool improved = false;
};

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 5;
  TargetMetric target = TargetMetric::emotion_macro_f1;
  double clip_norm = 0.0;
  // Called after each epoch; handy for progress output.
  std::function<void(const EpochRecord&)> on_epoch;

  static TrainOptions from(const RunConfig& config);
};

struct TrainResult {
  explicit TrainResult(Model m) : model(std::move(m)) {}

  // Parameters of the best dev epoch.
  Model model;
  std::size_t best_epoch = 0;
  double best_target = 0.0;
  EvalReport best_dev;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

// Adam on shuffled minibatches; after each epoch the dev target is computed
// and the parameters are kept if it strictly improves. Training stops after
// max_epochs or once `patience` consecutive epochs fail to improve (so
// patience 0 stops at the first such epoch). Multi_C→E and Multi_E→C train
// with teacher forcing. `seed` drives initialization, shuffling and dropout.
TrainResult train(const ModelConfig& model_config, const PreparedData& train_data, const PreparedData& dev_data,
                  const TrainOptions& options, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  EvalReport dev;
  std::optional<EvalReport> test;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::string formatted;  // "xx.xx ± y.yy"
};

// Scalar metrics of a report by name (emotion_macro_f1, emotion_accuracy,
// cause_span_f1, cause_span_precision, cause_span_recall, gold_accuracy,
// not_gold_accuracy); metrics the report lacks are omitted.
std::map<std::string, double> scalar_metrics(const EvalReport& report);

// Mean and population std per metric present in every report.
std::map<std::string, MeanStd> summarize(const std::vector<EvalReport>& reports);

struct SeedSummary {
  std::vector<SeedRun> runs;
  std::map<std::string, MeanStd> dev;
  std::map<std::string, MeanStd> test;
};

using SeedCallback = std::function<void(const SeedRun&, const TrainResult&)>;

// Trains once per seed and summarizes dev (and test, when given) metrics.
SeedSummary run_seeds(const ModelConfig& model_config, const PreparedData& train_data, const PreparedData& dev_data,
                      const PreparedData* test_data, const TrainOptions& options,
                      const std::vector<std::uint64_t>& seeds, const SeedCallback& on_seed = {});

}  // namespace emocause
