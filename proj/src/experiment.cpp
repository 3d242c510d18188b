#include "emocause/experiment.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emocause/checkpoint.hpp"
#include "emocause/error.hpp"

namespace emocause {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ExperimentData load_experiment_data(const std::string& data_path, CorpusFormat format, const RunConfig& config) {
  ExperimentData d;
  auto examples = filter_labels(load_corpus(data_path, format, &d.load), &d.filter);
  auto provider = make_provider(config);
  examples = attach_knowledge(std::move(examples), config, provider.get());
  d.splits = split(examples, SplitSpec{0.8, 0.1, 0.1, config.split_seed});
  d.vocab = build_vocab(d.splits.train, config);
  d.train = prepare(d.splits.train, d.vocab, config);
  d.dev = prepare(d.splits.dev, d.vocab, config);
  d.test = prepare(d.splits.test, d.vocab, config);
  return d;
}

PreparedData prepare_for(const std::vector<Example>& examples, const Vocab& vocab, const RunConfig& config) {
  auto provider = make_provider(config);
  return prepare(attach_knowledge(examples, config, provider.get()), vocab, config);
}

std::uint64_t best_seed(const SeedSummary& summary, TargetMetric target) {
  if (summary.runs.empty()) throw DataError("no seed runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < summary.runs.size(); ++i) {
    if (target_value(summary.runs[i].dev, target) > target_value(summary.runs[best].dev, target)) best = i;
  }
  return summary.runs[best].seed;
}

namespace {

ordered_json summary_json(const std::map<std::string, MeanStd>& s) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : s) j[k] = ordered_json{{"mean", v.mean}, {"std", v.std}, {"formatted", v.formatted}};
  return j;
}

ordered_json embed(const EvalReport& r) { return ordered_json::parse(report_to_json(r)); }

}  // namespace

ordered_json experiment_report(const RunConfig& config, const std::string& data_path, const ExperimentData& data,
                               const SeedSummary& summary) {
  ordered_json j;
  j["variant"] = to_string(config.variant);
  j["knowledge"] = config.knowledge;
  j["target"] = to_string(config.target_metric());
  j["data"] = data_path;
  ordered_json dropped = ordered_json::object();
  for (const auto& [label, n] : data.filter.dropped) dropped[label] = n;
  j["corpus"] = {{"loaded", data.load.loaded},
                 {"skipped_without_cause", data.load.skipped_without_cause},
                 {"kept_after_filter", data.filter.kept},
                 {"dropped_labels", dropped},
                 {"train", data.train.size()},
                 {"dev", data.dev.size()},
                 {"test", data.test.size()},
                 {"vocab", data.vocab.size()}};
  j["best_seed"] = best_seed(summary, config.target_metric());
  ordered_json runs = ordered_json::array();
  for (const auto& r : summary.runs) {
    ordered_json rj{{"seed", r.seed}, {"best_epoch", r.best_epoch}, {"dev", embed(r.dev)}};
    rj["test"] = r.test ? embed(*r.test) : ordered_json();
    runs.push_back(std::move(rj));
  }
  j["runs"] = std::move(runs);
  j["summary"] = {{"dev", summary_json(summary.dev)}, {"test", summary_json(summary.test)}};
  return j;
}

namespace {

std::string history_header() {
  return "seed,epoch,train_loss,dev_emotion_macro_f1,dev_emotion_accuracy,dev_cause_span_f1,dev_target,improved";
}

std::string opt_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string history_row(std::uint64_t seed, const EpochRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", r.train_loss);
  std::ostringstream os;
  os << seed << ',' << r.epoch << ',' << buf << ',' << opt_cell(r.dev.emotion_macro_f1) << ','
     << opt_cell(r.dev.emotion_accuracy) << ',' << opt_cell(r.dev.cause_span_f1) << ',' << opt_cell(r.target) << ','
     << (r.improved ? 1 : 0);
  return os.str();
}

}  // namespace

ExperimentOutcome run_experiment(const RunConfig& config, const std::string& data_path, CorpusFormat format,
                                 const std::string& out_dir, const std::function<void(const std::string&)>& log) {
  config.validate();
  ExperimentData data = load_experiment_data(data_path, format, config);
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "config.json").string(), to_json(config).dump(2) + "\n");

  std::ostringstream history;
  history << history_header() << '\n';
  TrainOptions options = TrainOptions::from(config);
  const ModelConfig mc = config.model_config(data.vocab.size());

  std::uint64_t current_seed = 0;
  options.on_epoch = [&](const EpochRecord& r) {
    history << history_row(current_seed, r) << '\n';
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "seed %llu epoch %zu loss %.4f dev %s %.4f%s",
                    static_cast<unsigned long long>(current_seed), r.epoch, r.train_loss,
                    to_string(options.target).c_str(), r.target, r.improved ? " *" : "");
      log(buf);
    }
  };

  SeedSummary summary;
  std::vector<EvalReport> dev_reports, test_reports;
  for (auto seed : config.seeds) {
    current_seed = seed;
    // One seed at a time so each checkpoint is written as soon as it exists.
    SeedSummary one = run_seeds(mc, data.train, data.dev, &data.test, options, {seed},
                                [&](const SeedRun&, const TrainResult& tr) {
                                  save_checkpoint((fs::path(out_dir) / ("seed-" + std::to_string(seed))).string(),
                                                  tr.model, data.vocab, config, seed, tr.best_epoch);
                                });
    summary.runs.push_back(one.runs.front());
    dev_reports.push_back(one.runs.front().dev);
    test_reports.push_back(*one.runs.front().test);
  }
  summary.dev = summarize(dev_reports);
  summary.test = summarize(test_reports);

  write_text_file((fs::path(out_dir) / "history.csv").string(), history.str());
  ExperimentOutcome outcome;
  outcome.summary = summary;
  outcome.best_seed = best_seed(summary, config.target_metric());
  outcome.report = experiment_report(config, data_path, data, summary);
  write_text_file((fs::path(out_dir) / "report.json").string(), outcome.report.dump(2) + "\n");
  return outcome;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& dir, const Manifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["config_path"] = m.config_path.empty() ? ordered_json() : ordered_json(m.config_path);
  j["config"] = m.config;
  j["version"] = kVersion;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace emocause
