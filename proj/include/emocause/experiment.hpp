#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emocause/config.hpp"
#include "emocause/dataset.hpp"
#include "emocause/pipeline.hpp"
#include "emocause/train.hpp"

namespace emocause {

inline constexpr std::string_view kVersion = "0.1.0";

// Environment variable naming the default experiment root.
inline constexpr const char* kExperimentRootEnv = "EMOCAUSE_EXPERIMENT_ROOT";

// Corpus loaded, label-filtered, split, knowledge-attached and encoded the
// way a RunConfig asks for.
struct ExperimentData {
  LoadStats load;
  FilterStats filter;
  Vocab vocab;
  Splits splits;
  PreparedData train;
  PreparedData dev;
  PreparedData test;
};

ExperimentData load_experiment_data(const std::string& data_path, CorpusFormat format, const RunConfig& config);

// Encodes examples for an existing vocabulary (eval/predict paths).
PreparedData prepare_for(const std::vector<Example>& examples, const Vocab& vocab, const RunConfig& config);

struct ExperimentOutcome {
  SeedSummary summary;
  std::uint64_t best_seed = 0;
  nlohmann::ordered_json report;
};

// Seed with the highest dev target; ties go to the earlier seed.
std::uint64_t best_seed(const SeedSummary& summary, TargetMetric target);

// Deterministic summary: no timestamps or absolute times.
nlohmann::ordered_json experiment_report(const RunConfig& config, const std::string& data_path,
                                         const ExperimentData& data, const SeedSummary& summary);

// Trains config.seeds on the corpus and writes into out_dir:
//   config.json, seed-<s>/{checkpoint.json,vocab.txt}, history.csv,
//   report.json. The caller writes manifest.json.
ExperimentOutcome run_experiment(const RunConfig& config, const std::string& data_path, CorpusFormat format,
                                 const std::string& out_dir,
                                 const std::function<void(const std::string&)>& log = {});

// The run record every output directory carries.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::string config_path;
  nlohmann::ordered_json config;
  std::string started_at;
  std::string finished_at;
};

// UTC, ISO 8601.
std::string utc_timestamp();
void write_manifest(const std::string& dir, const Manifest& manifest);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace emocause
