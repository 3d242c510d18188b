// emocause command-line entry point.
//
// Exit codes: 0 success, 1 internal error, 2 usage or input error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emocause/checkpoint.hpp"
#include "emocause/config.hpp"
#include "emocause/dataset.hpp"
#include "emocause/error.hpp"
#include "emocause/experiment.hpp"
#include "emocause/knowledge.hpp"
#include "emocause/metrics.hpp"
#include "emocause/pipeline.hpp"
#include "emocause/search.hpp"
#include "emocause/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace emocause;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

// Thrown for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string experiment_root() {
  const char* env = std::getenv(kExperimentRootEnv);
  return env && *env ? env : "experiments";
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

// Flags shared by train and search. Each one overrides the config file.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> variant, knowledge, pooler, relations, target, activation;
  std::optional<double> lr, dropout, lambda, clip_norm;
  std::optional<std::size_t> epochs, patience, batch_size, top_k, d_model, n_layers, vocab_size;
  std::optional<std::uint64_t> seed, split_seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Flat JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--variant", variant, "single_emotion|single_cause|multi|multi_c2e|multi_e2c");
    cmd->add_option("--knowledge", knowledge, "none|lexicon|lexicon:PATH|file:PATH|corpus");
    cmd->add_option("--pooler", pooler, "cls|mean|max|attention");
    cmd->add_option("--relations", relations, "xReact|oReact|both");
    cmd->add_option("--target", target, "emotion|cause (early-stopping metric)");
    cmd->add_option("--activation", activation, "gelu|relu");
    cmd->add_option("--lr", lr);
    cmd->add_option("--dropout", dropout);
    cmd->add_option("--lambda", lambda, "Emotion loss weight");
    cmd->add_option("--clip-norm", clip_norm, "Global gradient-norm clip, 0 = off");
    cmd->add_option("--epochs", epochs, "Maximum epochs");
    cmd->add_option("--patience", patience);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--top-k", top_k, "Knowledge phrases per relation");
    cmd->add_option("--d-model", d_model);
    cmd->add_option("--layers", n_layers);
    cmd->add_option("--vocab-size", vocab_size);
    cmd->add_option("--seed", seed, "Train this single seed instead of the configured list");
    cmd->add_option("--split-seed", split_seed);
  }

  // Defaults, then the config file, then flags.
  RunConfig resolve() const {
    json j = json::object();
    if (!config_path.empty()) j = to_json(load_config(config_path));
    auto set = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    set("variant", variant);
    set("knowledge", knowledge);
    set("pooler", pooler);
    set("relations", relations);
    set("target", target);
    set("activation", activation);
    set("lr", lr);
    set("dropout", dropout);
    set("lambda", lambda);
    set("clip_norm", clip_norm);
    set("max_epochs", epochs);
    set("patience", patience);
    set("batch_size", batch_size);
    set("top_k", top_k);
    set("d_model", d_model);
    set("n_layers", n_layers);
    set("vocab_size", vocab_size);
    set("split_seed", split_seed);
    if (seed) j["seeds"] = std::vector<std::uint64_t>{*seed};
    // A target that no longer fits an overridden variant falls back to auto.
    if (variant && !target && j.contains("target")) j.erase("target");
    return config_from_json(j);
  }
};

std::vector<std::string> args_of(int argc, char** argv) { return std::vector<std::string>(argv + 1, argv + argc); }

std::string require_existing(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw NotFoundError(std::string(what) + " '" + path + "' does not exist");
  return path;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  ConfigFlags flags;
  std::string data;
  std::string format = "jsonl";
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const RunConfig config = a.flags.resolve();
  require_existing(a.data, "data file");
  const std::string out = a.out.empty() ? (fs::path(experiment_root()) / ("train-" + to_string(config.variant))).string()
                                        : a.out;
  Manifest m{"train", argv, a.flags.config_path, to_json(config), utc_timestamp(), ""};
  auto outcome = run_experiment(config, a.data, parse_corpus_format(a.format), out,
                                a.quiet ? std::function<void(const std::string&)>{} : log_line);
  m.finished_at = utc_timestamp();
  write_manifest(out, m);

  std::cout << "variant " << to_string(config.variant) << ", knowledge " << config.knowledge << ", "
            << config.seeds.size() << " seed(s)\n";
  for (const auto& [k, v] : outcome.summary.dev) std::cout << "dev  " << k << ": " << v.formatted << '\n';
  for (const auto& [k, v] : outcome.summary.test) std::cout << "test " << k << ": " << v.formatted << '\n';
  std::cout << "best seed " << outcome.best_seed << "; wrote " << out << '\n';
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

// An experiment directory resolves to its best seed's checkpoint.
std::string resolve_checkpoint_dir(const std::string& dir) {
  if (fs::exists(fs::path(dir) / "checkpoint.json")) return dir;
  const fs::path report = fs::path(dir) / "report.json";
  if (fs::exists(report)) {
    const auto j = json::parse(read_text_file(report.string()));
    const auto seed = j.at("best_seed").get<std::uint64_t>();
    return (fs::path(dir) / ("seed-" + std::to_string(seed))).string();
  }
  throw NotFoundError("'" + dir + "' holds neither checkpoint.json nor report.json");
}

std::string breakdown_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "emotion,support,present,correct,accuracy,f1,span_precision,span_recall,span_f1,not_gold_accuracy\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& b : r.per_emotion) {
    os << b.label << ',' << b.support << ',' << (b.present ? 1 : 0) << ',' << b.correct << ',' << cell(b.accuracy)
       << ',' << cell(b.f1) << ',';
    if (b.spans) {
      os << cell(b.spans->precision()) << ',' << cell(b.spans->recall()) << ',' << cell(b.spans->f1());
    } else {
      os << ",,";
    }
    os << ',' << cell(b.not_gold_accuracy) << '\n';
  }
  return os.str();
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string format = "jsonl";
  std::string split = "test";
  std::string out;
  bool csv = false;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const std::string started = utc_timestamp();
  const Checkpoint ck = load_checkpoint(resolve_checkpoint_dir(a.checkpoint));
  require_existing(a.data, "data file");
  auto examples = filter_labels(load_corpus(a.data, parse_corpus_format(a.format)));
  std::vector<Example> chosen;
  if (a.split == "all") {
    chosen = examples;
  } else {
    Splits s = split(examples, SplitSpec{0.8, 0.1, 0.1, ck.run.split_seed});
    chosen = a.split == "dev" ? s.dev : a.split == "train" ? s.train : s.test;
  }
  const PreparedData data = prepare_for(chosen, ck.vocab, ck.run);
  const Model model = ck.model();
  const EvalReport report = evaluate_model(model, data);
  if (!data.has_annotators()) log_line("warning: no annotator labels; not_gold_accuracy is null");

  if (a.out.empty()) {
    if (a.csv) {
      std::cout << report_csv_header() << '\n' << report_csv_row(report) << '\n';
    } else {
      std::cout << report_to_json(report) << '\n';
    }
    return kExitOk;
  }
  fs::create_directories(a.out);
  write_text_file((fs::path(a.out) / "report.json").string(), report_to_json(report) + "\n");
  write_text_file((fs::path(a.out) / "report.csv").string(),
                  report_csv_header() + "\n" + report_csv_row(report) + "\n");
  write_text_file((fs::path(a.out) / "per_emotion.csv").string(), breakdown_csv(report));
  write_manifest(a.out, Manifest{"eval", argv, "", to_json(ck.run), started, utc_timestamp()});
  std::cout << "wrote " << a.out << '\n';
  return kExitOk;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string headline;
  bool json_out = false;
};

int cmd_predict(const PredictArgs& a) {
  if (normalize_headline(a.headline).empty()) throw UsageError("--headline must not be empty");
  const Checkpoint ck = load_checkpoint(resolve_checkpoint_dir(a.checkpoint));
  Example ex;
  ex.id = "cli";
  ex.headline = a.headline;
  auto provider = make_provider(ck.run);
  if (ck.run.knowledge == "corpus") throw UsageError("this checkpoint expects knowledge text from the corpus");
  ex = attach_knowledge({ex}, ck.run, provider.get()).front();
  const EncodedInput input = ck.run.uses_knowledge()
                                 ? encode_pair(ex.headline, *ex.knowledge, ck.vocab, ck.run.max_len_pair)
                                 : encode_single(ex.headline, ck.vocab, ck.run.max_len);
  const Model model = ck.model();
  const EncodedInput* ptr = &input;
  const Prediction p = model.predict(std::span<const EncodedInput* const>(&ptr, 1)).front();
  const Variant v = ck.model_config.heads.variant;

  const auto words = split_words(ex.headline);
  const auto cps = decode_utf8(ex.headline);
  std::vector<std::string> span_texts;
  std::vector<CharSpan> char_spans;
  for (const auto& s : p.cause_spans) {
    const CharSpan cs = char_span_of_words(words, s);
    char_spans.push_back(cs);
    span_texts.push_back(normalize_headline(encode_utf8(std::span(cps).subspan(cs.begin, cs.end - cs.begin))));
  }

  if (a.json_out) {
    ordered_json j;
    j["headline"] = ex.headline;
    if (has_emotion_task(v)) {
      j["emotion"] = std::string(emotion_name(p.emotion));
      ordered_json probs = ordered_json::object();
      for (std::size_t k = 0; k < kNumEmotions; ++k) probs[std::string(emotion_name(k))] = p.emotion_probs[k];
      j["probabilities"] = probs;
    } else {
      j["emotion"] = nullptr;
      j["probabilities"] = nullptr;
    }
    if (has_cause_task(v)) {
      ordered_json spans = ordered_json::array();
      for (std::size_t i = 0; i < span_texts.size(); ++i) {
        spans.push_back({{"text", span_texts[i]},
                         {"start", char_spans[i].begin},
                         {"end", char_spans[i].end},
                         {"words", {p.cause_spans[i].first, p.cause_spans[i].last}}});
      }
      j["cause_spans"] = spans;
    } else {
      j["cause_spans"] = nullptr;
    }
    if (ex.knowledge) j["knowledge"] = *ex.knowledge;
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  }

  std::cout << "headline: " << ex.headline << '\n';
  if (ex.knowledge) std::cout << "knowledge: " << *ex.knowledge << '\n';
  if (has_emotion_task(v)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.3f)", p.emotion_probs[p.emotion]);
    std::cout << "emotion: " << emotion_name(p.emotion) << buf << '\n';
    std::cout << "probabilities:";
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      std::snprintf(buf, sizeof buf, " %.3f", p.emotion_probs[k]);
      std::cout << (k ? "," : "") << ' ' << emotion_name(k) << buf;
    }
    std::cout << '\n';
  }
  if (has_cause_task(v)) {
    std::cout << "cause: ";
    if (span_texts.empty()) std::cout << "(none)";
    for (std::size_t i = 0; i < span_texts.size(); ++i) std::cout << (i ? " | " : "") << span_texts[i];
    std::cout << '\n';
  }
  return kExitOk;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  ConfigFlags flags;
  std::string space;
  std::size_t budget = 75;
  std::string data;
  std::string format = "jsonl";
  std::string out;
  std::uint64_t search_seed = 0;
  bool quiet = false;
};

int cmd_search(const SearchArgs& a, const std::vector<std::string>& argv) {
  if (a.budget < 1) throw UsageError("--budget must be at least 1");
  const RunConfig base = a.flags.resolve();
  const SearchSpace space = a.space.empty() ? SearchSpace{} : load_search_space(a.space);
  require_existing(a.data, "data file");
  const CorpusFormat format = parse_corpus_format(a.format);
  const std::string out =
      a.out.empty() ? (fs::path(experiment_root()) / ("search-" + to_string(base.variant))).string() : a.out;
  const std::string started = utc_timestamp();
  fs::create_directories(out);
  write_text_file((fs::path(out) / "config.json").string(), to_json(base).dump(2) + "\n");

  auto objective = [&](const RunConfig& c) {
    const ExperimentData d = load_experiment_data(a.data, format, c);
    TrainOptions opts = TrainOptions::from(c);
    const SeedSummary s = run_seeds(c.model_config(d.vocab.size()), d.train, d.dev, nullptr, opts, c.seeds);
    return s.dev.at(to_string(c.target_metric())).mean;
  };
  std::ostringstream trials;
  trials << trials_csv_header() << '\n';
  auto on_trial = [&](const Trial& t) {
    trials << trials_csv_row(t) << '\n';
    // Rewritten each trial so partial searches leave a usable record.
    write_text_file((fs::path(out) / "trials.csv").string(), trials.str());
    if (!a.quiet) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "trial %zu/%zu dev %s %.4f", t.iteration, a.budget,
                    to_string(base.target_metric()).c_str(), t.metric);
      log_line(buf);
    }
  };
  const SearchResult r = random_search(base, space, a.budget, a.search_seed, objective, on_trial);
  const Trial& best = r.best_trial();
  write_text_file((fs::path(out) / "best_config.json").string(), to_json(best.config).dump(2) + "\n");
  write_manifest(out, Manifest{"search", argv, a.flags.config_path, to_json(base), started, utc_timestamp()});
  std::cout << "best trial " << best.iteration << " of " << r.trials.size() << ": dev "
            << to_string(base.target_metric()) << ' ' << best.metric << "\nwrote " << out << '\n';
  return kExitOk;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> reports;
  std::string out;
  std::string split = "test";
};

int cmd_analyze(const AnalyzeArgs& a, const std::vector<std::string>& argv) {
  const std::string started = utc_timestamp();
  struct Row {
    std::string name;
    EvalReport report;
  };
  std::vector<Row> rows;
  for (const auto& dir : a.reports) {
    const fs::path path = fs::path(dir) / "report.json";
    if (!fs::exists(path)) throw NotFoundError("missing report '" + path.string() + "'");
    const auto j = json::parse(read_text_file(path.string()));
    // One run per model, as the comparison is not averaged over seeds.
    const auto& run = j.at("runs").at(0);
    const json& rep = a.split == "dev" || run.at("test").is_null() ? run.at("dev") : run.at("test");
    std::string name = fs::path(dir).filename().string();
    if (name.empty()) name = fs::path(dir).parent_path().filename().string();
    const std::string base = name;
    for (int k = 2; std::any_of(rows.begin(), rows.end(), [&](const Row& r) { return r.name == name; }); ++k) {
      name = base + "-" + std::to_string(k);
    }
    rows.push_back({name, report_from_json(rep.dump())});
  }

  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return std::string(buf);
  };
  std::ostringstream table;
  table << "model,gold_accuracy,not_gold_accuracy\n";
  for (const auto& r : rows) {
    table << r.name << ',' << pct(r.report.gold_accuracy) << ',' << pct(r.report.not_gold_accuracy) << '\n';
  }
  std::cout << table.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text_file((fs::path(a.out) / "gold_comparison.csv").string(), table.str());
    for (const auto& r : rows) {
      write_text_file((fs::path(a.out) / ("per_emotion_" + r.name + ".csv")).string(), breakdown_csv(r.report));
    }
    write_manifest(a.out, Manifest{"analyze", argv, "", ordered_json::object(), started, utc_timestamp()});
  }
  return kExitOk;
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
  std::size_t n = 700;
  std::uint64_t seed = 7;
  std::string out;
  std::string templates;
  std::string knowledge_cache;
};

int cmd_generate(const GenerateArgs& a) {
  const std::string templates = a.templates.empty() ? resource_dir() + "/synthetic_templates.txt" : a.templates;
  const auto examples = generate_synthetic(a.n, a.seed, TemplateBank::load(templates));
  for (const std::string& path : {a.out, a.knowledge_cache}) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!path.empty() && !parent.empty()) std::filesystem::create_directories(parent);
  }
  save_corpus(a.out, examples);
  if (!a.knowledge_cache.empty()) {
    // Precomputed knowledge for the file-backed provider.
    const auto lexicon = LexiconKnowledgeProvider::load(resource_dir() + "/knowledge_lexicon.tsv");
    std::vector<CacheEntry> entries;
    for (const auto& ex : examples) {
      const auto r = lexicon.provide({ex.headline, Relations::both, 2});
      entries.push_back({ex.headline, r.x_react, r.o_react});
    }
    write_cache(a.knowledge_cache, entries);
  }
  std::cout << "wrote " << examples.size() << " examples to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion classification and cause tagging for news headlines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  const auto args = args_of(argc, argv);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model over the configured seeds");
  train.flags.attach(c_train);
  c_train->add_option("--data", train.data, "Corpus file")->required();
  c_train->add_option("--format", train.format, "jsonl|tsv");
  c_train->add_option("--out", train.out, "Experiment directory");
  c_train->add_flag("--quiet", train.quiet, "No per-epoch progress");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint or experiment directory")->required();
  c_eval->add_option("--data", eval.data, "Corpus file")->required();
  c_eval->add_option("--format", eval.format, "jsonl|tsv");
  c_eval->add_option("--split", eval.split, "train|dev|test|all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  c_eval->add_option("--out", eval.out, "Write report.json, report.csv and per_emotion.csv here");
  c_eval->add_flag("--csv", eval.csv, "Print a CSV row instead of JSON");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Predict emotion and cause for one headline");
  c_predict->add_option("--checkpoint", predict.checkpoint, "Checkpoint or experiment directory")->required();
  c_predict->add_option("--headline", predict.headline)->required();
  c_predict->add_flag("--json", predict.json_out);

  SearchArgs search;
  auto* c_search = app.add_subcommand("search", "Random hyperparameter search");
  search.flags.attach(c_search);
  c_search->add_option("--space", search.space, "Search space JSON")->check(CLI::ExistingFile);
  c_search->add_option("--budget", search.budget);
  c_search->add_option("--data", search.data, "Corpus file")->required();
  c_search->add_option("--format", search.format, "jsonl|tsv");
  c_search->add_option("--out", search.out, "Output directory");
  c_search->add_option("--search-seed", search.search_seed);
  c_search->add_flag("--quiet", search.quiet);

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Gold vs not-gold accuracy table and per-emotion CSVs");
  c_analyze->add_option("--reports", analyze.reports, "Experiment directories")->required()->expected(1, -1);
  c_analyze->add_option("--out", analyze.out, "Directory for the CSV files");
  c_analyze->add_option("--split", analyze.split, "dev|test")->check(CLI::IsMember({"dev", "test"}));

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic corpus");
  c_gen->add_option("--n", gen.n);
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--out", gen.out, "Output JSONL file")->required();
  c_gen->add_option("--templates", gen.templates)->check(CLI::ExistingFile);
  c_gen->add_option("--knowledge-cache", gen.knowledge_cache, "Also write a knowledge cache for these headlines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_train->parsed()) return cmd_train(train, args);
    if (c_eval->parsed()) return cmd_eval(eval, args);
    if (c_predict->parsed()) return cmd_predict(predict);
    if (c_search->parsed()) return cmd_search(search, args);
    if (c_analyze->parsed()) return cmd_analyze(analyze, args);
    if (c_gen->parsed()) return cmd_generate(gen);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
