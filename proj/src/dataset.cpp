#include "emocause/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emocause/error.hpp"
#include "emocause/labels.hpp"
#include "emocause/rng.hpp"

#ifndef EMOCAUSE_RESOURCE_DIR
#define EMOCAUSE_RESOURCE_DIR "resources"
#endif

namespace emocause {

using ordered_json = nlohmann::ordered_json;

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "tsv") return CorpusFormat::tsv;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected jsonl or tsv)");
}

namespace {

void check_span(const Example& ex, const std::string& where) {
  const std::size_t len = decode_utf8(ex.headline).size();
  if (ex.cause.begin >= ex.cause.end || ex.cause.end > len) {
    throw DataError(where + ": cause span [" + std::to_string(ex.cause.begin) + ", " + std::to_string(ex.cause.end) +
                    ") invalid for a headline of " + std::to_string(len) + " characters (example '" + ex.id + "')");
  }
}

std::string string_field(const ordered_json& record, const char* field, const std::string& where) {
  if (!record.contains(field)) throw DataError(where + ": missing field '" + field + "'");
  const auto& v = record.at(field);
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (!v.is_string()) throw DataError(where + ": field '" + std::string(field) + "' must be a string");
  return v.get<std::string>();
}

std::optional<Example> parse_jsonl_record(const std::string& line, const std::string& where) {
  ordered_json record;
  try {
    record = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw DataError(where + ": malformed JSON (" + e.what() + ")");
  }
  if (!record.is_object()) throw DataError(where + ": expected a JSON object");
  Example ex;
  ex.id = string_field(record, "id", where);
  ex.headline = string_field(record, "headline", where);
  ex.emotion = string_field(record, "emotion", where);
  if (record.contains("annotator_emotions")) {
    const auto& list = record.at("annotator_emotions");
    if (!list.is_array()) throw DataError(where + ": field 'annotator_emotions' must be an array");
    for (const auto& label : list) {
      if (!label.is_string()) throw DataError(where + ": field 'annotator_emotions' must hold strings");
      ex.annotator_emotions.push_back(label.get<std::string>());
    }
  }
  if (record.contains("knowledge") && !record.at("knowledge").is_null()) {
    ex.knowledge = string_field(record, "knowledge", where);
  }
  if (!record.contains("cause_span") || record.at("cause_span").is_null()) return std::nullopt;
  const auto& span = record.at("cause_span");
  if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() || !span[1].is_number_unsigned()) {
    throw DataError(where + ": field 'cause_span' must be [start, end] with nonnegative integers");
  }
  ex.cause = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
  check_span(ex, where);
  return ex;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::stringstream ss(s);
  while (std::getline(ss, part, sep)) parts.push_back(part);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

std::optional<Example> parse_tsv_record(const std::string& line, const std::string& where) {
  const std::vector<std::string> cols = split_on(line, '\t');
  if (cols.size() != 5) {
    throw DataError(where + ": expected 5 tab-separated columns (id, headline, emotion, cause, annotators), got " +
                    std::to_string(cols.size()));
  }
  Example ex;
  ex.id = cols[0];
  ex.headline = cols[1];
  ex.emotion = cols[2];
  for (const auto& label : split_on(cols[4], ',')) {
    if (!trim(label).empty()) ex.annotator_emotions.push_back(trim(label));
  }
  if (trim(cols[3]).empty()) return std::nullopt;
  const std::vector<char32_t> text = decode_utf8(ex.headline);
  const std::vector<char32_t> cause = decode_utf8(cols[3]);
  const auto it = std::search(text.begin(), text.end(), cause.begin(), cause.end());
  if (it == text.end()) throw DataError(where + ": cause text does not occur in the headline (example '" + ex.id + "')");
  const auto begin = static_cast<std::size_t>(it - text.begin());
  ex.cause = {begin, begin + cause.size()};
  return ex;
}

}  // namespace

std::vector<Example> load_corpus(const std::string& path, CorpusFormat format, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open corpus '" + path + "'");
  LoadStats local;
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (format == CorpusFormat::tsv && line_no == 1 && line.rfind("id\t", 0) == 0) continue;  // header
    const std::string where = path + ":" + std::to_string(line_no);
    std::optional<Example> ex =
        format == CorpusFormat::jsonl ? parse_jsonl_record(line, where) : parse_tsv_record(line, where);
    if (ex) {
      out.push_back(std::move(*ex));
      ++local.loaded;
    } else {
      ++local.skipped_without_cause;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::string to_jsonl(const Example& ex) {
  ordered_json record;
  record["id"] = ex.id;
  record["headline"] = ex.headline;
  record["emotion"] = ex.emotion;
  record["cause_span"] = {ex.cause.begin, ex.cause.end};
  record["annotator_emotions"] = ex.annotator_emotions;
  if (ex.knowledge) record["knowledge"] = *ex.knowledge;
  return record.dump();
}

void save_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus '" + path + "'");
  for (const auto& ex : examples) out << to_jsonl(ex) << '\n';
}

std::vector<Example> filter_labels(const std::vector<Example>& examples, FilterStats* stats) {
  FilterStats local;
  std::vector<Example> out;
  for (const auto& ex : examples) {
    const auto idx = parse_emotion(ex.emotion);
    if (!idx) {
      ++local.dropped[ex.emotion];
      continue;
    }
    out.push_back(ex);
    out.back().emotion = std::string(emotion_name(*idx));
    ++local.kept;
  }
  if (stats) *stats = local;
  return out;
}

std::size_t emotion_index(const Example& example) {
  const auto idx = parse_emotion(example.emotion);
  if (!idx) throw DataError("example '" + example.id + "' has non-target emotion '" + example.emotion + "'");
  return *idx;
}

Splits split(const std::vector<Example>& examples, const SplitSpec& spec) {
  const std::size_t n = examples.size();
  if (n < 10) throw DataError("split needs at least 10 examples, got " + std::to_string(n));
  if (spec.train < 0 || spec.dev < 0 || spec.test < 0 || std::abs(spec.train + spec.dev + spec.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
  const auto n_dev = static_cast<std::size_t>(std::floor(spec.dev * static_cast<double>(n) + 1e-9));
  Splits out;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = examples[order[i]];
    if (i < n_train) {
      out.train.push_back(ex);
    } else if (i < n_train + n_dev) {
      out.dev.push_back(ex);
    } else {
      out.test.push_back(ex);
    }
  }
  return out;
}

TemplateBank TemplateBank::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open template bank '" + path + "'");
  TemplateBank bank;
  bank.templates.resize(kNumEmotions);
  std::string section, line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section == "subjects") {
      bank.subjects.push_back(line);
    } else if (section == "causes") {
      bank.causes.push_back(line);
    } else if (section == "templates") {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError(where + ": expected emotion<TAB>template");
      const auto idx = parse_emotion(trim(line.substr(0, tab)));
      if (!idx) throw DataError(where + ": unknown emotion '" + line.substr(0, tab) + "'");
      const std::string tmpl = trim(line.substr(tab + 1));
      if (tmpl.find("{C}") == std::string::npos) throw DataError(where + ": template lacks {C}");
      bank.templates[*idx].push_back(tmpl);
    } else {
      throw DataError(where + ": line outside a known section");
    }
  }
  if (bank.subjects.empty() || bank.causes.empty()) throw DataError(path + ": subjects and causes must be nonempty");
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    if (bank.templates[k].empty()) {
      throw DataError(path + ": no template for emotion '" + std::string(emotion_name(k)) + "'");
    }
  }
  return bank;
}

std::string resource_dir() {
  if (const char* env = std::getenv("EMOCAUSE_RESOURCE_DIR")) return env;
  return EMOCAUSE_RESOURCE_DIR;
}

std::vector<Example> generate_synthetic(std::size_t n, std::uint64_t seed, const TemplateBank& bank) {
  static const std::vector<std::string> kDistractors = {"shame", "optimism", "trust", "love"};
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t emotion = i % kNumEmotions;
    const auto& options = bank.templates[emotion];
    const std::string& tmpl = options[rng.below(options.size())];
    const std::string& subject = bank.subjects[rng.below(bank.subjects.size())];
    const std::string& cause = bank.causes[rng.below(bank.causes.size())];

    std::string headline;
    CharSpan span;
    for (std::size_t pos = 0; pos < tmpl.size();) {
      if (tmpl.compare(pos, 3, "{S}") == 0) {
        headline += subject;
        pos += 3;
      } else if (tmpl.compare(pos, 3, "{C}") == 0) {
        span.begin = decode_utf8(headline).size();
        headline += cause;
        span.end = decode_utf8(headline).size();
        pos += 3;
      } else {
        headline += tmpl[pos++];
      }
    }
    if (!headline.empty()) {
      // Headline case, as in news titles.
      if (headline[0] >= 'a' && headline[0] <= 'z') headline[0] = static_cast<char>(headline[0] - 32);
    }

    Example ex;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", i);
    ex.id = id;
    ex.headline = std::move(headline);
    ex.emotion = std::string(emotion_name(emotion));
    ex.cause = span;
    ex.annotator_emotions = {ex.emotion, ex.emotion};
    if (rng.bernoulli(0.4)) {
      // A distractor: another target emotion or a non-target label.
      const std::size_t pick = rng.below(kNumEmotions - 1 + kDistractors.size());
      if (pick < kNumEmotions - 1) {
        ex.annotator_emotions.emplace_back(emotion_name(pick >= emotion ? pick + 1 : pick));
      } else {
        ex.annotator_emotions.push_back(kDistractors[pick - (kNumEmotions - 1)]);
      }
    } else {
      ex.annotator_emotions.push_back(ex.emotion);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace emocause
