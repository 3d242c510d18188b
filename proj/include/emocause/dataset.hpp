#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emocause/text.hpp"

namespace emocause {

struct Example {
  std::string id;
  std::string headline;
  // Raw gold label; filter_labels keeps only the seven target emotions.
  std::string emotion;
  CharSpan cause;
  // Every label any annotator gave, including non-target ones.
  std::vector<std::string> annotator_emotions;
  std::optional<std::string> knowledge;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class CorpusFormat { jsonl, tsv };

CorpusFormat parse_corpus_format(std::string_view name);

struct LoadStats {
  std::size_t loaded = 0;
  std::size_t skipped_without_cause = 0;
};

// JSON lines: {"id", "headline", "emotion", "cause_span": [s, e],
// "annotator_emotions": [...], optional "knowledge"}. Records without a
// cause span are skipped and counted. TSV: id, headline, emotion, cause
// text, comma-separated annotator labels; the cause text must occur in the
// headline. Errors carry path and line number.
std::vector<Example> load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::jsonl,
                                 LoadStats* stats = nullptr);

// One JSON object per example, fields in loader order.
std::string to_jsonl(const Example& example);
void save_corpus(const std::string& path, const std::vector<Example>& examples);

struct FilterStats {
  std::size_t kept = 0;
  // Dropped examples per raw label.
  std::map<std::string, std::size_t> dropped;
};

// Keeps examples whose gold label is one of the seven target emotions and
// rewrites that label to its canonical name.
std::vector<Example> filter_labels(const std::vector<Example>& examples, FilterStats* stats = nullptr);

// Gold emotion index of a filtered example; DataError for other labels.
std::size_t emotion_index(const Example& example);

struct SplitSpec {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

// Seeded shuffle, then ⌊train·n⌋ / ⌊dev·n⌋ / remainder. n < 10 -> DataError.
Splits split(const std::vector<Example>& examples, const SplitSpec& spec);

// Emotion-keyed headline templates with {S} (subject) and {C} (cause)
// slots, plus the phrase banks that fill them.
struct TemplateBank {
  std::vector<std::string> subjects;
  std::vector<std::string> causes;
  // Templates per emotion index.
  std::vector<std::vector<std::string>> templates;

  // Sections "[subjects]", "[causes]" and "[templates]"; template lines are
  // "emotion<TAB>template". Every emotion needs at least one template.
  static TemplateBank load(const std::string& path);
};

// Bundled resource directory (templates, lexicon, sample files).
std::string resource_dir();

// Example i has emotion i mod 7 so classes stay balanced; the cause span is
// the {C} substitution. Annotator labels hold the gold twice plus a third
// label that is a distractor with probability 0.4.
std::vector<Example> generate_synthetic(std::size_t n, std::uint64_t seed, const TemplateBank& bank);

}  // namespace emocause
