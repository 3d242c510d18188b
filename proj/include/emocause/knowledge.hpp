#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emocause {

// Which common-sense relations to request: how the subject feels (xReact),
// how others feel (oReact), or both.
enum class Relations { x_react, o_react, both };

Relations parse_relations(std::string_view name);
std::string to_string(Relations relations);

struct KnowledgeRequest {
  std::string headline;
  Relations relations = Relations::both;
  // Phrases per relation.
  std::size_t top_k = 2;
};

struct KnowledgeResult {
  std::vector<std::string> x_react;
  std::vector<std::string> o_react;

  bool empty() const { return x_react.empty() && o_react.empty(); }
  friend bool operator==(const KnowledgeResult&, const KnowledgeResult&) = default;
};

class KnowledgeProvider {
 public:
  virtual ~KnowledgeProvider() = default;
  // Deterministic for a given instance and request. top_k == 0 -> ConfigError.
  virtual KnowledgeResult provide(const KnowledgeRequest& request) const = 0;
  virtual std::string name() const = 0;
};

// Trimmed, lowercased headline used as the cache key.
std::string normalize_headline(std::string_view headline);

struct CacheEntry {
  std::string headline;
  std::vector<std::string> x_react;
  std::vector<std::string> o_react;
};

// Exact-match lookup over precomputed outputs, one JSON object per line:
// {"headline": ..., "xReact": [...], "oReact": [...]}.
class FileKnowledgeProvider : public KnowledgeProvider {
 public:
  // Malformed lines -> DataError with the line number. Duplicate headlines:
  // the last entry wins and a warning is recorded.
  static FileKnowledgeProvider load_cache(const std::string& path);
  static FileKnowledgeProvider from_entries(const std::vector<CacheEntry>& entries);

  // Unknown headline -> NotFoundError naming it.
  KnowledgeResult provide(const KnowledgeRequest& request) const override;
  std::string name() const override { return "file"; }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void insert(const CacheEntry& entry, const std::string& where);

  std::map<std::string, KnowledgeResult> entries_;
  std::vector<std::string> warnings_;
};

void write_cache(const std::string& path, const std::vector<CacheEntry>& entries);

// Keyword lexicon: each headline word that is a keyword contributes its
// phrases, in headline order, without repeats. No match yields ["unsure"]
// for both relations.
class LexiconKnowledgeProvider : public KnowledgeProvider {
 public:
  struct Phrases {
    std::vector<std::string> x_react;
    std::vector<std::string> o_react;
  };

  explicit LexiconKnowledgeProvider(std::map<std::string, Phrases> lexicon);
  // Tab-separated lines: keyword, comma-separated xReact, comma-separated
  // oReact. Blank lines and lines starting with '#' are skipped.
  static LexiconKnowledgeProvider load(const std::string& path);

  KnowledgeResult provide(const KnowledgeRequest& request) const override;
  std::string name() const override { return "lexicon"; }

  static constexpr std::string_view kFallback = "unsure";

 private:
  std::map<std::string, Phrases> lexicon_;
};

// "This person feels A and B." for xReact, "Others feel C." for oReact,
// xReact first. Phrases beyond two are joined "A, B and C". Empty -> "".
std::string render_template(const KnowledgeResult& result, Relations relations);

}  // namespace emocause
