#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emocause {

// Half-open character range [begin, end) counted in Unicode code points.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

// Inclusive word-index range [first, last].
struct WordSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend auto operator<=>(const WordSpan&, const WordSpan&) = default;
};

// A lowercased pre-token with its code-point offsets in the source text.
struct Word {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(std::span<const char32_t> code_points);

// Splits on whitespace; every punctuation character becomes its own word.
// Output is lowercased.
std::vector<Word> split_words(std::string_view text);

class Vocab {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kContinuation = "##";

  // Vocabulary holding only the reserved tokens.
  Vocab();
  // Token list in id order; must contain the reserved tokens exactly once and
  // no duplicates (DataError otherwise).
  static Vocab from_tokens(std::vector<std::string> tokens);
  // One token per line, UTF-8.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  // Appends a token if absent; returns its id.
  int add(const std::string& token);
  std::optional<int> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = 0, unk_ = 1, cls_ = 2, sep_ = 3;
};

// Learns a subword vocabulary of at most `max_size` entries by repeatedly
// merging the most frequent adjacent symbol pair (ties broken
// lexicographically). Every character of the corpus is present both as a
// word-initial and a continuation piece. Empty corpus -> DataError;
// max_size too small for the alphabet -> ConfigError.
Vocab train_vocab(std::span<const std::string> corpus, std::size_t max_size);

struct Tokenization {
  std::vector<Word> words;
  std::vector<std::string> pieces;
  std::vector<std::size_t> word_index;
  std::vector<bool> is_first_subword;
};

// Greedy longest-match-first decomposition of each word. A residue that
// matches nothing becomes a single [UNK] piece.
Tokenization tokenize(std::string_view text, const Vocab& vocab);

inline constexpr std::size_t kDefaultSingleMaxLen = 64;
inline constexpr std::size_t kDefaultPairMaxLen = 128;
inline constexpr int kNoWord = -1;

struct EncodedInput {
  std::vector<int> token_ids;
  // 0 for the headline segment, 1 for the knowledge segment.
  std::vector<int> segment_ids;
  // Source word within the token's segment, kNoWord for specials/padding.
  std::vector<int> word_index;
  std::vector<bool> is_first_subword;
  // Per-token cause tags (kIgnoreTag off the headline); empty if unlabeled.
  std::vector<int> iob_tags;
  std::vector<bool> attention_mask;
  // Number of headline words (before truncation).
  std::size_t headline_words = 0;

  std::size_t length() const { return token_ids.size(); }
  // Unpadded prefix length.
  std::size_t valid_length() const;
  // Positions of headline subword tokens (segment 0, excluding specials).
  std::vector<std::size_t> headline_positions() const;
  // Headline positions that start a word.
  std::vector<std::size_t> first_subword_positions() const;
};

// [CLS] headline [SEP], padded/truncated to max_len. max_len < 3 ->
// ConfigError. When `cause` is given the headline tokens carry IOB tags.
EncodedInput encode_single(std::string_view headline, const Vocab& vocab,
                           std::size_t max_len = kDefaultSingleMaxLen,
                           std::optional<CharSpan> cause = std::nullopt);

// [CLS] headline [SEP] knowledge [SEP]. Truncation drops knowledge tokens
// before headline tokens.
EncodedInput encode_pair(std::string_view headline, std::string_view knowledge, const Vocab& vocab,
                         std::size_t max_len = kDefaultPairMaxLen,
                         std::optional<CharSpan> cause = std::nullopt);

struct IobAlignment {
  std::vector<int> word_tags;
  std::vector<int> token_tags;
};

// Words overlapping the character span get B (first) then I; the rest O.
// Token tags repeat the word tag on the first subword and use I on
// continuations of cause words. Invalid spans -> DataError naming
// `example_id`.
IobAlignment align_span_to_iob(std::string_view headline, CharSpan cause, const Tokenization& tokens,
                               std::string_view example_id = {});

// Word-level tags only.
std::vector<int> word_tags_for_span(std::string_view headline, CharSpan cause, std::string_view example_id = {});

// Maximal B I* runs. An I with no open span opens one; kIgnoreTag acts as O.
std::vector<WordSpan> decode_iob(std::span<const int> tags);

// Code-point span of a word range in the original text.
CharSpan char_span_of_words(std::span<const Word> words, WordSpan span);

}  // namespace emocause
