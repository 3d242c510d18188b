#include "emocause/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "emocause/error.hpp"
#include "emocause/labels.hpp"

namespace emocause {

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + extra >= text.size()) {
      throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) throw DataError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_utf8(std::span<const char32_t> code_points) {
  std::string out;
  for (char32_t cp : code_points) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' || c == 0xA0 ||
         c == 0x3000 || (c >= 0x2000 && c <= 0x200A);
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB5 && c != 0xBA);
}

char32_t lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

std::string strip_continuation(const std::string& piece) {
  return piece.starts_with(Vocab::kContinuation) ? piece.substr(Vocab::kContinuation.size()) : piece;
}

}  // namespace

std::vector<Word> split_words(std::string_view text) {
  const std::vector<char32_t> cps = decode_utf8(text);
  std::vector<Word> words;
  std::vector<char32_t> current;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (!current.empty()) words.push_back({encode_utf8(current), start, end});
    current.clear();
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (is_space(c)) {
      flush(i);
    } else if (is_punct(c)) {
      flush(i);
      const char32_t one[] = {lower(c)};
      words.push_back({encode_utf8(one), i, i + 1});
    } else {
      if (current.empty()) start = i;
      current.push_back(lower(c));
    }
  }
  flush(cps.size());
  return words;
}

Vocab::Vocab() {
  for (std::string_view t : {kPad, kUnk, kCls, kSep}) add(std::string(t));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_.clear();
  v.ids_.clear();
  for (std::string& t : tokens) {
    if (t.empty()) throw DataError("empty token in vocabulary");
    if (v.ids_.contains(t)) throw DataError("duplicate vocabulary token '" + t + "'");
    v.ids_.emplace(t, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(std::move(t));
  }
  auto reserved = [&](std::string_view name) {
    auto it = v.ids_.find(std::string(name));
    if (it == v.ids_.end()) throw DataError("vocabulary lacks reserved token " + std::string(name));
    return it->second;
  };
  v.pad_ = reserved(kPad);
  v.unk_ = reserved(kUnk);
  v.cls_ = reserved(kCls);
  v.sep_ = reserved(kSep);
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file '" + path + "'");
  for (const std::string& t : tokens_) out << t << '\n';
}

int Vocab::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab train_vocab(std::span<const std::string> corpus, std::size_t max_size) {
  if (corpus.empty()) throw DataError("cannot train a vocabulary on an empty corpus");

  std::map<std::string, std::size_t> word_counts;
  for (const std::string& line : corpus) {
    for (const Word& w : split_words(line)) ++word_counts[w.text];
  }

  // Symbol sequences per distinct word, WordPiece-style ("##" continuation).
  struct WordSymbols {
    std::vector<std::string> symbols;
    std::size_t count;
  };
  std::vector<WordSymbols> words;
  std::set<std::string> alphabet;
  for (const auto& [text, count] : word_counts) {
    const std::vector<char32_t> cps = decode_utf8(text);
    WordSymbols ws{{}, count};
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const char32_t one[] = {cps[i]};
      const std::string ch = encode_utf8(one);
      alphabet.insert(ch);
      ws.symbols.push_back(i == 0 ? ch : std::string(Vocab::kContinuation) + ch);
    }
    words.push_back(std::move(ws));
  }

  Vocab vocab;
  const std::size_t required = vocab.size() + 2 * alphabet.size();
  if (max_size < required) {
    throw ConfigError("vocabulary size " + std::to_string(max_size) + " cannot hold the " +
                      std::to_string(alphabet.size()) + "-character alphabet (need " + std::to_string(required) +
                      ")");
  }
  for (const std::string& ch : alphabet) vocab.add(ch);
  for (const std::string& ch : alphabet) vocab.add(std::string(Vocab::kContinuation) + ch);

  while (vocab.size() < max_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const WordSymbols& ws : words) {
      for (std::size_t i = 0; i + 1 < ws.symbols.size(); ++i) pairs[{ws.symbols[i], ws.symbols[i + 1]}] += ws.count;
    }
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 0;
    // std::map iterates lexicographically, so the first maximum wins ties.
    for (const auto& [pair, count] : pairs) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best || best_count < 2) break;
    const std::string left = best->first, right = best->second;
    const std::string merged = left + strip_continuation(right);
    for (WordSymbols& ws : words) {
      std::vector<std::string> next;
      next.reserve(ws.symbols.size());
      for (std::size_t i = 0; i < ws.symbols.size(); ++i) {
        if (i + 1 < ws.symbols.size() && ws.symbols[i] == left && ws.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(ws.symbols[i]);
        }
      }
      ws.symbols = std::move(next);
    }
    vocab.add(merged);
  }
  return vocab;
}

Tokenization tokenize(std::string_view text, const Vocab& vocab) {
  Tokenization out;
  out.words = split_words(text);
  for (std::size_t w = 0; w < out.words.size(); ++w) {
    const std::vector<char32_t> cps = decode_utf8(out.words[w].text);
    std::size_t start = 0;
    while (start < cps.size()) {
      std::size_t end = cps.size();
      std::optional<std::string> match;
      while (end > start) {
        std::string piece = encode_utf8(std::span(cps).subspan(start, end - start));
        if (start > 0) piece = std::string(Vocab::kContinuation) + piece;
        if (vocab.contains(piece)) {
          match = std::move(piece);
          break;
        }
        --end;
      }
      out.word_index.push_back(w);
      out.is_first_subword.push_back(start == 0);
      if (!match) {
        out.pieces.emplace_back(Vocab::kUnk);
        break;
      }
      out.pieces.push_back(std::move(*match));
      start = end;
    }
  }
  return out;
}

std::size_t EncodedInput::valid_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), true));
}

std::vector<std::size_t> EncodedInput::headline_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (attention_mask[i] && segment_ids[i] == 0 && word_index[i] != kNoWord) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> EncodedInput::first_subword_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i : headline_positions()) {
    if (is_first_subword[i]) out.push_back(i);
  }
  return out;
}

namespace {

void push_token(EncodedInput& e, int id, int segment, int word, bool first, int tag) {
  e.token_ids.push_back(id);
  e.segment_ids.push_back(segment);
  e.word_index.push_back(word);
  e.is_first_subword.push_back(first);
  e.iob_tags.push_back(tag);
  e.attention_mask.push_back(true);
}

EncodedInput build(std::string_view headline, const Tokenization& head, const Tokenization* knowledge,
                   std::size_t head_keep, std::size_t know_keep, const Vocab& vocab, std::size_t max_len,
                   std::optional<CharSpan> cause) {
  EncodedInput e;
  e.headline_words = head.words.size();
  std::vector<int> tags;
  if (cause) tags = align_span_to_iob(headline, *cause, head).token_tags;

  auto id_of = [&](const std::string& piece) { return vocab.find(piece).value_or(vocab.unk_id()); };
  push_token(e, vocab.cls_id(), 0, kNoWord, false, kIgnoreTag);
  for (std::size_t i = 0; i < head_keep; ++i) {
    push_token(e, id_of(head.pieces[i]), 0, static_cast<int>(head.word_index[i]), head.is_first_subword[i],
               cause ? tags[i] : kIgnoreTag);
  }
  push_token(e, vocab.sep_id(), 0, kNoWord, false, kIgnoreTag);
  if (knowledge) {
    for (std::size_t i = 0; i < know_keep; ++i) {
      push_token(e, id_of(knowledge->pieces[i]), 1, static_cast<int>(knowledge->word_index[i]),
                 knowledge->is_first_subword[i], kIgnoreTag);
    }
    push_token(e, vocab.sep_id(), 1, kNoWord, false, kIgnoreTag);
  }
  while (e.token_ids.size() < max_len) {
    e.token_ids.push_back(vocab.pad_id());
    e.segment_ids.push_back(0);
    e.word_index.push_back(kNoWord);
    e.is_first_subword.push_back(false);
    e.iob_tags.push_back(kIgnoreTag);
    e.attention_mask.push_back(false);
  }
  if (!cause) e.iob_tags.clear();
  return e;
}

}  // namespace

EncodedInput encode_single(std::string_view headline, const Vocab& vocab, std::size_t max_len,
                           std::optional<CharSpan> cause) {
  if (max_len < 3) throw ConfigError("max_len must be at least 3, got " + std::to_string(max_len));
  const Tokenization head = tokenize(headline, vocab);
  const std::size_t keep = std::min(head.pieces.size(), max_len - 2);
  return build(headline, head, nullptr, keep, 0, vocab, max_len, cause);
}

EncodedInput encode_pair(std::string_view headline, std::string_view knowledge, const Vocab& vocab,
                         std::size_t max_len, std::optional<CharSpan> cause) {
  if (max_len < 3) throw ConfigError("max_len must be at least 3, got " + std::to_string(max_len));
  const Tokenization head = tokenize(headline, vocab);
  const Tokenization know = tokenize(knowledge, vocab);
  const std::size_t budget = max_len - 3;
  const std::size_t head_keep = std::min(head.pieces.size(), budget);
  const std::size_t know_keep = std::min(know.pieces.size(), budget - head_keep);
  return build(headline, head, &know, head_keep, know_keep, vocab, max_len, cause);
}

std::vector<int> word_tags_for_span(std::string_view headline, CharSpan cause, std::string_view example_id) {
  const std::size_t length = decode_utf8(headline).size();
  if (cause.begin >= cause.end || cause.end > length) {
    std::string where = example_id.empty() ? std::string() : " in example '" + std::string(example_id) + "'";
    throw DataError("invalid cause span [" + std::to_string(cause.begin) + ", " + std::to_string(cause.end) +
                    ") for headline of length " + std::to_string(length) + where);
  }
  const std::vector<Word> words = split_words(headline);
  std::vector<int> tags(words.size(), kTagOutside);
  bool opened = false;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].begin < cause.end && words[w].end > cause.begin) {
      tags[w] = opened ? kTagInside : kTagBegin;
      opened = true;
    }
  }
  return tags;
}

IobAlignment align_span_to_iob(std::string_view headline, CharSpan cause, const Tokenization& tokens,
                               std::string_view example_id) {
  IobAlignment out;
  out.word_tags = word_tags_for_span(headline, cause, example_id);
  if (out.word_tags.size() != tokens.words.size()) throw DataError("tokenization does not belong to this headline");
  out.token_tags.reserve(tokens.pieces.size());
  for (std::size_t i = 0; i < tokens.pieces.size(); ++i) {
    const int word_tag = out.word_tags[tokens.word_index[i]];
    if (tokens.is_first_subword[i] || word_tag == kTagOutside) {
      out.token_tags.push_back(word_tag);
    } else {
      out.token_tags.push_back(kTagInside);
    }
  }
  return out;
}

std::vector<WordSpan> decode_iob(std::span<const int> tags) {
  std::vector<WordSpan> spans;
  std::optional<WordSpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int t = tags[i];
    if (t == kTagBegin || (t == kTagInside && !open)) {
      if (open) spans.push_back(*open);
      open = WordSpan{i, i};
    } else if (t == kTagInside) {
      open->last = i;
    } else {
      if (open) spans.push_back(*open);
      open.reset();
    }
  }
  if (open) spans.push_back(*open);
  return spans;
}

CharSpan char_span_of_words(std::span<const Word> words, WordSpan span) {
  if (span.first > span.last || span.last >= words.size()) throw DataError("word span outside the headline");
  return {words[span.first].begin, words[span.last].end};
}

}  // namespace emocause
