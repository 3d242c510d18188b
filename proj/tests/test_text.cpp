#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "emocause/error.hpp"
#include "emocause/labels.hpp"
#include "emocause/rng.hpp"
#include "emocause/text.hpp"

using namespace emocause;

namespace {

const std::vector<std::string> kCorpus = {
    "Sudan protests: Outrage as troops open fire on protestors",
    "Durant could return for Game 3",
    "Man arrested after dog rescued from burning car",
    "Scientists discover new species of deep-sea fish",
    "Café owner wins award for best crème brûlée",
};

std::string strip_marker(const std::string& piece) {
  return piece.rfind("##", 0) == 0 ? piece.substr(2) : piece;
}

void check_lengths(const EncodedInput& in) {
  const std::size_t n = in.token_ids.size();
  CHECK(in.segment_ids.size() == n);
  CHECK(in.word_index.size() == n);
  CHECK(in.is_first_subword.size() == n);
  CHECK(in.attention_mask.size() == n);
  if (!in.iob_tags.empty()) CHECK(in.iob_tags.size() == n);
}

}  // namespace

TEST_CASE("labels") {
  CHECK(kNumEmotions == 7);
  CHECK(emotion_name(0) == "anger");
  CHECK(emotion_name(6) == "positive surprise");
  CHECK(parse_emotion("Negative_Surprise") == std::optional<std::size_t>(5));
  CHECK(parse_emotion("positive-surprise") == std::optional<std::size_t>(6));
  CHECK_FALSE(parse_emotion("shame").has_value());
  CHECK(kNumCauseTags == 3);
  CHECK(kTagInside == 0);
  CHECK(kTagOutside == 1);
  CHECK(kTagBegin == 2);
}

TEST_CASE("split_words lowercases and isolates punctuation") {
  const auto words = split_words("Sudan protests: Outrage!");
  REQUIRE(words.size() == 5);
  CHECK(words[0].text == "sudan");
  CHECK(words[2].text == ":");
  CHECK(words[2].begin == 14);
  CHECK(words[2].end == 15);
  CHECK(words[4].text == "!");
  const auto accented = split_words("CRÈME Brûlée");
  REQUIRE(accented.size() == 2);
  CHECK(accented[0].text == "crème");
  CHECK(accented[1].begin == 6);
  CHECK(split_words("").empty());
  CHECK(split_words("   ").empty());
}

TEST_CASE("train_vocab") {
  CHECK_THROWS_AS(train_vocab({}, 100), DataError);

  const std::vector<std::string> tiny = {"aa aa"};
  const Vocab v = train_vocab(tiny, 10);
  CHECK(v.size() <= 10);
  CHECK(v.contains("a"));
  CHECK(v.contains("##a"));
  const Tokenization t = tokenize("aa", v);
  std::string joined;
  for (const auto& p : t.pieces) joined += strip_marker(p);
  CHECK(joined == "aa");
  CHECK(v.contains("aa"));

  const Vocab big = train_vocab(kCorpus, 300);
  CHECK(big.size() <= 300);
  for (const auto& line : kCorpus) {
    for (const auto& w : split_words(line)) {
      for (char32_t c : decode_utf8(w.text)) {
        const std::u32string one(1, c);
        CHECK(big.contains(encode_utf8(one)));
      }
    }
    for (const auto& p : tokenize(line, big).pieces) CHECK(p != Vocab::kUnk);
  }
  CHECK_THROWS_AS(train_vocab(kCorpus, 8), ConfigError);
  // Deterministic.
  CHECK(train_vocab(kCorpus, 300).tokens() == big.tokens());
}

TEST_CASE("tokenize with a given vocab") {
  const Vocab v = Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "out", "##rage"});
  const Tokenization t = tokenize("outrage", v);
  CHECK(t.pieces == std::vector<std::string>{"out", "##rage"});
  CHECK(t.is_first_subword == std::vector<bool>{true, false});
  CHECK(t.word_index == std::vector<std::size_t>{0, 0});
  CHECK(tokenize("", v).pieces.empty());

  const Tokenization unk = tokenize("outx", v);
  CHECK(unk.pieces == std::vector<std::string>{"out", "[UNK]"});
  CHECK_THROWS_AS(Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "a", "a", "[SEP]"}), DataError);
  CHECK_THROWS_AS(Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]"}), DataError);
}

TEST_CASE("tokenizer round trip and idempotence (property)") {
  const Vocab v = train_vocab(kCorpus, 200);
  for (const auto& line : kCorpus) {
    const Tokenization t = tokenize(line, v);
    std::vector<std::string> rebuilt(t.words.size());
    for (std::size_t i = 0; i < t.pieces.size(); ++i) rebuilt[t.word_index[i]] += strip_marker(t.pieces[i]);
    for (std::size_t w = 0; w < t.words.size(); ++w) CHECK(rebuilt[w] == t.words[w].text);
    // Re-tokenizing the output words gives the same pieces.
    std::string again;
    for (const auto& w : t.words) again += w.text + " ";
    CHECK(tokenize(again, v).pieces == t.pieces);
  }
}

TEST_CASE("vocab save and load") {
  const Vocab v = train_vocab(kCorpus, 150);
  const auto path = std::filesystem::temp_directory_path() / "emocause_vocab_test.txt";
  v.save(path.string());
  const Vocab back = Vocab::load(path.string());
  CHECK(back.tokens() == v.tokens());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Vocab::load("/nonexistent/vocab.txt"), Error);
}

TEST_CASE("encode_single") {
  const Vocab v = train_vocab(kCorpus, 300);
  const EncodedInput in = encode_single("Durant could", v, 16);
  check_lengths(in);
  CHECK(in.length() == 16);
  const auto n = static_cast<std::size_t>(std::count(in.attention_mask.begin(), in.attention_mask.end(), true));
  CHECK(n == tokenize("Durant could", v).pieces.size() + 2);
  CHECK(in.token_ids[0] == v.cls_id());
  CHECK(in.token_ids[n - 1] == v.sep_id());
  CHECK(in.token_ids[n] == v.pad_id());

  const EncodedInput empty = encode_single("", v, 8);
  CHECK(empty.valid_length() == 2);
  CHECK(empty.token_ids[0] == v.cls_id());
  CHECK(empty.token_ids[1] == v.sep_id());

  const EncodedInput cut = encode_single(kCorpus[0], v, 5);
  CHECK(cut.length() == 5);
  CHECK(cut.valid_length() == 5);
  CHECK(cut.token_ids[4] == v.sep_id());
  CHECK_THROWS_AS(encode_single("x", v, 2), ConfigError);
}

TEST_CASE("encode_pair") {
  const std::vector<std::string> corpus = {kCorpus[0], "This person feels angry. Others feel angry."};
  const Vocab v = train_vocab(corpus, 300);
  const std::string headline = "Sudan protests: Outrage as troops open fire on protestors";
  const std::string knowledge = "This person feels angry. Others feel angry.";
  const EncodedInput in = encode_pair(headline, knowledge, v);
  check_lengths(in);
  CHECK(std::count(in.token_ids.begin(), in.token_ids.end(), v.sep_id()) == 2);
  CHECK(std::is_sorted(in.segment_ids.begin(), in.segment_ids.begin() + static_cast<long>(in.valid_length())));
  const std::size_t n = tokenize(headline, v).pieces.size();
  const std::size_t m = tokenize(knowledge, v).pieces.size();
  CHECK(in.valid_length() == n + m + 3);
  CHECK(in.segment_ids[n + 1] == 0);  // first [SEP]
  CHECK(in.segment_ids[n + 2] == 1);

  const EncodedInput single = encode_single(headline, v, kDefaultPairMaxLen);
  const EncodedInput no_knowledge = encode_pair(headline, "", v);
  CHECK(no_knowledge.valid_length() == single.valid_length() + 1);
  for (std::size_t i = 0; i < single.valid_length(); ++i) CHECK(no_knowledge.token_ids[i] == single.token_ids[i]);
  CHECK(no_knowledge.token_ids[single.valid_length()] == v.sep_id());

  // Truncation eats knowledge before headline.
  const EncodedInput cut = encode_pair(headline, knowledge, v, n + 5);
  CHECK(cut.valid_length() == n + 5);
  CHECK(cut.headline_positions().size() == n);
  CHECK(cut.token_ids[n + 4] == v.sep_id());
  CHECK(std::count(cut.segment_ids.begin(), cut.segment_ids.end(), 1) == 3);  // two knowledge pieces and the final [SEP]
}

TEST_CASE("align_span_to_iob examples") {
  const std::string h = "Durant could return for Game 3";
  const std::vector<int> tags = word_tags_for_span(h, {7, 30});
  CHECK(tags == std::vector<int>{kTagOutside, kTagBegin, kTagInside, kTagInside, kTagInside, kTagInside});
  CHECK(decode_iob(tags) == std::vector<WordSpan>{{1, 5}});

  const std::vector<int> all = word_tags_for_span(h, {0, 30});
  CHECK(all.front() == kTagBegin);
  CHECK(std::count(all.begin(), all.end(), kTagInside) == 5);

  // Partial overlap includes the whole word.
  CHECK(word_tags_for_span(h, {9, 14}) ==
        std::vector<int>{kTagOutside, kTagBegin, kTagInside, kTagOutside, kTagOutside, kTagOutside});

  try {
    word_tags_for_span(h, {10, 4}, "ex-42");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ex-42") != std::string::npos);
  }
  CHECK_THROWS_AS(word_tags_for_span(h, {0, 31}), DataError);
  CHECK_THROWS_AS(word_tags_for_span(h, {3, 3}), DataError);

  const Vocab v = Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "out", "##rage", "as", "fire"});
  const Tokenization t = tokenize("outrage as fire", v);
  const IobAlignment a = align_span_to_iob("outrage as fire", {0, 10}, t);
  CHECK(a.word_tags == std::vector<int>{kTagBegin, kTagInside, kTagOutside});
  CHECK(a.token_tags == std::vector<int>{kTagBegin, kTagInside, kTagInside, kTagOutside});

  const EncodedInput enc = encode_single("outrage as fire", v, 8, CharSpan{0, 10});
  CHECK(enc.iob_tags.front() == kIgnoreTag);
  CHECK(enc.iob_tags[1] == kTagBegin);
  CHECK(enc.iob_tags[5] == kIgnoreTag);  // [SEP]
  CHECK(enc.iob_tags[7] == kIgnoreTag);  // [PAD]
}

TEST_CASE("decode_iob examples") {
  const int O = kTagOutside, B = kTagBegin, I = kTagInside;
  CHECK(decode_iob(std::vector<int>{O, B, I, I, O}) == std::vector<WordSpan>{{1, 3}});
  CHECK(decode_iob(std::vector<int>{O, O, O}).empty());
  CHECK(decode_iob(std::vector<int>{O, I, I}) == std::vector<WordSpan>{{1, 2}});
  CHECK(decode_iob(std::vector<int>{B, B, I}) == std::vector<WordSpan>{{0, 0}, {1, 2}});
  CHECK(decode_iob(std::vector<int>{}).empty());
}

TEST_CASE("span round trip over 10k random spans (property)") {
  Rng rng(2024);
  const char* lexicon[] = {"storm", "hits", "coast", "après", "ski", "outrage", "as", "3", "-", "fire", ":", "Ünïcode"};
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n_words = 1 + rng.below(12);
    std::string h;
    for (std::size_t i = 0; i < n_words; ++i) {
      if (i > 0) h += std::string(1 + rng.below(2), ' ');
      h += lexicon[rng.below(std::size(lexicon))];
    }
    const std::vector<Word> words = split_words(h);
    const std::size_t first = rng.below(words.size());
    const std::size_t last = first + rng.below(words.size() - first);
    const CharSpan span = char_span_of_words(words, {first, last});
    const std::vector<int> tags = word_tags_for_span(h, span);
    const auto decoded = decode_iob(tags);
    REQUIRE(decoded.size() == 1);
    CHECK(decoded[0] == WordSpan{first, last});
  }
}

TEST_CASE("per-token field lengths and framing hold on random inputs (property)") {
  const Vocab v = train_vocab(kCorpus, 200);
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string& h = kCorpus[rng.below(kCorpus.size())];
    const std::string& k = kCorpus[rng.below(kCorpus.size())];
    const std::size_t max_len = 3 + rng.below(40);
    const EncodedInput single = encode_single(h, v, max_len);
    const EncodedInput pair = encode_pair(h, k, v, std::max<std::size_t>(max_len, 4));
    for (const EncodedInput* in : {&single, &pair}) {
      check_lengths(*in);
      CHECK(in->token_ids[0] == v.cls_id());
      CHECK(in->token_ids[in->valid_length() - 1] == v.sep_id());
      for (std::size_t i = in->valid_length(); i < in->length(); ++i) CHECK_FALSE(in->attention_mask[i]);
    }
  }
}
