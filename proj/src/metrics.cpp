#include "emocause/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "emocause/error.hpp"

namespace emocause {

using ordered_json = nlohmann::ordered_json;

namespace {

void same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DataError(std::string(what) + ": " + std::to_string(a) + " predictions for " + std::to_string(b) +
                    " gold labels");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  same_length(predicted.size(), gold.size(), "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
  return ratio(correct, gold.size());
}

std::vector<double> per_label_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                                 std::size_t num_labels) {
  same_length(predicted.size(), gold.size(), "macro_f1");
  std::vector<std::size_t> tp(num_labels), fp(num_labels), fn(num_labels);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] >= num_labels || gold[i] >= num_labels) throw DataError("macro_f1: label out of range");
    if (predicted[i] == gold[i]) {
      ++tp[gold[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[gold[i]];
    }
  }
  std::vector<double> f1(num_labels);
  for (std::size_t k = 0; k < num_labels; ++k) f1[k] = ratio(2 * tp[k], 2 * tp[k] + fp[k] + fn[k]);
  return f1;
}

double macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold, std::size_t num_labels) {
  const std::vector<double> f1 = per_label_f1(predicted, gold, num_labels);
  double total = 0.0;
  for (double v : f1) total += v;
  return num_labels == 0 ? 0.0 : total / static_cast<double>(num_labels);
}

double SpanCounts::precision() const { return ratio(tp, tp + fp); }
double SpanCounts::recall() const { return ratio(tp, tp + fn); }
double SpanCounts::f1() const { return ratio(2 * tp, 2 * tp + fp + fn); }

SpanCounts& SpanCounts::operator+=(const SpanCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

SpanCounts span_counts(std::span<const std::vector<WordSpan>> predicted, std::span<const std::vector<WordSpan>> gold) {
  same_length(predicted.size(), gold.size(), "span_f1");
  SpanCounts counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<WordSpan> p(predicted[i].begin(), predicted[i].end());
    const std::set<WordSpan> g(gold[i].begin(), gold[i].end());
    std::size_t hit = 0;
    for (const WordSpan& s : p) hit += g.count(s);
    counts.tp += hit;
    counts.fp += p.size() - hit;
    counts.fn += g.size() - hit;
  }
  return counts;
}

double not_gold_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                         std::span<const std::vector<std::string>> annotator_emotions) {
  same_length(predicted.size(), gold.size(), "not_gold_accuracy");
  same_length(annotator_emotions.size(), gold.size(), "not_gold_accuracy annotators");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (annotator_emotions[i].empty()) {
      throw DataError("not_gold_accuracy: example " + std::to_string(i) + " has no annotator labels");
    }
    if (predicted[i] == gold[i]) continue;
    const bool suggested = std::any_of(annotator_emotions[i].begin(), annotator_emotions[i].end(),
                                       [&](const std::string& label) { return parse_emotion(label) == predicted[i]; });
    hits += suggested;
  }
  return ratio(hits, gold.size());
}

namespace {

// Restricts every per-example field of `input` to the listed rows.
EvalInput subset(const EvalInput& input, const std::vector<std::size_t>& rows) {
  EvalInput out;
  for (std::size_t r : rows) {
    out.gold_emotions.push_back(input.gold_emotions[r]);
    if (!input.predicted_emotions.empty()) out.predicted_emotions.push_back(input.predicted_emotions[r]);
    if (!input.predicted_spans.empty()) {
      out.predicted_spans.push_back(input.predicted_spans[r]);
      out.gold_spans.push_back(input.gold_spans[r]);
    }
    if (!input.annotator_emotions.empty()) out.annotator_emotions.push_back(input.annotator_emotions[r]);
  }
  return out;
}

bool annotators_complete(const EvalInput& input) {
  return !input.annotator_emotions.empty() &&
         std::none_of(input.annotator_emotions.begin(), input.annotator_emotions.end(),
                      [](const auto& labels) { return labels.empty(); });
}

void validate(const EvalInput& input) {
  const std::size_t n = input.gold_emotions.size();
  if (!input.predicted_emotions.empty()) same_length(input.predicted_emotions.size(), n, "evaluate emotions");
  if (!input.predicted_spans.empty()) {
    same_length(input.predicted_spans.size(), n, "evaluate spans");
    same_length(input.gold_spans.size(), n, "evaluate gold spans");
  }
  if (!input.annotator_emotions.empty()) same_length(input.annotator_emotions.size(), n, "evaluate annotators");
}

}  // namespace

std::vector<EmotionBreakdown> per_emotion_breakdown(const EvalInput& input) {
  validate(input);
  std::vector<double> label_f1;
  if (!input.predicted_emotions.empty()) label_f1 = per_label_f1(input.predicted_emotions, input.gold_emotions);
  std::vector<EmotionBreakdown> out(kNumEmotions);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    EmotionBreakdown& b = out[k];
    b.label = std::string(emotion_name(k));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < input.gold_emotions.size(); ++i) {
      if (input.gold_emotions[i] == k) rows.push_back(i);
    }
    b.support = rows.size();
    b.present = !rows.empty();
    if (!b.present) continue;
    const EvalInput sub = subset(input, rows);
    if (!sub.predicted_emotions.empty()) {
      b.correct = static_cast<std::size_t>(
          std::count(sub.predicted_emotions.begin(), sub.predicted_emotions.end(), k));
      b.accuracy = accuracy(sub.predicted_emotions, sub.gold_emotions);
      b.f1 = label_f1[k];
      if (annotators_complete(sub)) {
        b.not_gold_accuracy = not_gold_accuracy(sub.predicted_emotions, sub.gold_emotions, sub.annotator_emotions);
      }
    }
    if (!sub.predicted_spans.empty()) b.spans = span_counts(sub.predicted_spans, sub.gold_spans);
  }
  return out;
}

EvalReport evaluate(const EvalInput& input) {
  validate(input);
  EvalReport r;
  r.examples = input.gold_emotions.size();
  if (!input.predicted_emotions.empty()) {
    r.emotion_macro_f1 = macro_f1(input.predicted_emotions, input.gold_emotions);
    r.emotion_accuracy = accuracy(input.predicted_emotions, input.gold_emotions);
    r.gold_accuracy = r.emotion_accuracy;
    if (annotators_complete(input)) {
      r.not_gold_accuracy = not_gold_accuracy(input.predicted_emotions, input.gold_emotions, input.annotator_emotions);
    }
  }
  if (!input.predicted_spans.empty()) {
    r.spans = span_counts(input.predicted_spans, input.gold_spans);
    r.cause_span_f1 = r.spans->f1();
  }
  r.per_emotion = per_emotion_breakdown(input);
  return r;
}

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json spans_json(const std::optional<SpanCounts>& s) {
  if (!s) return nullptr;
  return {{"tp", s->tp},           {"fp", s->fp},     {"fn", s->fn},
          {"precision", s->precision()}, {"recall", s->recall()}, {"f1", s->f1()}};
}

std::optional<double> opt_double(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::optional<SpanCounts> opt_spans(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& s = j.at(key);
  return SpanCounts{s.at("tp").get<std::size_t>(), s.at("fp").get<std::size_t>(), s.at("fn").get<std::size_t>()};
}

std::string cell(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  ordered_json j;
  j["examples"] = r.examples;
  j["emotion_macro_f1"] = opt(r.emotion_macro_f1);
  j["emotion_accuracy"] = opt(r.emotion_accuracy);
  j["cause_span_f1"] = opt(r.cause_span_f1);
  j["cause_spans"] = spans_json(r.spans);
  j["gold_accuracy"] = opt(r.gold_accuracy);
  j["not_gold_accuracy"] = opt(r.not_gold_accuracy);
  ordered_json per = ordered_json::array();
  for (const auto& b : r.per_emotion) {
    per.push_back({{"label", b.label},
                   {"support", b.support},
                   {"present", b.present},
                   {"correct", b.correct},
                   {"accuracy", opt(b.accuracy)},
                   {"f1", opt(b.f1)},
                   {"cause_spans", spans_json(b.spans)},
                   {"not_gold_accuracy", opt(b.not_gold_accuracy)}});
  }
  j["per_emotion"] = per;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
  EvalReport r;
  try {
    r.examples = j.at("examples").get<std::size_t>();
    r.emotion_macro_f1 = opt_double(j, "emotion_macro_f1");
    r.emotion_accuracy = opt_double(j, "emotion_accuracy");
    r.cause_span_f1 = opt_double(j, "cause_span_f1");
    r.spans = opt_spans(j, "cause_spans");
    r.gold_accuracy = opt_double(j, "gold_accuracy");
    r.not_gold_accuracy = opt_double(j, "not_gold_accuracy");
    for (const auto& b : j.at("per_emotion")) {
      EmotionBreakdown e;
      e.label = b.at("label").get<std::string>();
      e.support = b.at("support").get<std::size_t>();
      e.present = b.at("present").get<bool>();
      e.correct = b.at("correct").get<std::size_t>();
      e.accuracy = opt_double(b, "accuracy");
      e.f1 = opt_double(b, "f1");
      e.spans = opt_spans(b, "cause_spans");
      e.not_gold_accuracy = opt_double(b, "not_gold_accuracy");
      r.per_emotion.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report JSON lacks a field: ") + e.what());
  }
  return r;
}

std::string report_csv_header() {
  return "examples,emotion_macro_f1,emotion_accuracy,cause_span_precision,cause_span_recall,cause_span_f1,"
         "span_tp,span_fp,span_fn,gold_accuracy,not_gold_accuracy";
}

std::string report_csv_row(const EvalReport& r) {
  std::string row = std::to_string(r.examples);
  row += "," + cell(r.emotion_macro_f1) + "," + cell(r.emotion_accuracy);
  if (r.spans) {
    row += "," + cell(r.spans->precision()) + "," + cell(r.spans->recall()) + "," + cell(r.spans->f1());
    row += "," + std::to_string(r.spans->tp) + "," + std::to_string(r.spans->fp) + "," + std::to_string(r.spans->fn);
  } else {
    row += ",,,,,,";
  }
  row += "," + cell(r.gold_accuracy) + "," + cell(r.not_gold_accuracy);
  return row;
}

}  // namespace emocause
