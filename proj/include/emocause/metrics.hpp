#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emocause/labels.hpp"
#include "emocause/text.hpp"

namespace emocause {

// Length mismatch -> DataError; empty input -> 0.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold);

// Per-label F1 over labels 0..num_labels-1; a label never gold nor predicted
// scores 0.
std::vector<double> per_label_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                                 std::size_t num_labels = kNumEmotions);
// Unweighted mean of per_label_f1.
double macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                std::size_t num_labels = kNumEmotions);

struct SpanCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // 0/0 -> 0 throughout.
  double precision() const;
  double recall() const;
  double f1() const;
  SpanCounts& operator+=(const SpanCounts& other);
  friend bool operator==(const SpanCounts&, const SpanCounts&) = default;
};

// Exact-match counts over a corpus: a predicted span counts only if the same
// word interval is gold for that example.
SpanCounts span_counts(std::span<const std::vector<WordSpan>> predicted, std::span<const std::vector<WordSpan>> gold);

// Fraction of examples whose prediction is a target emotion some annotator
// gave that is not the gold label. Each example counts at most once. An
// example without annotator labels -> DataError.
double not_gold_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                         std::span<const std::vector<std::string>> annotator_emotions);

struct EvalInput {
  // Empty when the model has no emotion head.
  std::vector<std::size_t> predicted_emotions;
  // Always filled; also drives the per-emotion breakdown.
  std::vector<std::size_t> gold_emotions;
  // Empty when the model has no cause head.
  std::vector<std::vector<WordSpan>> predicted_spans;
  std::vector<std::vector<WordSpan>> gold_spans;
  // Empty when unavailable; otherwise one list per example.
  std::vector<std::vector<std::string>> annotator_emotions;
};

struct EmotionBreakdown {
  std::string label;
  std::size_t support = 0;
  // Absent labels have no gold examples and no scores.
  bool present = false;
  std::size_t correct = 0;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<SpanCounts> spans;
  std::optional<double> not_gold_accuracy;
};

struct EvalReport {
  std::size_t examples = 0;
  std::optional<double> emotion_macro_f1;
  std::optional<double> emotion_accuracy;
  std::optional<SpanCounts> spans;
  std::optional<double> cause_span_f1;
  std::optional<double> gold_accuracy;
  std::optional<double> not_gold_accuracy;
  std::vector<EmotionBreakdown> per_emotion;
};

EvalReport evaluate(const EvalInput& input);

// Per gold label: accuracy, span counts and ¬Gold accuracy on the examples
// with that gold emotion, plus that label's corpus-level F1.
std::vector<EmotionBreakdown> per_emotion_breakdown(const EvalInput& input);

// Pretty JSON with fractions in [0, 1]; missing metrics are null.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// Fixed columns, documented in the README; missing metrics are empty cells.
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

}  // namespace emocause
