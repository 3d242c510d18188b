#pragma once

// Slow, obviously-correct reference versions of the metrics.

#include <algorithm>
#include <iterator>
#include <set>
#include <utility>
#include <vector>

#include "emocause/labels.hpp"
#include "emocause/metrics.hpp"

namespace oracle {

inline double label_f1(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold, std::size_t k) {
  std::vector<std::vector<std::size_t>> confusion(emocause::kNumEmotions,
                                                  std::vector<std::size_t>(emocause::kNumEmotions, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++confusion[gold[i]][pred[i]];
  const double tp = static_cast<double>(confusion[k][k]);
  double col = 0, row = 0;
  for (std::size_t j = 0; j < emocause::kNumEmotions; ++j) {
    col += static_cast<double>(confusion[j][k]);
    row += static_cast<double>(confusion[k][j]);
  }
  // Harmonic mean of tp/col and tp/row, i.e. 2tp / (row + col).
  return row + col == 0 ? 0.0 : 2 * tp / (row + col);
}

inline double macro_f1(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold) {
  double s = 0;
  for (std::size_t k = 0; k < emocause::kNumEmotions; ++k) s += label_f1(pred, gold, k);
  return s / static_cast<double>(emocause::kNumEmotions);
}

// Every [i, j] that a B I* / I I* reading of the tags yields, found by
// checking all index pairs.
inline std::set<std::pair<std::size_t, std::size_t>> spans_of(const std::vector<int>& tags) {
  auto in_span = [](int t) { return t == emocause::kTagBegin || t == emocause::kTagInside; };
  std::set<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = tags.size();
  for (std::size_t i = 0; i < n; ++i) {
    const bool opens = tags[i] == emocause::kTagBegin ||
                       (tags[i] == emocause::kTagInside && (i == 0 || !in_span(tags[i - 1])));
    if (!opens) continue;
    for (std::size_t j = i; j < n; ++j) {
      bool body = true;
      for (std::size_t m = i + 1; m <= j; ++m) body = body && tags[m] == emocause::kTagInside;
      const bool closes = j + 1 == n || tags[j + 1] != emocause::kTagInside;
      if (body && closes) out.emplace(i, j);
    }
  }
  return out;
}

inline emocause::SpanCounts span_counts(const std::vector<std::vector<int>>& pred,
                                        const std::vector<std::vector<int>>& gold) {
  emocause::SpanCounts c;
  for (std::size_t e = 0; e < pred.size(); ++e) {
    const auto p = spans_of(pred[e]);
    const auto g = spans_of(gold[e]);
    std::vector<std::pair<std::size_t, std::size_t>> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    c.tp += both.size();
    c.fp += p.size() - both.size();
    c.fn += g.size() - both.size();
  }
  return c;
}

// 2tp / (|pred| + |gold|).
inline double f1(const emocause::SpanCounts& c) {
  const std::size_t total = (c.tp + c.fp) + (c.tp + c.fn);
  return total == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(total);
}

}  // namespace oracle
