#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "emocause/config.hpp"
#include "emocause/dataset.hpp"
#include "emocause/knowledge.hpp"
#include "emocause/metrics.hpp"
#include "emocause/model.hpp"
#include "emocause/text.hpp"

namespace emocause {

// Provider named by config.knowledge, or null for "none" and "corpus".
// "lexicon" uses the bundled lexicon.
std::unique_ptr<KnowledgeProvider> make_provider(const RunConfig& config);

// Fills each example's knowledge text from the provider (rendered sentence).
// With knowledge "corpus" examples must already carry text; a missing one is
// a DataError. With "none" knowledge is cleared.
std::vector<Example> attach_knowledge(std::vector<Example> examples, const RunConfig& config,
                                      const KnowledgeProvider* provider);

// Subword vocabulary learned from the headlines (and knowledge texts) of the
// given examples.
Vocab build_vocab(const std::vector<Example>& examples, const RunConfig& config);

// Encoded model inputs plus the gold labels evaluation needs.
struct PreparedData {
  std::vector<std::string> ids;
  std::vector<std::string> headlines;
  std::vector<EncodedInput> inputs;
  std::vector<std::size_t> emotions;
  std::vector<std::vector<WordSpan>> gold_spans;
  std::vector<std::vector<std::string>> annotator_emotions;

  std::size_t size() const { return inputs.size(); }
  std::vector<const EncodedInput*> pointers() const;
  // True when every example carries annotator labels.
  bool has_annotators() const;
};

// Examples must be label-filtered and carry knowledge when the config uses it.
PreparedData prepare(const std::vector<Example>& examples, const Vocab& vocab, const RunConfig& config);

inline constexpr std::size_t kEvalChunk = 64;

// Predictions for every example, in chunks of kEvalChunk.
std::vector<Prediction> predict_all(const Model& model, const PreparedData& data);

EvalInput eval_input(const Model& model, const std::vector<Prediction>& predictions, const PreparedData& data);

EvalReport evaluate_model(const Model& model, const PreparedData& data);

double target_value(const EvalReport& report, TargetMetric target);

}  // namespace emocause
