#include "emocause/pipeline.hpp"

#include <algorithm>

#include "emocause/error.hpp"

namespace emocause {

std::unique_ptr<KnowledgeProvider> make_provider(const RunConfig& config) {
  const std::string& k = config.knowledge;
  if (k == "none" || k == "corpus") return nullptr;
  if (k == "lexicon") {
    return std::make_unique<LexiconKnowledgeProvider>(
        LexiconKnowledgeProvider::load(resource_dir() + "/knowledge_lexicon.tsv"));
  }
  if (k.rfind("lexicon:", 0) == 0) {
    return std::make_unique<LexiconKnowledgeProvider>(LexiconKnowledgeProvider::load(k.substr(8)));
  }
  if (k.rfind("file:", 0) == 0) {
    return std::make_unique<FileKnowledgeProvider>(FileKnowledgeProvider::load_cache(k.substr(5)));
  }
  throw ConfigError("unknown knowledge source '" + k + "'");
}

std::vector<Example> attach_knowledge(std::vector<Example> examples, const RunConfig& config,
                                      const KnowledgeProvider* provider) {
  if (!config.uses_knowledge()) {
    for (auto& ex : examples) ex.knowledge.reset();
    return examples;
  }
  if (config.knowledge == "corpus") {
    for (const auto& ex : examples) {
      if (!ex.knowledge) throw DataError("example '" + ex.id + "' has no knowledge text");
    }
    return examples;
  }
  if (!provider) throw ConfigError("knowledge '" + config.knowledge + "' needs a provider");
  for (auto& ex : examples) {
    KnowledgeRequest req{ex.headline, config.relations, config.top_k};
    ex.knowledge = render_template(provider->provide(req), config.relations);
  }
  return examples;
}

Vocab build_vocab(const std::vector<Example>& examples, const RunConfig& config) {
  std::vector<std::string> corpus;
  corpus.reserve(examples.size() * 2);
  for (const auto& ex : examples) {
    corpus.push_back(ex.headline);
    if (config.uses_knowledge() && ex.knowledge && !ex.knowledge->empty()) corpus.push_back(*ex.knowledge);
  }
  return train_vocab(corpus, config.vocab_size);
}

std::vector<const EncodedInput*> PreparedData::pointers() const {
  std::vector<const EncodedInput*> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(&in);
  return out;
}

bool PreparedData::has_annotators() const {
  return !annotator_emotions.empty() &&
         std::all_of(annotator_emotions.begin(), annotator_emotions.end(), [](const auto& a) { return !a.empty(); });
}

PreparedData prepare(const std::vector<Example>& examples, const Vocab& vocab, const RunConfig& config) {
  PreparedData d;
  d.inputs.reserve(examples.size());
  for (const auto& ex : examples) {
    d.ids.push_back(ex.id);
    d.headlines.push_back(ex.headline);
    if (config.uses_knowledge()) {
      if (!ex.knowledge) throw DataError("example '" + ex.id + "' has no knowledge text");
      d.inputs.push_back(encode_pair(ex.headline, *ex.knowledge, vocab, config.max_len_pair, ex.cause));
    } else {
      d.inputs.push_back(encode_single(ex.headline, vocab, config.max_len, ex.cause));
    }
    d.emotions.push_back(emotion_index(ex));
    const auto tags = word_tags_for_span(ex.headline, ex.cause, ex.id);
    d.gold_spans.push_back(decode_iob(tags));
    d.annotator_emotions.push_back(ex.annotator_emotions);
  }
  return d;
}

std::vector<Prediction> predict_all(const Model& model, const PreparedData& data) {
  const auto ptrs = data.pointers();
  std::vector<Prediction> out;
  out.reserve(ptrs.size());
  for (std::size_t start = 0; start < ptrs.size(); start += kEvalChunk) {
    const std::size_t len = std::min(kEvalChunk, ptrs.size() - start);
    auto chunk = model.predict(std::span<const EncodedInput* const>(ptrs).subspan(start, len));
    for (auto& p : chunk) out.push_back(std::move(p));
  }
  return out;
}

EvalInput eval_input(const Model& model, const std::vector<Prediction>& predictions, const PreparedData& data) {
  const Variant v = model.config().heads.variant;
  EvalInput in;
  in.gold_emotions = data.emotions;
  in.gold_spans = data.gold_spans;
  if (has_emotion_task(v)) {
    for (const auto& p : predictions) in.predicted_emotions.push_back(p.emotion);
  }
  if (has_cause_task(v)) {
    for (const auto& p : predictions) in.predicted_spans.push_back(p.cause_spans);
  }
  if (data.has_annotators()) in.annotator_emotions = data.annotator_emotions;
  return in;
}

EvalReport evaluate_model(const Model& model, const PreparedData& data) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty split");
  return evaluate(eval_input(model, predict_all(model, data), data));
}

double target_value(const EvalReport& report, TargetMetric target) {
  const auto& v = target == TargetMetric::emotion_macro_f1 ? report.emotion_macro_f1 : report.cause_span_f1;
  if (!v) throw ConfigError("report has no " + to_string(target));
  return *v;
}

}  // namespace emocause
