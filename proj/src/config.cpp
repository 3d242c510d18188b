#include "emocause/config.hpp"

#include <fstream>
#include <set>

#include "emocause/error.hpp"

namespace emocause {

using nlohmann::json;
using nlohmann::ordered_json;

TargetMetric parse_target(std::string_view name) {
  if (name == "emotion" || name == "emotion_macro_f1") return TargetMetric::emotion_macro_f1;
  if (name == "cause" || name == "cause_span_f1") return TargetMetric::cause_span_f1;
  throw ConfigError("unknown target '" + std::string(name) + "' (expected emotion or cause)");
}

std::string to_string(TargetMetric target) {
  return target == TargetMetric::emotion_macro_f1 ? "emotion_macro_f1" : "cause_span_f1";
}

TargetMetric RunConfig::target_metric() const {
  if (!target.empty()) return parse_target(target);
  return has_emotion_task(variant) ? TargetMetric::emotion_macro_f1 : TargetMetric::cause_span_f1;
}

ModelConfig RunConfig::model_config(std::size_t vocab_entries) const {
  ModelConfig m;
  m.encoder.d_model = d_model;
  m.encoder.n_layers = n_layers;
  m.encoder.n_heads = n_heads;
  m.encoder.d_ff = d_ff;
  m.encoder.max_positions = std::max(max_len, uses_knowledge() ? max_len_pair : max_len);
  m.encoder.vocab_size = vocab_entries;
  m.encoder.dropout_p = dropout;
  m.encoder.activation = activation;
  m.heads.variant = variant;
  m.heads.pooler = pooler;
  m.heads.lambda = lambda;
  m.heads.emotion_embedding_dim = emotion_embedding_dim;
  m.heads.dropout_p = dropout;
  m.heads.hard_c2e_inference = hard_c2e_inference;
  m.init_scale = init_scale;
  return m;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (batch_size == 0) fail("batch_size must be at least 1");
  if (max_epochs == 0) fail("max_epochs must be at least 1");
  if (seeds.empty()) fail("at least one seed is required");
  if (top_k == 0) fail("top_k must be at least 1");
  if (max_len < 3) fail("max_len must be at least 3");
  if (uses_knowledge() && max_len_pair < 4) fail("max_len_pair must be at least 4");
  if (vocab_size < 8) fail("vocab_size must be at least 8");
  if (!(init_scale > 0.0)) fail("init_scale must be positive");
  if (clip_norm < 0.0) fail("clip_norm must be nonnegative");
  if (knowledge != "none" && knowledge != "lexicon" && knowledge != "corpus" && knowledge.rfind("lexicon:", 0) != 0 &&
      knowledge.rfind("file:", 0) != 0) {
    fail("knowledge must be none, lexicon, lexicon:PATH, file:PATH or corpus, got '" + knowledge + "'");
  }
  const TargetMetric t = target_metric();
  if (t == TargetMetric::emotion_macro_f1 && !has_emotion_task(variant)) fail("single_cause has no emotion target");
  if (t == TargetMetric::cause_span_f1 && !has_cause_task(variant)) fail("single_emotion has no cause target");
  model_config(8).encoder.validate();
  model_config(8).heads.validate();
}

ordered_json to_json(const RunConfig& c) {
  return {
      {"variant", to_string(c.variant)},
      {"pooler", to_string(c.pooler)},
      {"lambda", c.lambda},
      {"dropout", c.dropout},
      {"d_model", c.d_model},
      {"n_layers", c.n_layers},
      {"n_heads", c.n_heads},
      {"d_ff", c.d_ff},
      {"emotion_embedding_dim", c.emotion_embedding_dim},
      {"activation", to_string(c.activation)},
      {"init_scale", c.init_scale},
      {"hard_c2e_inference", c.hard_c2e_inference},
      {"vocab_size", c.vocab_size},
      {"max_len", c.max_len},
      {"max_len_pair", c.max_len_pair},
      {"knowledge", c.knowledge},
      {"relations", to_string(c.relations)},
      {"top_k", c.top_k},
      {"split_seed", c.split_seed},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"seeds", c.seeds},
      {"target", to_string(c.target_metric())},
      {"clip_norm", c.clip_norm},
  };
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "variant",    "pooler",     "lambda",    "dropout",  "d_model",      "n_layers",      "n_heads",
      "d_ff",       "emotion_embedding_dim",   "activation", "init_scale", "hard_c2e_inference", "vocab_size",
      "max_len",    "max_len_pair", "knowledge", "relations", "top_k",       "split_seed",    "lr",
      "batch_size", "max_epochs", "patience",  "seeds",    "target",       "clip_norm"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("pooler")) c.pooler = parse_pool_mode(j.at("pooler").get<std::string>());
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("relations")) c.relations = parse_relations(j.at("relations").get<std::string>());
    get("lambda", c.lambda);
    get("dropout", c.dropout);
    get("d_model", c.d_model);
    get("n_layers", c.n_layers);
    get("n_heads", c.n_heads);
    get("d_ff", c.d_ff);
    get("emotion_embedding_dim", c.emotion_embedding_dim);
    get("init_scale", c.init_scale);
    get("hard_c2e_inference", c.hard_c2e_inference);
    get("vocab_size", c.vocab_size);
    get("max_len", c.max_len);
    get("max_len_pair", c.max_len_pair);
    get("knowledge", c.knowledge);
    get("top_k", c.top_k);
    get("split_seed", c.split_seed);
    get("lr", c.lr);
    get("batch_size", c.batch_size);
    get("max_epochs", c.max_epochs);
    get("patience", c.patience);
    get("seeds", c.seeds);
    get("target", c.target);
    get("clip_norm", c.clip_norm);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ordered_json to_json(const ModelConfig& m) {
  return {
      {"d_model", m.encoder.d_model},
      {"n_layers", m.encoder.n_layers},
      {"n_heads", m.encoder.n_heads},
      {"d_ff", m.encoder.d_ff},
      {"max_positions", m.encoder.max_positions},
      {"vocab_size", m.encoder.vocab_size},
      {"dropout_p", m.encoder.dropout_p},
      {"activation", to_string(m.encoder.activation)},
      {"layer_norm_eps", m.encoder.layer_norm_eps},
      {"variant", to_string(m.heads.variant)},
      {"pooler", to_string(m.heads.pooler)},
      {"lambda", m.heads.lambda},
      {"emotion_embedding_dim", m.heads.emotion_embedding_dim},
      {"head_dropout_p", m.heads.dropout_p},
      {"hard_c2e_inference", m.heads.hard_c2e_inference},
      {"init_scale", m.init_scale},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  try {
    m.encoder.d_model = j.at("d_model").get<std::size_t>();
    m.encoder.n_layers = j.at("n_layers").get<std::size_t>();
    m.encoder.n_heads = j.at("n_heads").get<std::size_t>();
    m.encoder.d_ff = j.at("d_ff").get<std::size_t>();
    m.encoder.max_positions = j.at("max_positions").get<std::size_t>();
    m.encoder.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.encoder.dropout_p = j.at("dropout_p").get<double>();
    m.encoder.activation = parse_activation(j.at("activation").get<std::string>());
    m.encoder.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    m.heads.variant = parse_variant(j.at("variant").get<std::string>());
    m.heads.pooler = parse_pool_mode(j.at("pooler").get<std::string>());
    m.heads.lambda = j.at("lambda").get<double>();
    m.heads.emotion_embedding_dim = j.at("emotion_embedding_dim").get<std::size_t>();
    m.heads.dropout_p = j.at("head_dropout_p").get<double>();
    m.heads.hard_c2e_inference = j.at("hard_c2e_inference").get<bool>();
    m.init_scale = j.at("init_scale").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model config is incomplete: ") + e.what());
  }
  m.encoder.validate();
  m.heads.validate();
  return m;
}

}  // namespace emocause
