#include "emocause/search.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "emocause/error.hpp"

namespace emocause {

using nlohmann::json;

void SearchSpace::validate() const {
  auto range = [](double lo, double hi, const char* name) {
    if (!(lo <= hi)) throw ConfigError(std::string("search range for ") + name + " is inverted");
  };
  range(lr_min, lr_max, "lr");
  range(dropout_min, dropout_max, "dropout");
  range(lambda_min, lambda_max, "lambda");
  if (!(lr_min > 0.0)) throw ConfigError("lr range must be positive");
  if (dropout_min < 0.0 || dropout_max >= 1.0) throw ConfigError("dropout range must lie in [0, 1)");
  if (lambda_min < 0.0 || lambda_max > 1.0) throw ConfigError("lambda range must lie in [0, 1]");
  if (poolers.empty()) throw ConfigError("search space needs at least one pooler");
  if (relations.empty()) throw ConfigError("search space needs at least one relation setting");
}

SearchSpace search_space_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("search space must be a JSON object");
  static const std::set<std::string> kKeys = {"lr", "dropout", "lambda", "pooler", "relations"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown search space key '" + key + "'");
  }
  SearchSpace s;
  try {
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (!j.contains(key)) return;
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError(std::string("search range '") + key + "' needs [min, max]");
      lo = v[0];
      hi = v[1];
    };
    pair("lr", s.lr_min, s.lr_max);
    pair("dropout", s.dropout_min, s.dropout_max);
    pair("lambda", s.lambda_min, s.lambda_max);
    if (j.contains("pooler")) {
      s.poolers.clear();
      for (const auto& p : j.at("pooler")) s.poolers.push_back(parse_pool_mode(p.get<std::string>()));
    }
    if (j.contains("relations")) {
      s.relations.clear();
      for (const auto& r : j.at("relations")) s.relations.push_back(parse_relations(r.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("search space has the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

SearchSpace load_search_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open search space '" + path + "'");
  try {
    return search_space_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("search space '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig sample_config(const RunConfig& base, const SearchSpace& space, Rng& rng) {
  RunConfig c = base;
  c.lr = std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
  // Guard against rounding just past the bounds in exp(log(.)).
  c.lr = std::min(std::max(c.lr, space.lr_min), space.lr_max);
  c.dropout = rng.uniform(space.dropout_min, space.dropout_max);
  c.lambda = rng.uniform(space.lambda_min, space.lambda_max);
  c.pooler = space.poolers[rng.below(space.poolers.size())];
  if (base.uses_knowledge()) c.relations = space.relations[rng.below(space.relations.size())];
  return c;
}

SearchResult random_search(const RunConfig& base, const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                           const Objective& objective, const std::function<void(const Trial&)>& on_trial) {
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  space.validate();
  Rng rng(seed);
  SearchResult r;
  for (std::size_t i = 0; i < budget; ++i) r.trials.push_back(Trial{i + 1, sample_config(base, space, rng), 0.0});
  for (std::size_t i = 0; i < budget; ++i) {
    r.trials[i].metric = objective(r.trials[i].config);
    if (r.trials[i].metric > r.trials[r.best].metric) r.best = i;
    if (on_trial) on_trial(r.trials[i]);
  }
  return r;
}

std::string trials_csv_header() { return "iteration,lr,dropout,lambda,pooler,relations,dev_metric"; }

std::string trials_csv_row(const Trial& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.6e,%.6f,%.6f,%s,%s,%.6f", t.iteration, t.config.lr, t.config.dropout,
                t.config.lambda, to_string(t.config.pooler).c_str(),
                t.config.uses_knowledge() ? to_string(t.config.relations).c_str() : "none", t.metric);
  return buf;
}

}  // namespace emocause
