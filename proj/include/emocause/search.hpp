#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emocause/config.hpp"
#include "emocause/knowledge.hpp"
#include "emocause/pooling.hpp"

namespace emocause {

// Ranges for random search. lr is drawn log-uniformly, dropout and lambda
// uniformly, categorical fields uniformly.
struct SearchSpace {
  double lr_min = 1e-6;
  double lr_max = 1e-4;
  double dropout_min = 0.0;
  double dropout_max = 0.9;
  double lambda_min = 0.1;
  double lambda_max = 0.9;
  std::vector<PoolMode> poolers = {PoolMode::cls, PoolMode::mean, PoolMode::max, PoolMode::attention};
  // Sampled only when the base config uses knowledge.
  std::vector<Relations> relations = {Relations::x_react, Relations::o_react, Relations::both};

  // ConfigError for empty or inverted ranges.
  void validate() const;
};

// Keys: lr, dropout, lambda ([min, max] pairs), pooler, relations (string
// lists). Missing keys keep the defaults; unknown keys -> ConfigError.
SearchSpace search_space_from_json(const nlohmann::json& j);
SearchSpace load_search_space(const std::string& path);

// Copies `base` with lr, dropout, lambda, pooler and (with knowledge)
// relations drawn from the space.
RunConfig sample_config(const RunConfig& base, const SearchSpace& space, Rng& rng);

struct Trial {
  std::size_t iteration = 0;  // 1-based
  RunConfig config;
  double metric = 0.0;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // index into trials

  const Trial& best_trial() const { return trials.at(best); }
};

// Maps a sampled config to the value being maximized (normally the mean dev
// target over seeds).
using Objective = std::function<double(const RunConfig&)>;

// Draws `budget` configs up front from `seed`, evaluates them in order and
// keeps the first maximum. budget < 1 -> ConfigError.
SearchResult random_search(const RunConfig& base, const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                           const Objective& objective,
                           const std::function<void(const Trial&)>& on_trial = {});

std::string trials_csv_header();
std::string trials_csv_row(const Trial& trial);

}  // namespace emocause
