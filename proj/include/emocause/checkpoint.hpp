#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "emocause/config.hpp"
#include "emocause/model.hpp"
#include "emocause/text.hpp"

namespace emocause {

inline constexpr std::string_view kCheckpointFormat = "emocause-checkpoint-v1";

// A directory holding checkpoint.json (configs plus named, shaped parameter
// arrays) and vocab.txt.
struct Checkpoint {
  RunConfig run;
  ModelConfig model_config;
  ParamStore params;
  Vocab vocab;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;

  Model model() const { return Model(model_config, params.clone()); }
};

void save_checkpoint(const std::string& dir, const Model& model, const Vocab& vocab, const RunConfig& run,
                     std::uint64_t seed, std::size_t best_epoch);

// Missing directory/file -> NotFoundError; wrong format tag, missing arrays or
// shape mismatches -> DataError.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace emocause
