#include "emocause/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "emocause/error.hpp"

namespace emocause {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void save_checkpoint(const std::string& dir, const Model& model, const Vocab& vocab, const RunConfig& run,
                     std::uint64_t seed, std::size_t best_epoch) {
  fs::create_directories(dir);
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = seed;
  j["best_epoch"] = best_epoch;
  j["run_config"] = to_json(run);
  j["model_config"] = to_json(model.config());
  ordered_json arrays = ordered_json::array();
  for (const auto& e : model.params().entries()) {
    const auto values = e.tensor.data();
    arrays.push_back(ordered_json{{"name", e.name},
                                  {"shape", e.tensor.shape()},
                                  {"values", std::vector<double>(values.begin(), values.end())}});
  }
  j["params"] = std::move(arrays);

  const fs::path path = fs::path(dir) / "checkpoint.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump() << '\n';
  vocab.save((fs::path(dir) / "vocab.txt").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path path = fs::path(dir) / "checkpoint.json";
  std::ifstream in(path);
  if (!in) throw NotFoundError("no checkpoint at '" + dir + "' (missing checkpoint.json)");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) {
    throw DataError("'" + path.string() + "' is not a " + std::string(kCheckpointFormat) + " checkpoint");
  }

  Checkpoint c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.best_epoch = j.at("best_epoch").get<std::size_t>();
    c.run = config_from_json(j.at("run_config"));
    c.model_config = model_config_from_json(j.at("model_config"));
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  c.vocab = Vocab::load((fs::path(dir) / "vocab.txt").string());
  if (c.vocab.size() != c.model_config.encoder.vocab_size) {
    throw DataError("vocab.txt has " + std::to_string(c.vocab.size()) + " entries, model expects " +
                    std::to_string(c.model_config.encoder.vocab_size));
  }

  // Build a freshly shaped model, then overwrite every array by name.
  Model shaped(c.model_config, 0);
  ParamStore loaded;
  std::map<std::string, const json*> by_name;
  for (const auto& a : j.at("params")) by_name[a.at("name").get<std::string>()] = &a;
  for (const auto& e : shaped.params().entries()) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) throw DataError("checkpoint is missing parameter '" + e.name + "'");
    const json& a = *it->second;
    Shape shape;
    std::vector<double> values;
    try {
      shape = a.at("shape").get<Shape>();
      values = a.at("values").get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw DataError("parameter '" + e.name + "': " + ex.what());
    }
    if (shape != e.tensor.shape() || values.size() != e.tensor.size()) {
      throw DataError("parameter '" + e.name + "' has the wrong shape");
    }
    loaded.add(e.name, Tensor::from_data(shape, std::move(values)));
    by_name.erase(it);
  }
  if (!by_name.empty()) throw DataError("checkpoint has unexpected parameter '" + by_name.begin()->first + "'");
  c.params = std::move(loaded);
  return c;
}

}  // namespace emocause
