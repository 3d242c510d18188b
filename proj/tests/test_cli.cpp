#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <algorithm>
#include <string>

#include <json.hpp>

#include "cli_runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using testing::run_cli;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "emocause-test-cli";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const std::string kSmall = " --d-model 16 --layers 1 --epochs 2 --seed 1 --vocab-size 300 --quiet";

struct Fixture {
  fs::path data = kRoot / "syn.jsonl";
  fs::path cache = kRoot / "cache.jsonl";

  Fixture() {
    static bool ready = false;
    if (ready) return;
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    const auto r = run_cli("generate --n 140 --seed 2 --out " + data.string() + " --knowledge-cache " + cache.string());
    REQUIRE(r.code == 0);
    ready = true;
  }
};

}  // namespace

TEST_CASE("generate writes a corpus") {
  Fixture f;
  std::ifstream in(f.data);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 140);
}

TEST_CASE("train, eval, predict") {
  Fixture f;
  const fs::path out = kRoot / "c2e";
  const auto r = run_cli("train --data " + f.data.string() + " --variant multi_c2e --knowledge file:" +
                         f.cache.string() + " --out " + out.string() + kSmall);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  for (const char* name : {"config.json", "manifest.json", "history.csv", "report.json", "seed-1/checkpoint.json",
                           "seed-1/vocab.txt"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("best_seed") == 1);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("config").at("variant") == "multi_c2e");

  // Same arguments, same bytes.
  const fs::path out2 = kRoot / "c2e-again";
  REQUIRE(run_cli("train --data " + f.data.string() + " --variant multi_c2e --knowledge file:" + f.cache.string() +
                  " --out " + out2.string() + kSmall)
              .code == 0);
  CHECK(slurp(out / "report.json") == slurp(out2 / "report.json"));
  CHECK(slurp(out / "history.csv") == slurp(out2 / "history.csv"));

  // Evaluating the saved checkpoint on dev reproduces the recorded score.
  const auto ev = run_cli("eval --checkpoint " + out.string() + " --data " + f.data.string() + " --split dev");
  REQUIRE_MESSAGE(ev.code == 0, ev.output);
  const json dev = json::parse(ev.output.substr(ev.output.find('{')));
  CHECK(dev.at("emotion_macro_f1") == report.at("runs").at(0).at("dev").at("emotion_macro_f1"));
  CHECK(dev.at("cause_span_f1") == report.at("runs").at(0).at("dev").at("cause_span_f1"));

  const auto csv = run_cli("eval --checkpoint " + out.string() + " --data " + f.data.string() + " --csv");
  REQUIRE(csv.code == 0);
  std::istringstream lines(csv.output);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));

  const fs::path evdir = kRoot / "eval";
  REQUIRE(run_cli("eval --checkpoint " + out.string() + " --data " + f.data.string() + " --out " + evdir.string())
              .code == 0);
  CHECK(fs::exists(evdir / "per_emotion.csv"));
  CHECK(fs::exists(evdir / "manifest.json"));

  // A headline from the corpus is in the knowledge cache.
  std::ifstream in(f.data);
  std::string first;
  std::getline(in, first);
  const std::string headline = json::parse(first).at("headline");
  const auto pj = run_cli("predict --checkpoint " + out.string() + " --json --headline \"" + headline + "\"");
  REQUIRE_MESSAGE(pj.code == 0, pj.output);
  const json pred = json::parse(pj.output);
  CHECK(pred.at("probabilities").size() == 7);
  CHECK(pred.at("cause_spans").is_array());
  for (const auto& s : pred.at("cause_spans")) {
    const std::string text = s.at("text");
    for (char ch : text) CHECK_FALSE((ch >= 'A' && ch <= 'Z'));
  }
  const auto pt = run_cli("predict --checkpoint " + out.string() + " --headline \"" + headline + "\"");
  CHECK(pt.code == 0);
  CHECK(pt.output.find("emotion: ") != std::string::npos);
  CHECK(pt.output.find("cause: ") != std::string::npos);

  CHECK(run_cli("predict --checkpoint " + out.string() + " --headline \"\"").code == 2);
}

TEST_CASE("usage and input errors exit with 2") {
  Fixture f;
  const auto missing = run_cli("train --data /definitely/not/here.jsonl --quiet");
  CHECK(missing.code == 2);
  CHECK(missing.output.find("/definitely/not/here.jsonl") != std::string::npos);
  CHECK(run_cli("train").code == 2);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("train --data " + f.data.string() + " --variant nonsense").code == 2);
  CHECK(run_cli("bogus-command").code == 2);
  CHECK(run_cli("eval --checkpoint " + (kRoot / "nothing").string() + " --data " + f.data.string()).code == 2);
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("config file values yield to flags") {
  Fixture f;
  const fs::path cfg = kRoot / "cfg.json";
  std::ofstream(cfg) << R"({"variant": "single_cause", "lr": 0.002, "max_epochs": 1, "d_model": 16,
                            "n_layers": 1, "vocab_size": 300, "seeds": [3]})";
  const fs::path out = kRoot / "cfg-run";
  REQUIRE(run_cli("train --config " + cfg.string() + " --data " + f.data.string() + " --lr 0.004 --quiet --out " +
                  out.string())
              .code == 0);
  const json c = json::parse(slurp(out / "config.json"));
  CHECK(c.at("variant") == "single_cause");
  CHECK(c.at("lr") == 0.004);
  CHECK(c.at("seeds") == json::array({3}));
  CHECK(c.at("target") == "cause_span_f1");

  std::ofstream(kRoot / "bad.json") << R"({"learning_rate": 1})";
  CHECK(run_cli("train --config " + (kRoot / "bad.json").string() + " --data " + f.data.string()).code == 2);
}

TEST_CASE("experiment root from the environment") {
  Fixture f;
  const fs::path root = kRoot / "env-root";
  const auto r = run_cli("train --data " + f.data.string() + " --variant single_emotion" + kSmall,
                         "EMOCAUSE_EXPERIMENT_ROOT=" + root.string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(root / "train-single_emotion" / "report.json"));
}

TEST_CASE("search and analyze") {
  Fixture f;
  const fs::path out = kRoot / "search";
  const auto r = run_cli("search --data " + f.data.string() + " --variant multi --target cause --budget 2 --out " +
                         out.string() + kSmall);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::ifstream trials(out / "trials.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(trials, line);) ++rows;
  CHECK(rows == 3);  // header plus two trials
  CHECK(json::parse(slurp(out / "best_config.json")).at("target") == "cause_span_f1");

  const fs::path a = kRoot / "an-a", b = kRoot / "an-b";
  REQUIRE(run_cli("train --data " + f.data.string() + " --variant single_emotion --out " + a.string() + kSmall).code ==
          0);
  REQUIRE(run_cli("train --data " + f.data.string() + " --variant multi --out " + b.string() + kSmall).code == 0);
  const fs::path an = kRoot / "analysis";
  const auto res = run_cli("analyze --reports " + a.string() + " " + b.string() + " --out " + an.string());
  REQUIRE_MESSAGE(res.code == 0, res.output);
  std::ifstream table(an / "gold_comparison.csv");
  std::string header;
  std::getline(table, header);
  CHECK(header == "model,gold_accuracy,not_gold_accuracy");
  std::size_t n = 0;
  for (std::string line; std::getline(table, line);) ++n;
  CHECK(n == 2);
  CHECK(fs::exists(an / "per_emotion_an-a.csv"));
  const auto missing = run_cli("analyze --reports " + (kRoot / "no-such-dir").string());
  CHECK(missing.code == 2);
  CHECK(missing.output.find("no-such-dir") != std::string::npos);
}
