// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "support.hpp"
#include "surveysim/cli.hpp"
#include "surveysim/eval_harness.hpp"

using namespace surveysim;
using surveysim::testing::scratch_dir;
using surveysim::testing::slurp;
using surveysim::testing::spit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixture_config() { return (surveysim::testing::fixture_dir() / "survey" / "config.json").string(); }

int run(std::vector<std::string> args) { return cli::dispatch(args); }

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("command line errors exit with 2") {
  CHECK(run({}) == cli::kExitConfig);
  CHECK(run({"frobnicate"}) == cli::kExitConfig);
  CHECK(run({"train", "--bogus"}) == cli::kExitConfig);
  CHECK(run({"--help"}) == 0);
  CHECK(cli::usage().find("build-data") != std::string::npos);
}

TEST_CASE("bad configs exit with 2") {
  const auto dir = scratch_dir("cli-badconfig");
  CHECK(run({"build-data", "--config", (dir / "missing.json").string()}) == cli::kExitConfig);
  spit(dir / "broken.json", "{ not json");
  CHECK(run({"build-data", "--config", (dir / "broken.json").string()}) == cli::kExitConfig);
  spit(dir / "extra.json", R"({"data": {"kind": "synthetic"}, "surprise": 1})");
  CHECK(run({"build-data", "--config", (dir / "extra.json").string()}) == cli::kExitConfig);
  CHECK(run({"train", "--config", fixture_config(), "--out", (dir / "o").string(), "--set", "train.learning_rate=-1"}) ==
        cli::kExitConfig);
  CHECK(run({"train", "--config", fixture_config(), "--out", (dir / "o").string(), "--set", "backend.kind=gpt9"}) ==
        cli::kExitConfig);
  CHECK(run({"ablate", "--config", fixture_config(), "--out", (dir / "o").string(), "--losses", "KL,MSE"}) ==
        cli::kExitConfig);
  CHECK(run({"baseline", "--config", fixture_config(), "--out", (dir / "o").string(), "--predictor", "oracle"}) ==
        cli::kExitConfig);
  CHECK(run({"report", "--format", "markdown"}) == cli::kExitConfig);
}

TEST_CASE("runtime failures exit with 1") {
  const auto dir = scratch_dir("cli-runtime");
  CHECK(run({"eval", "--config", fixture_config(), "--out", dir.string(), "--adapter", (dir / "nope.json").string()}) ==
        cli::kExitRuntime);
  CHECK(fs::exists(dir / "run.log"));
  CHECK(run({"report", "--results", (dir / "absent.csv").string()}) == cli::kExitRuntime);
}

TEST_CASE("build-data on the fixture survey") {
  const auto dir = scratch_dir("cli-build");
  REQUIRE(run({"build-data", "--config", fixture_config(), "--out", dir.string()}) == 0);
  const auto dataset = slurp(dir / "dataset.jsonl");
  CHECK(line_count(dataset) == 77 + 18 + 35 + 18 + 8 + 27 + 12);
  const auto summary = json::parse(slurp(dir / "split_summary.json"));
  CHECK(summary.dump().find("77") != std::string::npos);
  CHECK(fs::exists(dir / "run_metadata.json"));
  CHECK(fs::exists(dir / "run.log"));
  // Same bytes on a rerun.
  const auto again = scratch_dir("cli-build-2");
  REQUIRE(run({"build-data", "--config", fixture_config(), "--out", again.string()}) == 0);
  CHECK(slurp(again / "dataset.jsonl") == dataset);
}

TEST_CASE("train then eval") {
  const auto dir = scratch_dir("cli-train");
  const std::vector<std::string> common{"--config", fixture_config(), "--out", dir.string(), "--set",
                                        "train.max_epochs=4"};
  auto args = common;
  args.insert(args.begin(), "train");
  REQUIRE(run(args) == 0);
  CHECK(fs::exists(dir / "adapter.json"));
  CHECK(fs::exists(dir / "adapter_meta.json"));
  const auto log = slurp(dir / "training_log.jsonl");
  CHECK(log.find("wall_clock") == std::string::npos);

  args = common;
  args.insert(args.begin(), "eval");
  REQUIRE(run(args) == 0);
  for (const char* f : {"predictions.jsonl", "results.csv", "report.md", "accuracy.svg", "run_metadata.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  const auto results = read_results_csv(slurp(dir / "results.csv"));
  std::set<std::string> rows;
  for (const auto& r : results) rows.insert(r.row_label());
  CHECK(rows == std::set<std::string>{"ZS [ctrl]", "ZS", "FT [ctrl]", "FT"});
  CHECK(results.size() == 4 * 6);
  for (const auto& r : results) CHECK(r.status == "ok");
  const auto report = slurp(dir / "report.md");
  CHECK(report.find("| FT [ctrl] |") != std::string::npos);

  // Idempotent: eval again into the same directory gives the same bytes.
  const auto preds = slurp(dir / "predictions.jsonl");
  const auto csv = slurp(dir / "results.csv");
  REQUIRE(run(args) == 0);
  CHECK(slurp(dir / "predictions.jsonl") == preds);
  CHECK(slurp(dir / "results.csv") == csv);

  SUBCASE("report re-emits from results.csv") {
    const auto out = scratch_dir("cli-report");
    REQUIRE(run({"report", "--results", (dir / "results.csv").string(), "--format", "markdown", "--out",
                 out.string()}) == 0);
    CHECK(slurp(out / "report.md").find("| FT |") != std::string::npos);
    CHECK(run({"report", "--results", (dir / "results.csv").string(), "--format", "docx", "--out", out.string()}) ==
          cli::kExitConfig);
  }
}

TEST_CASE("eval without an adapter marks FT unavailable") {
  const auto dir = scratch_dir("cli-noadapter");
  REQUIRE(run({"eval", "--config", fixture_config(), "--out", dir.string()}) == 0);
  const auto results = read_results_csv(slurp(dir / "results.csv"));
  for (const auto& r : results) {
    if (r.predictor_id == "FT") CHECK(r.status == "unavailable");
    if (r.predictor_id == "ZS") CHECK(r.status == "ok");
  }
}

TEST_CASE("baselines") {
  const auto dir = scratch_dir("cli-baseline");
  REQUIRE(run({"baseline", "--config", fixture_config(), "--out", dir.string(), "--predictor",
               "knn,avg_culture,uniform,zs"}) == 0);
  const auto results = read_results_csv(slurp(dir / "results.csv"));
  std::set<std::string> ids;
  for (const auto& r : results) ids.insert(r.predictor_id);
  CHECK(ids == std::set<std::string>{"KNN", "Avg_Culture", "uniform", "ZS"});
  CHECK(results.size() == 4 * 6);
}

TEST_CASE("loss ablation") {
  const auto dir = scratch_dir("cli-ablate");
  REQUIRE(run({"ablate", "--config", fixture_config(), "--out", dir.string(), "--losses", "KL,JS,WA,CE", "--set",
               "train.max_epochs=3"}) == 0);
  for (const char* l : {"KL", "JS", "WA", "CE"}) {
    CHECK_MESSAGE(fs::exists(dir / ("training_log_" + std::string(l) + ".jsonl")), l);
  }
  const auto results = read_results_csv(slurp(dir / "results.csv"));
  std::vector<std::string> rows;
  for (const auto& r : results) {
    if (std::find(rows.begin(), rows.end(), r.row_label()) == rows.end()) rows.push_back(r.row_label());
  }
  CHECK(rows == std::vector<std::string>{"FT-KL", "FT-JS", "FT-WA", "FT-CE", "FT-KL [shuffled]"});
  CHECK(results.size() == 5 * 6);
}

TEST_CASE("synthetic data kind and seed override") {
  const auto dir = scratch_dir("cli-synth");
  spit(dir / "config.json", R"({
    "data": {"kind": "synthetic", "synthetic": {"countries": 5, "questions": 8, "respondents": 300, "seed": 3}},
    "splits": {"C2": ["Estrava"], "C3": ["Dunmoor"], "Q2": [7], "Q3": [8]},
    "backend": {"kind": "toy_embedding"},
    "train": {"learning_rate": 0.01, "max_epochs": 2, "batch_size": 4},
    "out_dir": "out"
  })");
  REQUIRE(run({"train", "--config", (dir / "config.json").string(), "--seed", "5"}) == 0);
  CHECK(fs::exists(dir / "out" / "adapter.json"));
  const auto meta = json::parse(slurp(dir / "out" / "run_metadata.json"));
  CHECK(meta.at("config").at("train").at("seed") == 5);
  REQUIRE(run({"eval", "--config", (dir / "config.json").string(), "--seed", "5"}) == 0);
  CHECK(fs::exists(dir / "out" / "diversity.json"));
}
