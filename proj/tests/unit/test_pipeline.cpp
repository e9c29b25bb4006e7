#include <sstream>

#include "doctest.h"
#include "kgtopo/csv.hpp"
#include "kgtopo/pipeline.hpp"
#include "json.hpp"
#include "support/tempdir.hpp"

using namespace kgtopo;

namespace {

ExperimentConfig fixture_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.data = {std::filesystem::path(KGTOPO_FIXTURES) / "tiny.tsv"};
  c.entity_types = std::filesystem::path(KGTOPO_FIXTURES) / "tiny_types.tsv";
  c.ratios = {0.8, 0.1, 0.1};
  c.model.scorer = Scorer::kTransE;
  c.model.dim = 8;
  c.train.epochs = 3;
  c.train.batch_size = 8;
  c.train.negatives = 4;
  c.train.learning_rate = 0.01;
  c.top_k = 5;
  c.demixing_top_k = 3;
  c.out = out;
  c.seed = 7;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("config validation names the problem") {
  testutil::TempDir dir;
  auto c = fixture_config(dir.path());
  CHECK_NOTHROW(validate(c));
  auto bad = c;
  bad.data.clear();
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.ratios = {0.8, 0.1, 0.2};
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.split_mode = "provided";
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.topology_scope = "neither";
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.model.dim = 0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.stratify_keys = {"colour"};
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = c;
  bad.data = {dir / "missing.tsv"};
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  CHECK(parse_stage("case-study") == Stage::kCaseStudy);
  CHECK_THROWS_AS(parse_stage("plot"), InvalidArgument);
}

TEST_CASE("config hash ignores the output directory") {
  auto a = fixture_config("x");
  auto b = fixture_config("y");
  CHECK(config_json(a) == config_json(b));
  b.seed = 8;
  CHECK(config_json(a) != config_json(b));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("the full pipeline writes every artifact") {
  testutil::TempDir dir;
  const auto c = fixture_config(dir.path());
  std::ostringstream log;
  REQUIRE(run_stage(Stage::kAll, c, log) == 0);
  for (const char* f : {"stats.json", "topology.csv", "topology_summary.json", "split.csv", "counterpart.csv",
                        "train_log.jsonl", "model.bin", "ranks.csv", "summary.json", "degree_bias.csv",
                        "demixing.csv", "manifest_all.json", "plots/index.json", "plots/fig5_cardinality.csv",
                        "plots/fig6_degrees.csv", "plots/fig7_composition.csv", "plots/figC7_counterpart.csv",
                        "plots/figC2_relation_level.csv", "plots/figC3_triple_level.csv",
                        "plots/figC8_interaction.csv"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto manifest = nlohmann::json::parse(testutil::slurp(dir / "manifest_all.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["inputs"].size() == 2);
  CsvTable ranks(dir / "ranks.csv");
  CHECK(ranks.rows() == 3);  // round(30 * 0.1) test triples
  const auto stats = nlohmann::json::parse(testutil::slurp(dir / "stats.json"));
  CHECK(stats["num_triples"] == 30);
}

TEST_CASE("a failing stage is recorded in the manifest") {
  testutil::TempDir dir;
  auto c = fixture_config(dir.path());
  c.data = {dir.write("broken.tsv", "a\tr\tb\nonly_two\tcolumns\n")};
  std::ostringstream log;
  CHECK_THROWS(run_stage(Stage::kStats, c, log));
  const auto manifest = nlohmann::json::parse(testutil::slurp(dir / "manifest_stats.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["error"].get<std::string>().find("broken.tsv") != std::string::npos);
}
