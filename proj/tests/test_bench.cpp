#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "driftbench/bench.hpp"
#include "support/scratch.hpp"

using namespace driftbench;
using testsupport::ScratchDir;

namespace {

// Small, fast setup: two streaming baselines on a shrunken links-style
// sequence. Structure checks do not need detection accuracy.
BenchConfig small_links_config() {
  BenchConfig cfg;
  cfg.methods = {"adwin", "ddm"};
  cfg.source = SequenceSource::links;
  cfg.links.class_count = 5;
  cfg.links.rows_per_class = 18;
  cfg.repetitions = 3;
  cfg.seed = 7;
  cfg.forest_trees = 25;
  cfg.forest_depth = 8;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  REQUIRE(file.good());
  std::stringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("bench config survives a JSON round trip") {
  BenchConfig cfg;
  cfg.methods = {"cfpt", "adwin"};
  cfg.source = SequenceSource::manifest;
  cfg.manifest_path = "data/manifest.json";
  cfg.repetitions = 5;
  cfg.seed = 99;
  cfg.out_dir = "results";
  cfg.reward.t_s = 0.2;
  cfg.detector.train_epochs = 4;
  cfg.detector.retrain_epochs = 4;
  cfg.detector.confidence_keep_fraction = 0.7;
  cfg.calibration_resamples = 6;
  cfg.forest_trees = 50;
  cfg.forest_depth = 12;
  cfg.fingerprinting.rows_per_class = 200;
  cfg.links.class_count = 6;
  cfg.tabautodrift.hidden_width = 32;
  cfg.baselines.adwin.confidence = 0.01;
  cfg.baselines.stepd.alpha_drift = 0.01;

  const auto round_tripped = bench_config_from_json(bench_config_to_json(cfg));
  REQUIRE(bench_config_to_json(round_tripped).dump() == bench_config_to_json(cfg).dump());

  // Defaults survive an empty document and partial overrides fill in the rest.
  const auto defaults = bench_config_from_json(nlohmann::json::object());
  REQUIRE(defaults.methods == benchmark_methods());
  REQUIRE(defaults.repetitions == 10);

  const auto partial = bench_config_from_json(nlohmann::json::parse(R"({"seed": 5})"));
  REQUIRE(partial.seed == 5);
  REQUIRE(partial.forest_trees == 100);
}

TEST_CASE("bench config rejects malformed documents and setups") {
  REQUIRE_THROWS_WITH(bench_config_from_json(nlohmann::json::parse(R"({"versionn": 1})")),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  REQUIRE_THROWS_WITH(bench_config_from_json(nlohmann::json::parse(R"({"version": 2})")),
                      Catch::Matchers::ContainsSubstring("unsupported version"));
  REQUIRE_THROWS_WITH(bench_config_from_json(nlohmann::json::parse(R"({"seed": "abc"})")),
                      Catch::Matchers::ContainsSubstring("bad value"));
  REQUIRE_THROWS_WITH(
      bench_config_from_json(nlohmann::json::parse(R"({"detector": {"epochs": 3}})")),
      Catch::Matchers::ContainsSubstring("detector.epochs"));

  BenchConfig cfg = small_links_config();
  cfg.repetitions = 2;
  REQUIRE_THROWS_WITH(validate_bench_config(cfg),
                      Catch::Matchers::ContainsSubstring("repetitions"));

  cfg = small_links_config();
  cfg.methods = {"adwin", "gradient_parade"};
  REQUIRE_THROWS_WITH(validate_bench_config(cfg),
                      Catch::Matchers::ContainsSubstring("unknown method"));

  cfg = small_links_config();
  cfg.methods = {"adwin", "adwin"};
  REQUIRE_THROWS_WITH(validate_bench_config(cfg),
                      Catch::Matchers::ContainsSubstring("twice"));

  cfg = small_links_config();
  cfg.methods.clear();
  REQUIRE_THROWS_WITH(validate_bench_config(cfg),
                      Catch::Matchers::ContainsSubstring("no methods"));

  cfg = small_links_config();
  cfg.source = SequenceSource::manifest;
  cfg.manifest_path.clear();
  REQUIRE_THROWS_WITH(validate_bench_config(cfg),
                      Catch::Matchers::ContainsSubstring("manifest"));
}

TEST_CASE("benchmark report has one record per method and repetition") {
  const BenchConfig cfg = small_links_config();
  const BenchReport report = run_benchmark(cfg);

  REQUIRE(report.ground_truth == std::vector<char>{0, 0, 0, 1, 1, 1, 1, 1});
  REQUIRE(report.records.size() == 6);
  for (const auto& record : report.records) {
    REQUIRE(record.verdicts.size() == 8);
    REQUIRE(record.utilities.size() == 8);
    REQUIRE(record.thresholds.size() == 8);
  }

  REQUIRE(report.summaries.size() == 2);
  for (const auto& summary : report.summaries) {
    REQUIRE(summary.rep_rewards.size() == 3);
    // Majority verdicts classify every batch exactly once.
    REQUIRE(summary.confusion.total() == 8.0);
    REQUIRE(summary.mean_seconds >= 0.0);
  }
  REQUIRE(report.summaries[0].method == "adwin");
  REQUIRE(report.summaries[1].method == "ddm");
}

TEST_CASE("benchmark is deterministic and excludes timings from records") {
  ScratchDir dir;
  const BenchConfig cfg = small_links_config();

  const auto first = emit_report(run_benchmark(cfg), (dir.path / "a").string());
  const auto second = emit_report(run_benchmark(cfg), (dir.path / "b").string());
  REQUIRE(first.size() == 3);

  const auto records_a = slurp((dir.path / "a" / "records.jsonl").string());
  REQUIRE(records_a == slurp((dir.path / "b" / "records.jsonl").string()));
  REQUIRE(records_a.find("seconds") == std::string::npos);
  REQUIRE(slurp((dir.path / "a" / "rewards.tsv").string()) ==
          slurp((dir.path / "b" / "rewards.tsv").string()));

  // Summaries include wall time, so only their layout is compared.
  const auto summary = slurp((dir.path / "a" / "summary.tsv").string());
  REQUIRE(summary.find("method\ttrimmed_reward") == 0);
  REQUIRE(summary.find("adwin") != std::string::npos);
  REQUIRE(summary.find("ddm") != std::string::npos);
}

TEST_CASE("read_records rebuilds summaries from the report file") {
  ScratchDir dir;
  const BenchConfig cfg = small_links_config();
  const BenchReport report = run_benchmark(cfg);
  emit_report(report, dir.path.string());

  const BenchReport reread = read_records((dir.path / "records.jsonl").string());
  REQUIRE(reread.ground_truth == report.ground_truth);
  REQUIRE(reread.records.size() == report.records.size());
  REQUIRE(reread.summaries.size() == report.summaries.size());
  for (std::size_t i = 0; i < report.summaries.size(); ++i) {
    REQUIRE(reread.summaries[i].method == report.summaries[i].method);
    REQUIRE(reread.summaries[i].trimmed_reward == report.summaries[i].trimmed_reward);
    REQUIRE(reread.summaries[i].confusion.tp == report.summaries[i].confusion.tp);
    REQUIRE(reread.summaries[i].confusion.fp == report.summaries[i].confusion.fp);
  }

  REQUIRE_THROWS_WITH(read_records((dir.path / "missing.jsonl").string()),
                      Catch::Matchers::ContainsSubstring("cannot open"));
  const auto headerless = dir.file("headerless.jsonl", "");
  REQUIRE_THROWS_WITH(read_records(headerless),
                      Catch::Matchers::ContainsSubstring("missing header"));
}

TEST_CASE("manifest-source benchmark stays quiet on a stationary sequence") {
  ScratchDir dir;

  // One large stationary draw, sliced into four incoming batches so every
  // batch shares the reference distribution exactly.
  SyntheticDriftScenario scenario;
  scenario.class_count = 3;
  scenario.feature_count = 6;
  scenario.samples_per_batch = 600;
  scenario.rng_seed = 31;
  const auto [reference, stationary] = generate_synthetic(scenario);

  BatchSequence sequence;
  sequence.reference = reference;
  for (int i = 0; i < 4; ++i) {
    std::vector<std::size_t> slice(150);
    for (std::size_t r = 0; r < slice.size(); ++r) slice[r] = 150 * i + r;
    sequence.incoming.push_back(subset_rows(stationary, slice));
    sequence.ground_truth_drift.push_back(0);
  }
  const auto manifest_path = save_sequence(sequence, (dir.path / "seq").string());

  BenchConfig cfg;
  cfg.methods = {"adwin"};
  cfg.source = SequenceSource::manifest;
  cfg.manifest_path = manifest_path;
  cfg.repetitions = 3;
  cfg.forest_trees = 25;
  cfg.forest_depth = 8;

  const BenchReport report = run_benchmark(cfg);
  const auto& confusion = report.summaries[0].confusion;
  REQUIRE(confusion.tp == 0.0);
  REQUIRE(confusion.fn == 0.0);
  REQUIRE(confusion.tn + confusion.fp == 4.0);
  REQUIRE(confusion.fp == 0.0);  // a stable window detector should not alarm here
}

TEST_CASE("ablation sweeps one epoch axis and validates its arguments") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::new_class;
  scenario.class_count = 3;
  scenario.feature_count = 6;
  scenario.samples_per_batch = 120;
  scenario.rng_seed = 3;

  const auto rows = run_ablation("cfpt", "train", {1, 3}, scenario, 3, {}, {}, 25, 8);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].train_epochs == 1);
  REQUIRE(rows[1].train_epochs == 3);
  REQUIRE(rows[0].retrain_epochs == 5);  // untouched axis keeps the base value
  for (const auto& row : rows) {
    REQUIRE(row.median_utility >= 0.0);
    REQUIRE(row.median_utility <= 1.0);
  }

  const auto tab_rows = run_ablation("tabautodrift", "train", {2}, scenario, 3, {}, {}, 25, 8);
  REQUIRE(tab_rows.size() == 1);
  REQUIRE(tab_rows[0].train_epochs == 2);

  REQUIRE_THROWS_WITH(run_ablation("cfpt", "train", {}, scenario, 3),
                      Catch::Matchers::ContainsSubstring("empty"));
  REQUIRE_THROWS_WITH(run_ablation("cfpt", "train", {0}, scenario, 3),
                      Catch::Matchers::ContainsSubstring("positive"));
  REQUIRE_THROWS_WITH(run_ablation("adwin", "train", {1}, scenario, 3),
                      Catch::Matchers::ContainsSubstring("cfpt or tabautodrift"));
  REQUIRE_THROWS_WITH(run_ablation("cfpt", "sideways", {1}, scenario, 3),
                      Catch::Matchers::ContainsSubstring("axis"));
  REQUIRE_THROWS_WITH(run_ablation("tabautodrift", "retrain", {1}, scenario, 3),
                      Catch::Matchers::ContainsSubstring("retrain phase"));

  auto calm = scenario;
  calm.kind = DriftKind::none;
  REQUIRE_THROWS_WITH(run_ablation("cfpt", "train", {1}, calm, 3),
                      Catch::Matchers::ContainsSubstring("drifted"));
  REQUIRE_THROWS_WITH(run_ablation("cfpt", "train", {1}, scenario, 0),
                      Catch::Matchers::ContainsSubstring("seeds"));
}
