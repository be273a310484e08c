// Command-line front end: bench | detect | synth | ablate | report.
// All subcommands share the JSON config schema (see --dump-config); command
// line flags override individual fields.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftbench/bench.hpp"

using namespace driftbench;

namespace {

BenchConfig read_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(file);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config '" + path + "' is not valid JSON: " + std::string(e.what()));
  }
  return bench_config_from_json(doc);
}

struct ScenarioFlags {
  std::string kind = "new_class";
  double magnitude = 1.0;
  int classes = 3;
  int features = 6;
  int rows = 500;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& flags) {
  cmd->add_option("--kind", flags.kind,
                  "drift kind: none|covariate|prior_probability|concept|dataset|new_class");
  cmd->add_option("--magnitude", flags.magnitude, "drift magnitude");
  cmd->add_option("--classes", flags.classes, "class count of the synthetic mixture");
  cmd->add_option("--features", flags.features, "feature count of the synthetic mixture");
  cmd->add_option("--rows", flags.rows, "rows per generated batch");
}

SyntheticDriftScenario make_scenario(const ScenarioFlags& flags, std::uint64_t seed) {
  SyntheticDriftScenario scenario;
  scenario.kind = parse_drift_kind(flags.kind);
  scenario.magnitude = flags.magnitude;
  scenario.class_count = flags.classes;
  scenario.feature_count = flags.features;
  scenario.samples_per_batch = flags.rows;
  scenario.rng_seed = seed;
  return scenario;
}

LabeledBatch strip_labels(const LabeledBatch& batch) {
  LabeledBatch out = batch;
  out.labels.reset();
  return out;
}

void run_detect(const BenchConfig& cfg, const std::string& method,
                const std::string& manifest_path, int batch_index,
                const ScenarioFlags& scenario_flags) {
  const auto& known = benchmark_methods();
  if (std::find(known.begin(), known.end(), method) == known.end()) {
    throw std::runtime_error("unknown method '" + method + "'");
  }

  LabeledBatch d0;
  LabeledBatch d1;
  if (!manifest_path.empty()) {
    const auto sequence = load_sequence(load_manifest(manifest_path));
    if (batch_index < 0 || batch_index >= static_cast<int>(sequence.incoming.size())) {
      throw std::runtime_error("batch index out of range; sequence has " +
                               std::to_string(sequence.incoming.size()) + " batches");
    }
    d0 = sequence.reference;
    d1 = strip_labels(sequence.incoming[batch_index]);
  } else {
    const auto pair = generate_synthetic(make_scenario(scenario_flags, cfg.seed));
    d0 = pair.first;
    d1 = strip_labels(pair.second);
  }

  DetectorConfig detector = cfg.detector;
  detector.rng_seed = mix_seed(cfg.seed, 0xde);

  DriftVerdict verdict;
  if (method == "cfpt") {
    const auto m0 =
        fit_random_forest(d0, cfg.forest_trees, cfg.forest_depth, mix_seed(cfg.seed, 0xf0));
    DetectorConfig calibration = detector;
    calibration.rng_seed = mix_seed(cfg.seed, 0xca);
    detector.utility_threshold =
        calibrate_threshold(m0, d0, calibration, cfg.calibration_resamples);
    verdict = cfpt_detect(m0, d0, d1, detector).verdict;
  } else if (method == "tabautodrift") {
    DetectorConfig calibration = detector;
    calibration.rng_seed = mix_seed(cfg.seed, 0xca);
    detector.utility_threshold =
        tabautodrift_calibrate(d0, calibration, cfg.calibration_resamples, cfg.tabautodrift);
    verdict = tabautodrift_detect(d0, d1, detector, cfg.tabautodrift).verdict;
  } else {
    const auto m0 =
        fit_random_forest(d0, cfg.forest_trees, cfg.forest_depth, mix_seed(cfg.seed, 0xf0));
    verdict = baseline_detect_batch(detail::baseline_kind_of(method), m0, d0, d1, cfg.baselines);
  }

  std::cout << "detector: " << verdict.detector_name << '\n'
            << "verdict: " << (verdict.retrain ? "drift (retrain recommended)" : "no drift")
            << '\n'
            << "score: " << verdict.utility << '\n'
            << "threshold: " << verdict.threshold_used << '\n';
}

void run_synth(const BenchConfig& cfg, const std::string& out_dir, bool pair_mode,
               const ScenarioFlags& scenario_flags) {
  BatchSequence sequence;
  if (pair_mode) {
    const auto scenario = make_scenario(scenario_flags, cfg.seed);
    const auto pair = generate_synthetic(scenario);
    sequence.reference = pair.first;
    sequence.incoming.push_back(pair.second);
    sequence.ground_truth_drift.push_back(scenario.kind == DriftKind::none ? 0 : 1);
    if (scenario.kind != DriftKind::none) sequence.drift_onset = 0;
  } else {
    if (cfg.source == SequenceSource::manifest) {
      throw std::runtime_error("synth generates data; pick --source fingerprinting or links");
    }
    sequence = build_bench_sequence(cfg, cfg.seed);
  }
  const auto manifest_path = save_sequence(sequence, out_dir);
  std::cout << "wrote " << sequence.incoming.size() << " batches plus reference to " << out_dir
            << '\n'
            << "manifest: " << manifest_path << '\n';
}

void run_ablate_cmd(const BenchConfig& cfg, const std::string& method, const std::string& axis,
                    const std::vector<int>& grid, int seeds, const std::string& out_dir,
                    const ScenarioFlags& scenario_flags) {
  const auto scenario = make_scenario(scenario_flags, cfg.seed);
  const auto rows = run_ablation(method, axis, grid, scenario, seeds, cfg.detector,
                                 cfg.tabautodrift, cfg.forest_trees, cfg.forest_depth);

  std::ostringstream table;
  table << "train_epochs\tretrain_epochs\tmedian_utility\n";
  for (const auto& row : rows) {
    table << row.train_epochs << '\t' << row.retrain_epochs << '\t' << row.median_utility << '\n';
  }
  std::cout << table.str();

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + out_dir + "': " + ec.message());
    const auto path = std::filesystem::path(out_dir) / "ablation.tsv";
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
    file << table.str();
    std::cout << "wrote " << path.string() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concept drift detection toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> methods;
  int reps = 0;
  std::string source;
  std::string manifest_path;
  bool dump_config = false;

  ScenarioFlags scenario_flags;
  std::string method = "cfpt";
  int batch_index = 0;
  bool pair_mode = false;
  std::string axis = "train";
  std::vector<int> grid;
  int ablate_seeds = 8;
  std::string records_path;

  auto* bench = app.add_subcommand("bench", "run detectors over a batch sequence");
  bench->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* bench_seed = bench->add_option("--seed", seed, "master seed");
  auto* bench_out = bench->add_option("--out", out_dir, "output directory");
  auto* bench_methods =
      bench->add_option("--methods", methods, "comma-separated detector list")->delimiter(',');
  auto* bench_reps = bench->add_option("--reps", reps, "repetitions (>= 3)");
  auto* bench_source =
      bench->add_option("--source", source, "sequence source: fingerprinting|links|manifest");
  auto* bench_manifest = bench->add_option("--manifest", manifest_path, "manifest file to load");
  bench->add_flag("--dump-config", dump_config, "print the effective config as JSON and exit");
  bench->callback([&] {
    BenchConfig cfg = config_path.empty() ? BenchConfig{} : read_config_file(config_path);
    if (bench_seed->count()) cfg.seed = seed;
    if (bench_out->count()) cfg.out_dir = out_dir;
    if (bench_methods->count()) cfg.methods = methods;
    if (bench_reps->count()) cfg.repetitions = reps;
    if (bench_source->count()) cfg.source = parse_sequence_source(source);
    if (bench_manifest->count()) {
      cfg.manifest_path = manifest_path;
      if (!bench_source->count()) cfg.source = SequenceSource::manifest;
    }
    if (dump_config) {
      std::cout << bench_config_to_json(cfg).dump(2) << '\n';
      return;
    }
    validate_bench_config(cfg);
    const auto report = run_benchmark(cfg);
    std::cout << render_summary_table(report);
    for (const auto& path : emit_report(report, cfg.out_dir)) {
      std::cout << "wrote " << path << '\n';
    }
  });

  auto* detect = app.add_subcommand("detect", "score one incoming batch against a reference");
  detect->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* detect_seed = detect->add_option("--seed", seed, "master seed");
  detect->add_option("--method", method, "detector to run");
  detect->add_option("--manifest", manifest_path, "score a manifest batch instead of synthetic");
  detect->add_option("--batch", batch_index, "incoming batch index within the manifest");
  add_scenario_flags(detect, scenario_flags);
  detect->callback([&] {
    BenchConfig cfg = config_path.empty() ? BenchConfig{} : read_config_file(config_path);
    if (detect_seed->count()) cfg.seed = seed;
    run_detect(cfg, method, manifest_path, batch_index, scenario_flags);
  });

  auto* synth = app.add_subcommand("synth", "generate a batch sequence as CSV files");
  synth->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* synth_seed = synth->add_option("--seed", seed, "master seed");
  synth->add_option("--out", out_dir, "output directory")->required();
  auto* synth_source =
      synth->add_option("--source", source, "protocol to generate: fingerprinting|links");
  synth->add_flag("--pair", pair_mode, "write a single reference/incoming pair instead");
  add_scenario_flags(synth, scenario_flags);
  synth->callback([&] {
    BenchConfig cfg = config_path.empty() ? BenchConfig{} : read_config_file(config_path);
    if (synth_seed->count()) cfg.seed = seed;
    if (synth_source->count()) cfg.source = parse_sequence_source(source);
    run_synth(cfg, out_dir, pair_mode, scenario_flags);
  });

  auto* ablate = app.add_subcommand("ablate", "sweep detector epochs on a drifted scenario");
  ablate->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* ablate_seed = ablate->add_option("--seed", seed, "master seed");
  ablate->add_option("--method", method, "cfpt or tabautodrift");
  ablate->add_option("--axis", axis, "swept phase: train or retrain");
  ablate->add_option("--grid", grid, "comma-separated epoch counts")
      ->delimiter(',')
      ->required();
  ablate->add_option("--seeds", ablate_seeds, "seeds per grid point");
  ablate->add_option("--out", out_dir, "directory for ablation.tsv");
  add_scenario_flags(ablate, scenario_flags);
  ablate->callback([&] {
    BenchConfig cfg = config_path.empty() ? BenchConfig{} : read_config_file(config_path);
    if (ablate_seed->count()) cfg.seed = seed;
    run_ablate_cmd(cfg, method, axis, grid, ablate_seeds, out_dir, scenario_flags);
  });

  auto* report_cmd = app.add_subcommand("report", "summarize a records.jsonl file");
  report_cmd->add_option("--records", records_path, "records.jsonl from a bench run")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->callback(
      [&] { std::cout << render_summary_table(read_records(records_path), false); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
