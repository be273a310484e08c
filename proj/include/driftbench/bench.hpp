#pragma once

// Benchmark harness: runs any subset of the seven detectors over a batch
// sequence (synthetic protocol or manifest-loaded), repeats the experiment,
// aggregates rewards with the trimmed mean, and writes report files.
//
// Per repetition every method sees exactly the same world: one sequence, one
// deployed forest, one calibrated threshold per adaptive detector, and one
// cached retrain-gain value per batch. On sequences whose protocol folds
// flagged batches into the reference, the fold (refit + recalibration)
// happens after scoring the batch and applies to all methods alike.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "driftbench/baselines.hpp"
#include "driftbench/batch.hpp"
#include "driftbench/cfpt.hpp"
#include "driftbench/datasets.hpp"
#include "driftbench/evaluation.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/rng.hpp"
#include "driftbench/synthetic.hpp"
#include "driftbench/tabautodrift.hpp"
#include "driftbench/tree.hpp"

namespace driftbench {

inline const std::vector<std::string>& benchmark_methods() {
  static const std::vector<std::string> names = {"cfpt", "tabautodrift", "page_hinkley",
                                                 "cusum",  "ddm",         "stepd",
                                                 "adwin"};
  return names;
}

enum class SequenceSource { fingerprinting, links, manifest };

inline const char* sequence_source_name(SequenceSource source) {
  switch (source) {
    case SequenceSource::fingerprinting: return "fingerprinting";
    case SequenceSource::links: return "links";
    case SequenceSource::manifest: return "manifest";
  }
  throw std::logic_error("sequence_source_name: unknown source");
}

inline SequenceSource parse_sequence_source(const std::string& name) {
  if (name == "fingerprinting") return SequenceSource::fingerprinting;
  if (name == "links") return SequenceSource::links;
  if (name == "manifest") return SequenceSource::manifest;
  throw std::invalid_argument("unknown sequence source '" + name + "'");
}

struct BenchConfig {
  std::vector<std::string> methods = benchmark_methods();
  SequenceSource source = SequenceSource::fingerprinting;
  std::string manifest_path;  // used when source == manifest
  int repetitions = 10;
  std::uint64_t seed = 1;
  std::string out_dir = "bench_out";

  RewardParams reward;
  DetectorConfig detector;  // utility_threshold is ignored: thresholds are calibrated
  int calibration_resamples = 10;
  int forest_trees = 100;
  int forest_depth = 16;

  FingerprintingSourceSpec fingerprinting;
  LinksSourceSpec links;
  TabDetectorParams tabautodrift;
  BaselineParams baselines;
};

// ---------------------------------------------------------------------------
// Config <-> JSON (round-trips through the CLI's --dump-config)
// ---------------------------------------------------------------------------

inline nlohmann::json bench_config_to_json(const BenchConfig& cfg) {
  nlohmann::json j;
  j["version"] = 1;
  j["methods"] = cfg.methods;
  j["repetitions"] = cfg.repetitions;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["reward"] = {{"t_s", cfg.reward.t_s}};
  j["detector"] = {{"train_epochs", cfg.detector.train_epochs},
                   {"retrain_epochs", cfg.detector.retrain_epochs},
                   {"confidence_keep_fraction", cfg.detector.confidence_keep_fraction}};
  j["calibration_resamples"] = cfg.calibration_resamples;
  j["forest"] = {{"tree_count", cfg.forest_trees}, {"max_depth", cfg.forest_depth}};
  j["sequence"] = {
      {"source", sequence_source_name(cfg.source)},
      {"manifest", cfg.manifest_path},
      {"fingerprinting",
       {{"class_count", cfg.fingerprinting.class_count},
        {"rows_per_class", cfg.fingerprinting.rows_per_class},
        {"base_dims", cfg.fingerprinting.base_dims},
        {"class_separation", cfg.fingerprinting.class_separation},
        {"lift_height", cfg.fingerprinting.lift_height},
        {"arrival_std", cfg.fingerprinting.arrival_std}}},
      {"links",
       {{"class_count", cfg.links.class_count},
        {"rows_per_class", cfg.links.rows_per_class},
        {"series_length", cfg.links.series_length},
        {"class_separation", cfg.links.class_separation}}}};
  j["tabautodrift"] = {{"hidden_width", cfg.tabautodrift.hidden_width},
                       {"step_count", cfg.tabautodrift.step_count},
                       {"mask_ratio", cfg.tabautodrift.mask_ratio},
                       {"pretrain_epochs", cfg.tabautodrift.pretrain_epochs},
                       {"learning_rate", cfg.tabautodrift.learning_rate}};
  j["baselines"] = {
      {"page_hinkley",
       {{"delta", cfg.baselines.page_hinkley.delta}, {"lambda", cfg.baselines.page_hinkley.lambda}}},
      {"cusum", {{"delta", cfg.baselines.cusum.delta}, {"h", cfg.baselines.cusum.h}}},
      {"ddm", {{"warmup", cfg.baselines.ddm.warmup}}},
      {"stepd",
       {{"recent_size", cfg.baselines.stepd.recent_size},
        {"alpha_drift", cfg.baselines.stepd.alpha_drift}}},
      {"adwin", {{"confidence", cfg.baselines.adwin.confidence}}}};
  return j;
}

namespace detail {

// Strict field reader: every key in `obj` must be consumed by some `take`.
struct JsonReader {
  const nlohmann::json& obj;
  std::string where;
  std::vector<std::string> consumed;

  JsonReader(const nlohmann::json& o, std::string w) : obj(o), where(std::move(w)) {
    if (!obj.is_object()) throw std::runtime_error("bench config: '" + where + "' must be an object");
  }

  template <class T>
  void take(const char* key, T& out) {
    consumed.push_back(key);
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::runtime_error("bench config: bad value for '" + where + "." + key + "'");
    }
  }

  const nlohmann::json* object(const char* key) {
    consumed.push_back(key);
    if (!obj.contains(key)) return nullptr;
    return &obj.at(key);
  }

  void finish() const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find(consumed.begin(), consumed.end(), it.key()) == consumed.end()) {
        throw std::runtime_error("bench config: unknown key '" + where + "." + it.key() + "'");
      }
    }
  }
};

}  // namespace detail

inline BenchConfig bench_config_from_json(const nlohmann::json& doc) {
  BenchConfig cfg;
  detail::JsonReader top(doc, "config");
  int version = 1;
  top.take("version", version);
  if (version != 1) throw std::runtime_error("bench config: unsupported version");
  top.take("methods", cfg.methods);
  top.take("repetitions", cfg.repetitions);
  top.take("seed", cfg.seed);
  top.take("out_dir", cfg.out_dir);
  top.take("calibration_resamples", cfg.calibration_resamples);

  if (const auto* reward = top.object("reward")) {
    detail::JsonReader r(*reward, "reward");
    r.take("t_s", cfg.reward.t_s);
    r.finish();
  }
  if (const auto* det = top.object("detector")) {
    detail::JsonReader r(*det, "detector");
    r.take("train_epochs", cfg.detector.train_epochs);
    r.take("retrain_epochs", cfg.detector.retrain_epochs);
    r.take("confidence_keep_fraction", cfg.detector.confidence_keep_fraction);
    r.finish();
  }
  if (const auto* forest = top.object("forest")) {
    detail::JsonReader r(*forest, "forest");
    r.take("tree_count", cfg.forest_trees);
    r.take("max_depth", cfg.forest_depth);
    r.finish();
  }
  if (const auto* sequence = top.object("sequence")) {
    detail::JsonReader r(*sequence, "sequence");
    std::string source = sequence_source_name(cfg.source);
    r.take("source", source);
    cfg.source = parse_sequence_source(source);
    r.take("manifest", cfg.manifest_path);
    if (const auto* fp = r.object("fingerprinting")) {
      detail::JsonReader f(*fp, "sequence.fingerprinting");
      f.take("class_count", cfg.fingerprinting.class_count);
      f.take("rows_per_class", cfg.fingerprinting.rows_per_class);
      f.take("base_dims", cfg.fingerprinting.base_dims);
      f.take("class_separation", cfg.fingerprinting.class_separation);
      f.take("lift_height", cfg.fingerprinting.lift_height);
      f.take("arrival_std", cfg.fingerprinting.arrival_std);
      f.finish();
    }
    if (const auto* links = r.object("links")) {
      detail::JsonReader f(*links, "sequence.links");
      f.take("class_count", cfg.links.class_count);
      f.take("rows_per_class", cfg.links.rows_per_class);
      f.take("series_length", cfg.links.series_length);
      f.take("class_separation", cfg.links.class_separation);
      f.finish();
    }
    r.finish();
  }
  if (const auto* tab = top.object("tabautodrift")) {
    detail::JsonReader r(*tab, "tabautodrift");
    r.take("hidden_width", cfg.tabautodrift.hidden_width);
    r.take("step_count", cfg.tabautodrift.step_count);
    r.take("mask_ratio", cfg.tabautodrift.mask_ratio);
    r.take("pretrain_epochs", cfg.tabautodrift.pretrain_epochs);
    r.take("learning_rate", cfg.tabautodrift.learning_rate);
    r.finish();
  }
  if (const auto* base = top.object("baselines")) {
    detail::JsonReader r(*base, "baselines");
    if (const auto* ph = r.object("page_hinkley")) {
      detail::JsonReader f(*ph, "baselines.page_hinkley");
      f.take("delta", cfg.baselines.page_hinkley.delta);
      f.take("lambda", cfg.baselines.page_hinkley.lambda);
      f.finish();
    }
    if (const auto* cs = r.object("cusum")) {
      detail::JsonReader f(*cs, "baselines.cusum");
      f.take("delta", cfg.baselines.cusum.delta);
      f.take("h", cfg.baselines.cusum.h);
      f.finish();
    }
    if (const auto* ddm = r.object("ddm")) {
      detail::JsonReader f(*ddm, "baselines.ddm");
      f.take("warmup", cfg.baselines.ddm.warmup);
      f.finish();
    }
    if (const auto* stepd = r.object("stepd")) {
      detail::JsonReader f(*stepd, "baselines.stepd");
      f.take("recent_size", cfg.baselines.stepd.recent_size);
      f.take("alpha_drift", cfg.baselines.stepd.alpha_drift);
      f.finish();
    }
    if (const auto* adwin = r.object("adwin")) {
      detail::JsonReader f(*adwin, "baselines.adwin");
      f.take("confidence", cfg.baselines.adwin.confidence);
      f.finish();
    }
    r.finish();
  }
  top.finish();
  return cfg;
}

inline void validate_bench_config(const BenchConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("bench config: no methods selected");
  const auto& known = benchmark_methods();
  for (const auto& name : cfg.methods) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw std::invalid_argument("bench config: unknown method '" + name + "'");
    }
    if (std::count(cfg.methods.begin(), cfg.methods.end(), name) > 1) {
      throw std::invalid_argument("bench config: method '" + name + "' listed twice");
    }
  }
  if (cfg.repetitions < 3) {
    throw std::invalid_argument(
        "bench config: repetitions must be >= 3 (trimmed aggregation drops two)");
  }
  if (cfg.source == SequenceSource::manifest && cfg.manifest_path.empty()) {
    throw std::invalid_argument("bench config: manifest source needs a manifest path");
  }
  if (cfg.forest_trees <= 0 || cfg.forest_depth <= 0) {
    throw std::invalid_argument("bench config: forest parameters must be positive");
  }
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

// Everything one (method, repetition) pair produced. Timings live outside so
// the records serialize byte-identically across reruns.
struct MethodRecord {
  std::string method;
  int rep = 0;
  std::vector<char> verdicts;  // one flag per incoming batch
  std::vector<double> utilities;
  std::vector<double> thresholds;
  double total_reward = 0.0;
};

struct MethodSummary {
  std::string method;
  double trimmed_reward = 0.0;
  std::vector<double> rep_rewards;
  AlarmConfusion confusion;  // majority verdict per batch across repetitions
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<char> ground_truth;
  std::vector<MethodSummary> summaries;
  std::vector<MethodRecord> records;
};

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace detail {

inline LabeledBatch without_labels(const LabeledBatch& batch) {
  LabeledBatch out = batch;
  out.labels.reset();
  return out;
}

inline BaselineKind baseline_kind_of(const std::string& name) {
  if (name == "page_hinkley") return BaselineKind::page_hinkley;
  if (name == "cusum") return BaselineKind::cusum;
  if (name == "ddm") return BaselineKind::ddm;
  if (name == "stepd") return BaselineKind::stepd;
  if (name == "adwin") return BaselineKind::adwin;
  throw std::logic_error("not a baseline method: " + name);
}

// Confusion from per-batch majority verdicts (ties count as an alarm), so
// each method's counts always sum to the sequence length.
inline AlarmConfusion majority_confusion(const std::vector<const MethodRecord*>& records,
                                         const std::vector<char>& truth) {
  AlarmConfusion confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::size_t votes = 0;
    for (const auto* record : records) votes += (*record).verdicts[i] != 0 ? 1 : 0;
    const bool alarm = 2 * votes >= records.size();
    switch (classify_decision(alarm, truth[i] != 0)) {
      case DecisionCase::kTruePositive: confusion.tp += 1; break;
      case DecisionCase::kTrueNegative: confusion.tn += 1; break;
      case DecisionCase::kFalsePositive: confusion.fp += 1; break;
      case DecisionCase::kFalseNegative: confusion.fn += 1; break;
    }
  }
  return confusion;
}

}  // namespace detail

inline BatchSequence build_bench_sequence(const BenchConfig& cfg, std::uint64_t rep_seed) {
  switch (cfg.source) {
    case SequenceSource::fingerprinting: {
      auto spec = cfg.fingerprinting;
      spec.rng_seed = mix_seed(rep_seed, 0x50);
      return build_fingerprinting_protocol(make_fingerprinting_source(spec),
                                           mix_seed(rep_seed, 0x51));
    }
    case SequenceSource::links: {
      auto spec = cfg.links;
      spec.rng_seed = mix_seed(rep_seed, 0x52);
      return build_links_protocol(make_links_source(spec), mix_seed(rep_seed, 0x53));
    }
    case SequenceSource::manifest:
      return load_sequence(load_manifest(cfg.manifest_path));
  }
  throw std::logic_error("build_bench_sequence: unknown source");
}

inline BenchReport run_benchmark(const BenchConfig& cfg) {
  validate_bench_config(cfg);

  BenchReport report;
  report.config = cfg;
  std::map<std::string, std::vector<double>> detection_seconds;

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    const BatchSequence sequence = build_bench_sequence(cfg, rep_seed);
    const std::size_t batch_count = sequence.incoming.size();
    if (rep == 0) {
      report.ground_truth = sequence.ground_truth_drift;
    }

    LabeledBatch reference = sequence.reference;
    RandomForest m0 =
        fit_random_forest(reference, cfg.forest_trees, cfg.forest_depth, mix_seed(rep_seed, 0xf0));

    const bool wants_cfpt = std::find(cfg.methods.begin(), cfg.methods.end(), "cfpt") !=
                            cfg.methods.end();
    const bool wants_tab = std::find(cfg.methods.begin(), cfg.methods.end(), "tabautodrift") !=
                           cfg.methods.end();

    DetectorConfig calibration_cfg = cfg.detector;
    calibration_cfg.rng_seed = mix_seed(rep_seed, 0xca);
    double cfpt_threshold =
        wants_cfpt ? calibrate_threshold(m0, reference, calibration_cfg, cfg.calibration_resamples)
                   : 0.0;
    double tab_threshold =
        wants_tab ? tabautodrift_calibrate(reference, calibration_cfg, cfg.calibration_resamples,
                                           cfg.tabautodrift)
                  : 0.0;

    std::map<std::string, MethodRecord> rep_records;
    for (const auto& method : cfg.methods) {
      MethodRecord record;
      record.method = method;
      record.rep = rep;
      rep_records.emplace(method, std::move(record));
    }

    std::vector<double> gains(batch_count, 0.0);
    for (std::size_t i = 0; i < batch_count; ++i) {
      const LabeledBatch& batch = sequence.incoming[i];
      const LabeledBatch unlabeled = detail::without_labels(batch);
      gains[i] = f1_gain(m0, reference, batch, mix_seed(rep_seed, 0x9a10 + i));

      DetectorConfig detect_cfg = cfg.detector;
      detect_cfg.rng_seed = mix_seed(rep_seed, 0xde00 + i);

      for (const auto& method : cfg.methods) {
        DriftVerdict verdict;
        const auto started = std::chrono::steady_clock::now();
        if (method == "cfpt") {
          DetectorConfig c = detect_cfg;
          c.utility_threshold = cfpt_threshold;
          verdict = cfpt_detect(m0, reference, unlabeled, c).verdict;
        } else if (method == "tabautodrift") {
          DetectorConfig c = detect_cfg;
          c.utility_threshold = tab_threshold;
          verdict = tabautodrift_detect(reference, unlabeled, c, cfg.tabautodrift).verdict;
        } else {
          verdict = baseline_detect_batch(detail::baseline_kind_of(method), m0, reference,
                                          unlabeled, cfg.baselines);
        }
        const auto stopped = std::chrono::steady_clock::now();
        detection_seconds[method].push_back(
            std::chrono::duration<double>(stopped - started).count());

        auto& record = rep_records.at(method);
        record.verdicts.push_back(verdict.retrain ? 1 : 0);
        record.utilities.push_back(verdict.utility);
        record.thresholds.push_back(verdict.threshold_used);
      }

      // Fold ground-truth drift into the reference after scoring: later
      // batches are judged against everything seen so far.
      if (sequence.fold_drift_into_reference && sequence.ground_truth_drift[i] != 0) {
        reference = concat_batches(reference, batch);
        m0 = fit_random_forest(reference, cfg.forest_trees, cfg.forest_depth,
                               mix_seed(rep_seed, 0xf100 + i));
        calibration_cfg.rng_seed = mix_seed(rep_seed, 0xca00 + i);
        if (wants_cfpt) {
          cfpt_threshold =
              calibrate_threshold(m0, reference, calibration_cfg, cfg.calibration_resamples);
        }
        if (wants_tab) {
          tab_threshold = tabautodrift_calibrate(reference, calibration_cfg,
                                                 cfg.calibration_resamples, cfg.tabautodrift);
        }
      }
    }

    for (const auto& method : cfg.methods) {
      auto& record = rep_records.at(method);
      std::vector<bool> alarms(record.verdicts.begin(), record.verdicts.end());
      record.total_reward =
          score_sequence(alarms, sequence.ground_truth_drift, gains, cfg.reward).total_reward;
      report.records.push_back(std::move(record));
    }
  }

  for (const auto& method : cfg.methods) {
    MethodSummary summary;
    summary.method = method;
    std::vector<const MethodRecord*> method_records;
    for (const auto& record : report.records) {
      if (record.method != method) continue;
      method_records.push_back(&record);
      summary.rep_rewards.push_back(record.total_reward);
    }
    summary.trimmed_reward = aggregate_trimmed(summary.rep_rewards);
    summary.confusion = detail::majority_confusion(method_records, report.ground_truth);

    const auto& seconds = detection_seconds.at(method);
    double mean = 0.0;
    for (double s : seconds) mean += s;
    mean /= static_cast<double>(seconds.size());
    double var = 0.0;
    for (double s : seconds) var += (s - mean) * (s - mean);
    var /= static_cast<double>(seconds.size());
    summary.mean_seconds = mean;
    summary.std_seconds = std::sqrt(var);
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  int train_epochs = 0;
  int retrain_epochs = 0;
  double median_utility = 0.0;
};

// Sweeps one epoch axis of an adaptive detector on a drifted synthetic pair,
// reporting the median utility across seeds for each grid point.
inline std::vector<AblationRow> run_ablation(const std::string& method, const std::string& axis,
                                             const std::vector<int>& epoch_grid,
                                             const SyntheticDriftScenario& scenario, int seeds,
                                             const DetectorConfig& base_cfg = {},
                                             const TabDetectorParams& tab_params = {},
                                             int forest_trees = 100, int forest_depth = 16) {
  if (epoch_grid.empty()) throw std::invalid_argument("run_ablation: empty epoch grid");
  for (int e : epoch_grid) {
    if (e <= 0) throw std::invalid_argument("run_ablation: epoch counts must be positive");
  }
  if (method != "cfpt" && method != "tabautodrift") {
    throw std::invalid_argument("run_ablation: method must be cfpt or tabautodrift");
  }
  if (axis != "train" && axis != "retrain") {
    throw std::invalid_argument("run_ablation: axis must be 'train' or 'retrain'");
  }
  if (method == "tabautodrift" && axis == "retrain") {
    throw std::invalid_argument("run_ablation: tabautodrift has no separate retrain phase");
  }
  if (scenario.kind == DriftKind::none) {
    throw std::invalid_argument("run_ablation: needs a drifted scenario");
  }
  if (seeds <= 0) throw std::invalid_argument("run_ablation: seeds must be positive");

  std::vector<AblationRow> rows;
  rows.reserve(epoch_grid.size());
  for (int value : epoch_grid) {
    AblationRow row;
    row.train_epochs = axis == "train" ? value : base_cfg.train_epochs;
    row.retrain_epochs = axis == "retrain" ? value : base_cfg.retrain_epochs;

    std::vector<double> utilities;
    utilities.reserve(seeds);
    for (int s = 0; s < seeds; ++s) {
      auto sc = scenario;
      sc.rng_seed = mix_seed(scenario.rng_seed, static_cast<std::uint64_t>(s));
      const auto [d0, d1] = generate_synthetic(sc);
      const LabeledBatch incoming = detail::without_labels(d1);

      DetectorConfig cfg = base_cfg;
      cfg.rng_seed = mix_seed(sc.rng_seed, 0xab1);
      if (method == "cfpt") {
        const auto m0 = fit_random_forest(d0, forest_trees, forest_depth, sc.rng_seed);
        utilities.push_back(
            cfpt_run(m0, d0, incoming, cfg, row.train_epochs, row.retrain_epochs).utility);
      } else {
        cfg.train_epochs = row.train_epochs;
        utilities.push_back(tabautodrift_detect(d0, incoming, cfg, tab_params).trace.utility);
      }
    }
    std::sort(utilities.begin(), utilities.end());
    row.median_utility = utilities[utilities.size() / 2];
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed6(double value) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << value;
  return out.str();
}

}  // namespace detail

// Timings are unavailable when a report was rebuilt from records.jsonl, so
// they can be left out of the table.
inline std::string render_summary_table(const BenchReport& report, bool include_timings = true) {
  std::ostringstream out;
  out << "method\ttrimmed_reward\ttp\ttn\tfp\tfn\tprecision\trecall\tf1";
  if (include_timings) out << "\tmean_seconds\tstd_seconds";
  out << '\n';
  for (const auto& s : report.summaries) {
    out << s.method << '\t' << detail::fixed6(s.trimmed_reward) << '\t' << s.confusion.tp << '\t'
        << s.confusion.tn << '\t' << s.confusion.fp << '\t' << s.confusion.fn << '\t'
        << detail::fixed6(s.confusion.precision()) << '\t' << detail::fixed6(s.confusion.recall())
        << '\t' << detail::fixed6(s.confusion.f1());
    if (include_timings) {
      out << '\t' << detail::fixed6(s.mean_seconds) << '\t' << detail::fixed6(s.std_seconds);
    }
    out << '\n';
  }
  return out.str();
}

// Writes summary.tsv (human table, includes timings), records.jsonl (machine
// records; deterministic, timings excluded), and rewards.tsv (per-repetition
// reward points for plotting). Returns the written paths.
inline std::vector<std::string> emit_report(const BenchReport& report, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit_report: cannot create '" + out_dir + "': " + ec.message());

  const auto open_out = [&](const std::string& name) {
    std::ofstream file(std::filesystem::path(out_dir) / name, std::ios::binary);
    if (!file) throw std::runtime_error("emit_report: cannot write '" + out_dir + "/" + name + "'");
    return file;
  };

  std::vector<std::string> written;
  {
    auto file = open_out("summary.tsv");
    file << render_summary_table(report);
    written.push_back((std::filesystem::path(out_dir) / "summary.tsv").string());
  }
  {
    auto file = open_out("records.jsonl");
    nlohmann::json header;
    header["type"] = "header";
    header["config"] = bench_config_to_json(report.config);
    header["ground_truth"] = report.ground_truth;
    file << header.dump() << '\n';
    for (const auto& record : report.records) {
      nlohmann::json line;
      line["type"] = "record";
      line["method"] = record.method;
      line["rep"] = record.rep;
      line["verdicts"] = record.verdicts;
      line["utilities"] = record.utilities;
      line["thresholds"] = record.thresholds;
      line["total_reward"] = record.total_reward;
      file << line.dump() << '\n';
    }
    written.push_back((std::filesystem::path(out_dir) / "records.jsonl").string());
  }
  {
    auto file = open_out("rewards.tsv");
    file << "method\trep\ttotal_reward\n";
    for (const auto& record : report.records) {
      file << record.method << '\t' << record.rep << '\t' << detail::fixed6(record.total_reward)
           << '\n';
    }
    written.push_back((std::filesystem::path(out_dir) / "rewards.tsv").string());
  }
  return written;
}

// Rebuilds a BenchReport (minus timings) from a records.jsonl file, for the
// standalone report command.
inline BenchReport read_records(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("read_records: cannot open '" + path + "'");

  BenchReport report;
  bool saw_header = false;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("read_records: line " + std::to_string(line_number) +
                               " is not JSON: " + e.what());
    }
    const std::string type = doc.value("type", "");
    if (type == "header") {
      report.config = bench_config_from_json(doc.at("config"));
      report.ground_truth = doc.at("ground_truth").get<std::vector<char>>();
      saw_header = true;
    } else if (type == "record") {
      MethodRecord record;
      record.method = doc.at("method").get<std::string>();
      record.rep = doc.at("rep").get<int>();
      record.verdicts = doc.at("verdicts").get<std::vector<char>>();
      record.utilities = doc.at("utilities").get<std::vector<double>>();
      record.thresholds = doc.at("thresholds").get<std::vector<double>>();
      record.total_reward = doc.at("total_reward").get<double>();
      report.records.push_back(std::move(record));
    } else {
      throw std::runtime_error("read_records: line " + std::to_string(line_number) +
                               " has unknown type");
    }
  }
  if (!saw_header) throw std::runtime_error("read_records: missing header line");

  for (const auto& method : report.config.methods) {
    MethodSummary summary;
    summary.method = method;
    std::vector<const MethodRecord*> method_records;
    for (const auto& record : report.records) {
      if (record.method != method) continue;
      method_records.push_back(&record);
      summary.rep_rewards.push_back(record.total_reward);
    }
    if (method_records.empty()) continue;
    summary.trimmed_reward = aggregate_trimmed(summary.rep_rewards);
    summary.confusion = detail::majority_confusion(method_records, report.ground_truth);
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

}  // namespace driftbench
