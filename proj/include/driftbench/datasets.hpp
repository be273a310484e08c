#pragma once

// Batch-sequence construction: CSV/manifest loading for externally supplied
// data and the two benchmark batching protocols (31-batch fingerprinting,
// 9-batch flattened-series links).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "driftbench/batch.hpp"
#include "driftbench/rng.hpp"
#include "driftbench/synthetic.hpp"

namespace driftbench {

// ---------------------------------------------------------------------------
// Manifest + CSV loading
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;
  bool has_drift = false;
};

// Schema and file list for an externally supplied batch sequence. Stored as
// JSON: {"version": 1, "label_column": ..., "feature_columns": [...],
// "reference": path, "batches": [{"path": ..., "drift": bool}, ...]}.
// Relative paths are resolved against the manifest's directory. An empty
// feature_columns list means "all non-label columns of the reference file".
struct BatchManifest {
  int version = 1;
  std::string label_column;
  std::vector<std::string> feature_columns;
  std::string reference_path;
  std::vector<ManifestEntry> batches;
};

// Shared token -> contiguous class id mapping so every file in a sequence
// agrees on label ids (first-seen order).
struct LabelMap {
  std::map<std::string, int> ids;
  std::vector<std::string> names;

  int id_for(const std::string& token) {
    auto it = ids.find(token);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(names.size());
    ids.emplace(token, id);
    names.push_back(token);
    return id;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace detail

// Reads one CSV file against the manifest schema. Rows keep file order;
// label tokens map to contiguous ids through `labels` (pass the same map for
// every file of a sequence). Feature cells must parse as finite numbers.
inline LabeledBatch load_csv(const std::string& path, const BatchManifest& manifest,
                             LabelMap& labels) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("load_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw std::runtime_error("load_csv: empty file '" + path + "'");
  const auto header = detail::split_csv_line(line);

  const auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };

  const int label_idx = find_column(manifest.label_column);
  if (label_idx < 0) {
    throw std::runtime_error("load_csv: label column '" + manifest.label_column +
                             "' not found in '" + path + "'");
  }

  std::vector<std::string> feature_names = manifest.feature_columns;
  if (feature_names.empty()) {
    for (const auto& name : header) {
      if (name != manifest.label_column) feature_names.push_back(name);
    }
  }
  std::vector<int> feature_idx;
  feature_idx.reserve(feature_names.size());
  for (const auto& name : feature_names) {
    const int idx = find_column(name);
    if (idx < 0) {
      throw std::runtime_error("load_csv: feature column '" + name + "' not found in '" + path +
                               "'");
    }
    feature_idx.push_back(idx);
  }
  if (feature_idx.empty()) {
    throw std::runtime_error("load_csv: no feature columns for '" + path + "'");
  }

  std::vector<double> values;
  std::vector<int> row_labels;
  std::size_t row_number = 1;  // header was line 1
  while (std::getline(file, line)) {
    ++row_number;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(row_number) + " in '" + path +
                               "' has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    for (std::size_t f = 0; f < feature_idx.size(); ++f) {
      const std::string& cell = fields[feature_idx[f]];
      char* parse_end = nullptr;
      const double value = std::strtod(cell.c_str(), &parse_end);
      if (cell.empty() || parse_end != cell.c_str() + cell.size() || !std::isfinite(value)) {
        throw std::runtime_error("load_csv: row " + std::to_string(row_number) + " column '" +
                                 feature_names[f] + "' in '" + path + "' is not a finite number");
      }
      values.push_back(value);
    }
    row_labels.push_back(labels.id_for(fields[label_idx]));
  }
  if (row_labels.empty()) throw std::runtime_error("load_csv: empty dataset in '" + path + "'");

  LabeledBatch batch;
  batch.features = FeatureMatrix(row_labels.size(), feature_idx.size());
  batch.features.values = std::move(values);
  batch.labels = std::move(row_labels);
  return batch;
}

inline BatchManifest parse_manifest(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("parse_manifest: invalid JSON: ") + e.what());
  }
  BatchManifest manifest;
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw std::runtime_error("parse_manifest: missing integer 'version'");
  }
  manifest.version = doc["version"].get<int>();
  if (manifest.version != 1) {
    throw std::runtime_error("parse_manifest: unsupported version " +
                             std::to_string(manifest.version));
  }
  for (const char* key : {"label_column", "reference"}) {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw std::runtime_error(std::string("parse_manifest: missing string '") + key + "'");
    }
  }
  manifest.label_column = doc["label_column"].get<std::string>();
  manifest.reference_path = doc["reference"].get<std::string>();
  if (doc.contains("feature_columns")) {
    for (const auto& name : doc["feature_columns"]) {
      manifest.feature_columns.push_back(name.get<std::string>());
    }
  }
  if (!doc.contains("batches") || !doc["batches"].is_array()) {
    throw std::runtime_error("parse_manifest: missing array 'batches'");
  }
  for (const auto& item : doc["batches"]) {
    if (!item.contains("path") || !item.contains("drift")) {
      throw std::runtime_error("parse_manifest: each batch needs 'path' and 'drift'");
    }
    manifest.batches.push_back({item["path"].get<std::string>(), item["drift"].get<bool>()});
  }
  return manifest;
}

// Loads a manifest file and resolves its relative paths.
inline BatchManifest load_manifest(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("load_manifest: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  BatchManifest manifest = parse_manifest(buffer.str());
  const auto base = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    return std::filesystem::path(p).is_absolute() ? p : (base / p).string();
  };
  manifest.reference_path = resolve(manifest.reference_path);
  for (auto& entry : manifest.batches) entry.path = resolve(entry.path);
  return manifest;
}

// Loads every file of a manifest into one BatchSequence with a shared label
// mapping and a consistent feature schema.
inline BatchSequence load_sequence(const BatchManifest& manifest) {
  LabelMap labels;
  BatchSequence sequence;
  sequence.reference = load_csv(manifest.reference_path, manifest, labels);
  for (std::size_t i = 0; i < manifest.batches.size(); ++i) {
    LabeledBatch batch = load_csv(manifest.batches[i].path, manifest, labels);
    if (batch.cols() != sequence.reference.cols()) {
      throw std::runtime_error("load_sequence: '" + manifest.batches[i].path +
                               "' feature width differs from the reference");
    }
    batch.batch_id = static_cast<int>(i) + 1;
    sequence.incoming.push_back(std::move(batch));
    sequence.ground_truth_drift.push_back(manifest.batches[i].has_drift ? 1 : 0);
    if (manifest.batches[i].has_drift && !sequence.drift_onset) {
      sequence.drift_onset = static_cast<int>(i);
    }
  }
  return sequence;
}

namespace detail {

inline void write_csv(const std::filesystem::path& path, const LabeledBatch& batch) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("save_sequence: cannot write '" + path.string() + "'");
  file.precision(17);  // doubles survive the round trip exactly
  for (std::size_t c = 0; c < batch.cols(); ++c) file << 'f' << c << ',';
  file << "label\n";
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t c = 0; c < batch.cols(); ++c) file << batch.features.at(r, c) << ',';
    file << (*batch.labels)[r] << '\n';
  }
}

}  // namespace detail

// Writes a labeled sequence into `dir` as one CSV per batch plus a
// manifest.json that load_manifest/load_sequence reads back. Returns the
// manifest path.
inline std::string save_sequence(const BatchSequence& sequence, const std::string& dir) {
  if (!sequence.reference.has_labels()) {
    throw std::invalid_argument("save_sequence: reference batch must be labeled");
  }
  for (const auto& batch : sequence.incoming) {
    if (!batch.has_labels()) throw std::invalid_argument("save_sequence: unlabeled batch");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("save_sequence: cannot create '" + dir + "': " + ec.message());
  }

  const std::filesystem::path base(dir);
  detail::write_csv(base / "reference.csv", sequence.reference);

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["label_column"] = "label";
  manifest["reference"] = "reference.csv";
  manifest["batches"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sequence.incoming.size(); ++i) {
    std::ostringstream name;
    name << "batch_" << (i < 9 ? "0" : "") << (i + 1) << ".csv";
    detail::write_csv(base / name.str(), sequence.incoming[i]);
    manifest["batches"].push_back(
        {{"path", name.str()}, {"drift", sequence.ground_truth_drift[i] != 0}});
  }

  const auto manifest_path = base / "manifest.json";
  std::ofstream file(manifest_path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("save_sequence: cannot write '" + manifest_path.string() + "'");
  }
  file << manifest.dump(2) << '\n';
  return manifest_path.string();
}

// ---------------------------------------------------------------------------
// Batching protocols
// ---------------------------------------------------------------------------

namespace detail {

// Row indices of each class, for resampling.
inline std::vector<std::vector<std::size_t>> class_pools(const LabeledBatch& source,
                                                         int class_count) {
  std::vector<std::vector<std::size_t>> pools(class_count);
  for (std::size_t r = 0; r < source.rows(); ++r) pools[(*source.labels)[r]].push_back(r);
  return pools;
}

// Stratified resample (with replacement): `total` rows spread over `classes`
// proportionally to pool sizes, then shuffled.
inline LabeledBatch resample_classes(const LabeledBatch& source,
                                     const std::vector<std::vector<std::size_t>>& pools,
                                     const std::vector<int>& classes, int total,
                                     std::mt19937_64& rng) {
  std::vector<double> weights;
  weights.reserve(classes.size());
  for (int c : classes) weights.push_back(static_cast<double>(pools[c].size()));
  const auto counts = apportion_rows(total, weights);

  std::vector<std::size_t> rows;
  rows.reserve(total);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& pool = pools[classes[k]];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int i = 0; i < counts[k]; ++i) rows.push_back(pool[pick(rng)]);
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  return subset_rows(source, rows);
}

}  // namespace detail

// A double-size reference plus 30 equal incoming batches from a >= 13-class
// source. The reference D0 holds the first three classes and is twice the
// incoming batch size, so detectors that calibrate on reference half-splits
// see nulls at the operational batch size. Of the incoming batches D1..D30,
// every third starting at D2 (so D2, D5, ..., D29) is pure samples of one
// class never seen before, and the rest resample all previously seen classes
// proportionally to their pool sizes. Ground truth flags exactly the
// new-class batches; scoring harnesses are expected to fold flagged batches
// into the reference (novelty is judged against everything seen so far).
inline BatchSequence build_fingerprinting_protocol(const LabeledBatch& source,
                                                   std::uint64_t rng_seed) {
  if (!source.has_labels()) {
    throw std::invalid_argument("build_fingerprinting_protocol: source batch unlabeled");
  }
  const int class_count = class_count_of(source);
  if (class_count < 13) {
    throw std::invalid_argument("build_fingerprinting_protocol: need at least 13 classes, got " +
                                std::to_string(class_count));
  }
  const auto pools = detail::class_pools(source, class_count);
  for (int c = 0; c < 13; ++c) {
    if (pools[c].empty()) {
      throw std::invalid_argument("build_fingerprinting_protocol: class " + std::to_string(c) +
                                  " has no rows");
    }
  }
  const int batch_size = static_cast<int>(source.rows() / 32);
  if (batch_size < 3) {
    throw std::invalid_argument("build_fingerprinting_protocol: source too small for 32 batches");
  }

  BatchSequence sequence;
  sequence.fold_drift_into_reference = true;

  std::vector<int> seen = {0, 1, 2};
  {
    auto rng = make_rng(rng_seed, 0);
    sequence.reference = detail::resample_classes(source, pools, seen, 2 * batch_size, rng);
    sequence.reference.batch_id = 0;
  }
  int next_class = 3;
  for (int i = 0; i < 30; ++i) {
    auto rng = make_rng(rng_seed, static_cast<std::uint64_t>(i) + 1);
    const bool drift = i % 3 == 1;  // incoming index 1 is D2, then every third
    LabeledBatch batch;
    if (drift) {
      batch = detail::resample_classes(source, pools, {next_class}, batch_size, rng);
      seen.push_back(next_class);
      ++next_class;
    } else {
      batch = detail::resample_classes(source, pools, seen, batch_size, rng);
    }
    batch.batch_id = i + 1;
    sequence.incoming.push_back(std::move(batch));
    sequence.ground_truth_drift.push_back(drift ? 1 : 0);
  }
  sequence.drift_onset = 1;
  return sequence;
}

// 9 equal batches from a flattened-series source (class 0 = normal traffic).
// The reference and D1..D3 mix the normal class with the first anomaly class;
// D4..D8 each hold one class the reference never saw (cycling when the source
// has fewer than 7 classes). The reference stays fixed, so every unseen-class
// batch counts as drift: flags are [F,F,F,T,T,T,T,T].
inline BatchSequence build_links_protocol(const LabeledBatch& source, std::uint64_t rng_seed) {
  if (!source.has_labels()) {
    throw std::invalid_argument("build_links_protocol: source batch unlabeled");
  }
  if (source.cols() != 300) {
    throw std::invalid_argument("build_links_protocol: expects flattened series of length 300");
  }
  const int class_count = class_count_of(source);
  if (class_count < 5) {
    throw std::invalid_argument(
        "build_links_protocol: need a normal class and at least 4 anomaly classes");
  }
  const auto pools = detail::class_pools(source, class_count);
  for (int c = 0; c < class_count; ++c) {
    if (pools[c].empty()) {
      throw std::invalid_argument("build_links_protocol: class " + std::to_string(c) +
                                  " has no rows");
    }
  }
  const int batch_size = static_cast<int>(source.rows() / 9);
  if (batch_size < 2) {
    throw std::invalid_argument("build_links_protocol: source too small for 9 batches");
  }

  BatchSequence sequence;
  sequence.fold_drift_into_reference = false;

  const std::vector<int> reference_classes = {0, 1};
  {
    auto rng = make_rng(rng_seed, 0);
    sequence.reference =
        detail::resample_classes(source, pools, reference_classes, batch_size, rng);
    sequence.reference.batch_id = 0;
  }
  for (int i = 0; i < 8; ++i) {
    auto rng = make_rng(rng_seed, static_cast<std::uint64_t>(i) + 1);
    const bool drift = i >= 3;
    LabeledBatch batch;
    if (drift) {
      const int anomaly = 2 + (i - 3) % (class_count - 2);
      batch = detail::resample_classes(source, pools, {anomaly}, batch_size, rng);
    } else {
      batch = detail::resample_classes(source, pools, reference_classes, batch_size, rng);
    }
    batch.batch_id = i + 1;
    sequence.incoming.push_back(std::move(batch));
    sequence.ground_truth_drift.push_back(drift ? 1 : 0);
  }
  sequence.drift_onset = 3;
  return sequence;
}

}  // namespace driftbench
