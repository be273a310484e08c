#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace driftbench {

// Dense row-major feature matrix. Kept deliberately plain so batches stay
// cheap value types that can be sliced and concatenated by the protocols.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }
  double* row(std::size_t r) { return values.data() + r * cols; }
};

struct ClassLabel {
  int id = 0;                // contiguous from 0 within one benchmark
  std::string display_name;  // e.g. original CSV label text
};

// One batch of samples. Labels are optional: incoming batches may arrive
// unlabeled and detectors must not rely on them.
struct LabeledBatch {
  FeatureMatrix features;
  std::optional<std::vector<int>> labels;
  int batch_id = 0;

  std::size_t rows() const { return features.rows; }
  std::size_t cols() const { return features.cols; }
  bool has_labels() const { return labels.has_value(); }
};

// Outcome of one detector invocation on one batch.
struct DriftVerdict {
  bool retrain = false;       // true = retraining recommended
  double utility = 0.0;       // expected-utility score, or raw statistic for baselines
  double threshold_used = 0.0;
  std::string detector_name;
};

// An ordered evaluation stream: the reference batch the deployed model was
// trained on plus the incoming batches with per-batch ground truth.
struct BatchSequence {
  LabeledBatch reference;
  std::vector<LabeledBatch> incoming;
  std::vector<char> ground_truth_drift;  // one flag per incoming batch
  std::optional<int> drift_onset;        // first drifted index, if any

  // Protocol semantics: when true, the harness folds each ground-truth drift
  // batch into the reference after scoring it (novelty is judged against
  // everything seen so far). When false the reference stays fixed.
  bool fold_drift_into_reference = false;
};

struct DetectorConfig {
  double utility_threshold = 0.5;         // replace via calibrate_threshold for deployment
  int train_epochs = 5;
  int retrain_epochs = 5;
  double confidence_keep_fraction = 0.8;  // pseudo-label retention
  std::uint64_t rng_seed = 0;
};

// Shape/content validation used by loaders and at detector entry points.
// Returns human-readable violations; empty means the batch is usable.
inline std::vector<std::string> validate_batch(const LabeledBatch& batch) {
  std::vector<std::string> violations;
  if (batch.rows() == 0 || batch.cols() == 0) {
    violations.push_back("batch is empty (rows=" + std::to_string(batch.rows()) +
                         ", cols=" + std::to_string(batch.cols()) + ")");
  }
  if (batch.features.values.size() != batch.rows() * batch.cols()) {
    violations.push_back("feature storage size does not match rows*cols");
  }
  for (std::size_t i = 0; i < batch.features.values.size(); ++i) {
    if (!std::isfinite(batch.features.values[i])) {
      violations.push_back("non-finite feature value at row " +
                           std::to_string(i / (batch.cols() ? batch.cols() : 1)) + ", col " +
                           std::to_string(batch.cols() ? i % batch.cols() : 0));
      break;
    }
  }
  if (batch.has_labels()) {
    if (batch.labels->size() != batch.rows()) {
      violations.push_back("label count " + std::to_string(batch.labels->size()) +
                           " does not match row count " + std::to_string(batch.rows()));
    }
    for (std::size_t i = 0; i < batch.labels->size(); ++i) {
      if ((*batch.labels)[i] < 0) {
        violations.push_back("negative class id at row " + std::to_string(i));
        break;
      }
    }
  }
  return violations;
}

// Number of classes implied by a labeled batch (max id + 1).
inline int class_count_of(const LabeledBatch& batch) {
  if (!batch.has_labels() || batch.labels->empty()) return 0;
  int max_id = 0;
  for (int label : *batch.labels) {
    if (label > max_id) max_id = label;
  }
  return max_id + 1;
}

inline LabeledBatch subset_rows(const LabeledBatch& batch, const std::vector<std::size_t>& rows) {
  LabeledBatch out;
  out.features = FeatureMatrix(rows.size(), batch.cols());
  std::vector<int> labels;
  if (batch.has_labels()) labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = batch.features.row(rows[i]);
    std::copy(src, src + batch.cols(), out.features.row(i));
    if (batch.has_labels()) labels.push_back((*batch.labels)[rows[i]]);
  }
  if (batch.has_labels()) out.labels = std::move(labels);
  out.batch_id = batch.batch_id;
  return out;
}

inline LabeledBatch concat_batches(const LabeledBatch& a, const LabeledBatch& b) {
  LabeledBatch out;
  out.features = FeatureMatrix(a.rows() + b.rows(), a.cols());
  std::copy(a.features.values.begin(), a.features.values.end(), out.features.values.begin());
  std::copy(b.features.values.begin(), b.features.values.end(),
            out.features.values.begin() + static_cast<std::ptrdiff_t>(a.features.values.size()));
  if (a.has_labels() && b.has_labels()) {
    std::vector<int> labels = *a.labels;
    labels.insert(labels.end(), b.labels->begin(), b.labels->end());
    out.labels = std::move(labels);
  }
  out.batch_id = b.batch_id;
  return out;
}

}  // namespace driftbench
