#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/tree.hpp"

namespace driftbench {

struct PseudoLabeledBatch {
  LabeledBatch batch;                      // kept rows, labels = model predictions
  std::vector<std::size_t> kept_indices;   // strictly increasing, into the source batch
  double mean_confidence = 0.0;            // over the kept rows
};

// Labels `batch` with the model's own most-confident predictions: ranks rows
// by confidence (ties keep the earlier row), retains
// ceil(keep_fraction * rows) of them and drops the rest.
inline PseudoLabeledBatch pseudo_label(const RandomForest& model, const LabeledBatch& batch,
                                       double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("pseudo_label: keep_fraction must be in (0, 1]");
  }
  if (batch.rows() == 0) throw std::invalid_argument("pseudo_label: empty batch");

  const PredictionBatch pred = predict_with_confidence(model, batch);

  std::vector<std::size_t> order(batch.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pred.confidences[a] != pred.confidences[b]) {
      return pred.confidences[a] > pred.confidences[b];
    }
    return a < b;
  });

  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(keep_fraction * static_cast<double>(batch.rows()))));
  order.resize(std::min(keep, order.size()));
  std::sort(order.begin(), order.end());

  PseudoLabeledBatch out;
  out.kept_indices = order;
  out.batch = subset_rows(batch, order);
  std::vector<int> labels(order.size());
  double conf_sum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    labels[i] = pred.classes[order[i]];
    conf_sum += pred.confidences[order[i]];
  }
  out.batch.labels = std::move(labels);
  out.mean_confidence = conf_sum / static_cast<double>(order.size());
  return out;
}

}  // namespace driftbench
