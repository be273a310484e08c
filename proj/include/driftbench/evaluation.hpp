#pragma once

// Retrain-benefit measurement on top of the scoring primitives in
// metrics.hpp: how much macro-F1 the deployed forest would gain if it were
// retrained on the reference data plus a labeled slice of the new batch.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/rng.hpp"
#include "driftbench/tree.hpp"

namespace driftbench {

// Splits d_new 70/30 with a seeded shuffle, refits a forest with m0's
// hyperparameters on d0 plus the 70% slice, and returns the macro-F1
// improvement of the refit over m0 on the held-out 30%, clamped to [0, 1].
// The class set is the union of everything either model can emit, so a class
// unseen by m0 drags its holdout score down instead of being ignored.
inline double f1_gain(const RandomForest& m0, const LabeledBatch& d0, const LabeledBatch& d_new,
                      std::uint64_t rng_seed) {
  if (!d0.has_labels() || !d_new.has_labels()) {
    throw std::invalid_argument("f1_gain: both batches need ground-truth labels");
  }
  if (d0.cols() != m0.feature_count || d_new.cols() != m0.feature_count) {
    throw std::invalid_argument("f1_gain: feature width does not match the forest");
  }
  const std::size_t n = d_new.rows();
  const std::size_t train_rows = n * 7 / 10;
  const std::size_t holdout_rows = n - train_rows;
  if (train_rows == 0 || holdout_rows == 0) {
    throw std::invalid_argument("f1_gain: too few rows for a 70/30 split");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(rng_seed, 0xf19a);
  std::shuffle(order.begin(), order.end(), rng);
  const std::vector<std::size_t> train_idx(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(train_rows));
  const std::vector<std::size_t> holdout_idx(
      order.begin() + static_cast<std::ptrdiff_t>(train_rows), order.end());

  const LabeledBatch retrain_set = concat_batches(d0, subset_rows(d_new, train_idx));
  const LabeledBatch holdout = subset_rows(d_new, holdout_idx);
  const RandomForest retrained =
      fit_random_forest(retrain_set, m0.tree_count, m0.max_depth, mix_seed(rng_seed, 0xf19b),
                        m0.features_per_split);

  const int class_count =
      std::max({m0.class_count, retrained.class_count, class_count_of(holdout)});
  const double before =
      macro_f1(*holdout.labels, predict_with_confidence(m0, holdout).classes, class_count);
  const double after =
      macro_f1(*holdout.labels, predict_with_confidence(retrained, holdout).classes, class_count);
  return std::clamp(after - before, 0.0, 1.0);
}

}  // namespace driftbench
