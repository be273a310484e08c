#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/pseudo_label.hpp"
#include "driftbench/rng.hpp"
#include "driftbench/tree.hpp"

namespace driftbench {

struct UtilityTrace {
  std::vector<double> f1_train;    // per-epoch macro-F1 while fitting the reference
  std::vector<double> f1_retrain;  // per-epoch macro-F1 while refitting on the new batch
  double utility = 0.0;            // mean absolute per-epoch gap
};

// Mean absolute gap between two equally long per-epoch F1 traces. Both traces
// must contain values in [0, 1], so the result is also in [0, 1].
inline double compute_utility(const std::vector<double>& f1_train,
                              const std::vector<double>& f1_retrain) {
  if (f1_train.empty() || f1_train.size() != f1_retrain.size()) {
    throw std::invalid_argument("compute_utility: traces must have equal non-zero length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < f1_train.size(); ++i) {
    if (f1_train[i] < 0.0 || f1_train[i] > 1.0 || f1_retrain[i] < 0.0 || f1_retrain[i] > 1.0) {
      throw std::invalid_argument("compute_utility: trace entries must lie in [0, 1]");
    }
    sum += std::abs(f1_retrain[i] - f1_train[i]);
  }
  return sum / static_cast<double>(f1_train.size());
}

// Proxy-training engine behind the detector. Trains a fresh boosted proxy on
// the labeled reference, then warm-starts it on the pseudo-labeled batch, and
// scores the per-epoch gap. Epoch counts may differ (used by the epoch-sweep
// study); the shorter trace is held at its final value when pairing, and the
// mean runs over the retraining epochs.
inline UtilityTrace cfpt_run(const RandomForest& m0, const LabeledBatch& d0,
                             const LabeledBatch& d1, const DetectorConfig& cfg, int train_epochs,
                             int retrain_epochs, const BoostedParams& proxy = {}) {
  if (!d0.has_labels()) throw std::invalid_argument("cfpt: reference batch must be labeled");
  if (d0.rows() == 0 || d1.rows() == 0) throw std::invalid_argument("cfpt: empty batch");
  if (d0.cols() != d1.cols()) throw std::invalid_argument("cfpt: feature count mismatch");
  if (train_epochs <= 0 || retrain_epochs <= 0) {
    throw std::invalid_argument("cfpt: epoch counts must be positive");
  }

  const PseudoLabeledBatch pseudo = pseudo_label(m0, d1, cfg.confidence_keep_fraction);

  BoostedEnsemble proxy_model = make_boosted(class_count_of(d0), proxy);
  UtilityTrace trace;
  trace.f1_train = boosted_fit_stages(proxy_model, d0, train_epochs, d0);
  trace.f1_retrain = boosted_fit_stages(proxy_model, pseudo.batch, retrain_epochs, pseudo.batch);

  if (trace.f1_train.size() == trace.f1_retrain.size()) {
    trace.utility = compute_utility(trace.f1_train, trace.f1_retrain);
  } else {
    double sum = 0.0;
    for (std::size_t i = 0; i < trace.f1_retrain.size(); ++i) {
      const std::size_t j = std::min(i, trace.f1_train.size() - 1);
      sum += std::abs(trace.f1_retrain[i] - trace.f1_train[j]);
    }
    trace.utility = sum / static_cast<double>(trace.f1_retrain.size());
  }
  return trace;
}

struct CfptDetection {
  DriftVerdict verdict;
  UtilityTrace trace;
};

// Confidence-filtered pseudo-label transfer detector: flags drift when the
// warm-started proxy's behaviour on the new batch departs from its behaviour
// while learning the reference.
inline CfptDetection cfpt_detect(const RandomForest& m0, const LabeledBatch& d0,
                                 const LabeledBatch& d1, const DetectorConfig& cfg,
                                 const BoostedParams& proxy = {}) {
  if (cfg.train_epochs != cfg.retrain_epochs) {
    throw std::invalid_argument("cfpt_detect: train_epochs and retrain_epochs must match");
  }
  CfptDetection out;
  out.trace = cfpt_run(m0, d0, d1, cfg, cfg.train_epochs, cfg.retrain_epochs, proxy);
  out.verdict.retrain = out.trace.utility >= cfg.utility_threshold;
  out.verdict.utility = out.trace.utility;
  out.verdict.threshold_used = cfg.utility_threshold;
  out.verdict.detector_name = "cfpt";
  return out;
}

namespace detail {

// Shared no-drift resampling scheme: split the reference into two disjoint
// halves `resamples` times and measure a detector's utility on each pair.
inline double calibrate_from_halves(
    const LabeledBatch& d0, const DetectorConfig& cfg, int resamples,
    const std::function<double(const LabeledBatch&, const LabeledBatch&, std::uint64_t)>&
        utility_of_pair) {
  if (resamples <= 0) throw std::invalid_argument("calibrate_threshold: resamples must be positive");
  const std::size_t half = d0.rows() / 2;
  if (half < 2) {
    throw std::invalid_argument("calibrate_threshold: reference too small for a resample split");
  }
  std::vector<double> utilities;
  utilities.reserve(resamples);
  std::vector<std::size_t> order(d0.rows());
  for (int k = 0; k < resamples; ++k) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.rng_seed, 0x5eedu + static_cast<std::uint64_t>(k));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> first(order.begin(), order.begin() + half);
    std::vector<std::size_t> second(order.begin() + half, order.begin() + 2 * half);
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    utilities.push_back(utility_of_pair(subset_rows(d0, first), subset_rows(d0, second),
                                        mix_seed(cfg.rng_seed, 0xca11u + k)));
  }
  double mean = 0.0;
  for (double u : utilities) mean += u;
  mean /= static_cast<double>(utilities.size());
  double var = 0.0;
  for (double u : utilities) var += (u - mean) * (u - mean);
  var /= static_cast<double>(utilities.size());
  // An exactly-zero threshold would turn the >= alarm comparison into a
  // constant alarm, so a degenerate zero-noise calibration gets a tiny floor.
  return std::max(std::clamp(mean + 3.0 * std::sqrt(var), 0.0, 1.0), 1e-9);
}

}  // namespace detail

// No-drift threshold for the pseudo-label transfer detector: mean + 3 sigma
// of utilities measured across disjoint same-distribution halves of the
// reference, clamped to [0, 1].
inline double calibrate_threshold(const RandomForest& m0, const LabeledBatch& d0,
                                  const DetectorConfig& cfg, int resamples = 10,
                                  const BoostedParams& proxy = {}) {
  if (!d0.has_labels()) throw std::invalid_argument("calibrate_threshold: reference unlabeled");
  return detail::calibrate_from_halves(
      d0, cfg, resamples,
      [&](const LabeledBatch& half_a, const LabeledBatch& half_b, std::uint64_t) {
        return cfpt_run(m0, half_a, half_b, cfg, cfg.train_epochs, cfg.retrain_epochs, proxy)
            .utility;
      });
}

}  // namespace driftbench
