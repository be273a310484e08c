#pragma once

// Representation-transfer drift detector. Pretrains an attentive tabular
// encoder on the unlabeled incoming batch with masked reconstruction, then
// trains two classifiers on the labeled reference: one starting from the
// transferred encoder, one from scratch. The mean per-epoch macro-F1 gap
// between the two runs is the utility score; a batch that matches the
// reference distribution yields an encoder (and feature scaler) that behaves
// like a fresh one, so the gap stays near zero.

#include <cstdint>
#include <stdexcept>
#include <utility>

#include "driftbench/batch.hpp"
#include "driftbench/cfpt.hpp"
#include "driftbench/rng.hpp"
#include "driftbench/tab_repr.hpp"

namespace driftbench {

// Engineering knobs for the encoder; the detection contract itself only
// depends on (d0, d1, cfg). Pretraining runs much longer than the supervised
// traces because the encoder needs many small-step updates before it carries
// any signature of the batch it was fitted on.
struct TabDetectorParams {
  int hidden_width = 64;
  int step_count = 2;
  double mask_ratio = 0.25;
  int pretrain_epochs = 40;
  double learning_rate = 0.02;
};

struct TabDetection {
  DriftVerdict verdict;
  UtilityTrace trace;
};

inline TabDetection tabautodrift_detect(const LabeledBatch& d0, const LabeledBatch& d1,
                                        const DetectorConfig& cfg,
                                        const TabDetectorParams& params = {}) {
  if (!d0.has_labels()) {
    throw std::invalid_argument("tabautodrift_detect: reference needs labels");
  }
  if (d0.rows() == 0 || d1.rows() == 0) {
    throw std::invalid_argument("tabautodrift_detect: empty batch");
  }
  if (d0.cols() != d1.cols()) {
    throw std::invalid_argument("tabautodrift_detect: feature width mismatch");
  }
  if (cfg.train_epochs <= 0) {
    throw std::invalid_argument("tabautodrift_detect: train_epochs must be positive");
  }

  auto [encoder, pre_trace] =
      pretrain_masked(d1, params.mask_ratio, params.pretrain_epochs,
                      mix_seed(cfg.rng_seed, 0x7ad0), params.hidden_width,
                      params.step_count, params.learning_rate);
  auto [warm, warm_trace] =
      train_classifier(&encoder, d0, cfg.train_epochs, cfg.rng_seed, params.hidden_width,
                       params.step_count, params.learning_rate);
  auto [cold, cold_trace] =
      train_classifier(nullptr, d0, cfg.train_epochs, cfg.rng_seed, params.hidden_width,
                       params.step_count, params.learning_rate);

  UtilityTrace trace;
  trace.f1_train = cold_trace.f1s;    // from-scratch run
  trace.f1_retrain = warm_trace.f1s;  // transferred-encoder run
  trace.utility = compute_utility(trace.f1_train, trace.f1_retrain);

  TabDetection out;
  out.trace = std::move(trace);
  out.verdict.retrain = out.trace.utility >= cfg.utility_threshold;
  out.verdict.utility = out.trace.utility;
  out.verdict.threshold_used = cfg.utility_threshold;
  out.verdict.detector_name = "tabautodrift";
  return out;
}

// Stationary-utility calibration on disjoint halves of the reference, same
// scheme as the pseudo-label detector's threshold.
inline double tabautodrift_calibrate(const LabeledBatch& d0, const DetectorConfig& cfg,
                                     int resamples = 10,
                                     const TabDetectorParams& params = {}) {
  return detail::calibrate_from_halves(
      d0, cfg, resamples,
      [&](const LabeledBatch& half_a, const LabeledBatch& half_b, std::uint64_t seed) {
        DetectorConfig inner = cfg;
        inner.rng_seed = seed;
        return tabautodrift_detect(half_a, half_b, inner, params).trace.utility;
      });
}

}  // namespace driftbench
