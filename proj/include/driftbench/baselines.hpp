#pragma once

// Classical sequential drift detectors (Page-Hinkley, CUSUM, DDM, STEPD,
// ADWIN) plus the adapter that feeds them a per-sample statistic derived from
// the deployed forest: winning-vote confidence for the mean-shift detectors,
// a binarized low-confidence indicator for the error-rate detectors.

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/tree.hpp"

namespace driftbench {

// Page-Hinkley test for an upward mean shift: accumulates deviations from the
// running mean and alarms when the accumulator rises `lambda` above its
// historical minimum. Alarms reset the detector.
struct PageHinkleyDetector {
  double delta = 0.005;
  double lambda = 50.0;

  std::size_t samples_seen = 0;
  double mean = 0.0;
  double cumulative = 0.0;
  double cumulative_min = 0.0;

  void reset() { *this = PageHinkleyDetector{delta, lambda}; }

  bool update(double x) {
    ++samples_seen;
    mean += (x - mean) / static_cast<double>(samples_seen);
    cumulative += x - mean - delta;
    cumulative_min = std::min(cumulative_min, cumulative);
    const bool alarm = cumulative - cumulative_min > lambda;
    if (alarm) reset();
    return alarm;
  }
};

// One-sided CUSUM chart against the running pre-alarm mean. Alarms reset the
// detector, which restarts the mean estimate from scratch.
struct CusumDetector {
  double delta = 0.005;
  double h = 50.0;

  std::size_t samples_seen = 0;
  double mean = 0.0;
  double g = 0.0;

  void reset() { *this = CusumDetector{delta, h}; }

  bool update(double x) {
    ++samples_seen;
    mean += (x - mean) / static_cast<double>(samples_seen);
    g = std::max(0.0, g + x - mean - delta);
    const bool alarm = g > h;
    if (alarm) reset();
    return alarm;
  }
};

enum class DdmLevel { stable, warning, drift };

// Drift Detection Method over a boolean error stream: compares the current
// error rate against the historical best (minimum) rate plus two / three of
// its standard deviations. Needs 30 samples of warm-up; drift resets.
struct DdmDetector {
  int warmup = 30;

  std::size_t samples_seen = 0;
  double p = 0.0;
  double p_min = 1e300;
  double s_min = 1e300;

  void reset() { *this = DdmDetector{warmup}; }

  DdmLevel update(bool error) {
    ++samples_seen;
    p += ((error ? 1.0 : 0.0) - p) / static_cast<double>(samples_seen);
    const double s = std::sqrt(std::max(0.0, p * (1.0 - p)) /
                               static_cast<double>(samples_seen));
    if (samples_seen < std::size_t(warmup)) return DdmLevel::stable;
    if (p + s <= p_min + s_min) {
      p_min = p;
      s_min = s;
    }
    // strict comparisons so an all-correct stream (p = s = 0) stays stable
    if (p + s > p_min + 3.0 * s_min) {
      reset();
      return DdmLevel::drift;
    }
    if (p + s > p_min + 2.0 * s_min) return DdmLevel::warning;
    return DdmLevel::stable;
  }
};

// Statistical test of equal proportions: a two-proportion z-test with
// continuity correction between the last `recent_size` errors and everything
// older. Tests run once the overall history is at least twice the recent
// window; alarms reset the detector.
struct StepdDetector {
  std::size_t recent_size = 30;
  double alpha_drift = 0.003;

  std::size_t samples_seen = 0;
  std::size_t older_count = 0;
  std::size_t older_errors = 0;
  std::deque<bool> recent;

  void reset() { *this = StepdDetector{recent_size, alpha_drift}; }

  // upper-tail p-value of the corrected z statistic; 1.0 when no test applies
  double current_p_value() const {
    if (samples_seen < 2 * recent_size || older_count == 0 || recent.empty()) return 1.0;
    std::size_t recent_errors = 0;
    for (bool e : recent) recent_errors += e ? 1 : 0;
    const double no = static_cast<double>(older_count);
    const double nr = static_cast<double>(recent.size());
    const double ro = static_cast<double>(older_errors) / no;
    const double rr = static_cast<double>(recent_errors) / nr;
    const double pooled = (static_cast<double>(older_errors) + recent_errors) / (no + nr);
    if (pooled <= 0.0 || pooled >= 1.0) return 1.0;  // no variance, no test
    const double z = (std::abs(ro - rr) - 0.5 * (1.0 / no + 1.0 / nr)) /
                     std::sqrt(pooled * (1.0 - pooled) * (1.0 / no + 1.0 / nr));
    return 0.5 * std::erfc(z / std::sqrt(2.0));  // 1 - Phi(z)
  }

  bool update(bool error) {
    ++samples_seen;
    recent.push_back(error);
    if (recent.size() > recent_size) {
      older_errors += recent.front() ? 1 : 0;
      ++older_count;
      recent.pop_front();
    }
    const bool alarm = current_p_value() < alpha_drift;
    if (alarm) reset();
    return alarm;
  }
};

// Adaptive windowing with the exponential bucket histogram. The window grows
// with every new sample and shrinks from the old end whenever two adjacent
// sub-windows differ by more than the Hoeffding-style bound; the cut itself is
// the alarm, so the detector never needs a reset to keep adapting.
struct AdwinDetector {
  double confidence = 0.002;       // delta in the cut bound
  int max_buckets_per_level = 5;

  struct Bucket {
    double sum = 0.0;
    std::size_t size = 0;
  };
  // levels[i] holds buckets of size 2^i, oldest first within a level; the
  // stream order is: higher levels are older, and within a level front() is
  // oldest.
  std::vector<std::deque<Bucket>> levels;
  double total_sum = 0.0;
  std::size_t width = 0;
  std::size_t samples_seen = 0;

  void reset() { *this = AdwinDetector{confidence, max_buckets_per_level}; }

  double mean() const { return width == 0 ? 0.0 : total_sum / static_cast<double>(width); }

  bool update(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::invalid_argument("adwin_update: sample outside [0, 1]");
    }
    ++samples_seen;
    if (levels.empty()) levels.emplace_back();
    levels[0].push_back(Bucket{x, 1});
    total_sum += x;
    ++width;
    compress();
    return shrink();
  }

 private:
  void compress() {
    for (std::size_t lvl = 0; lvl < levels.size(); ++lvl) {
      if (levels[lvl].size() <= std::size_t(max_buckets_per_level)) break;
      if (lvl + 1 == levels.size()) levels.emplace_back();
      Bucket merged;
      merged.sum = levels[lvl][0].sum + levels[lvl][1].sum;
      merged.size = levels[lvl][0].size + levels[lvl][1].size;
      levels[lvl].pop_front();
      levels[lvl].pop_front();
      levels[lvl + 1].push_back(merged);
    }
  }

  // Checks every admissible split, oldest side vs newest side, and drops the
  // oldest bucket while any split's mean gap exceeds the bound.
  bool shrink() {
    bool cut_any = false;
    bool cut = true;
    while (cut && width >= 2) {
      cut = false;
      double left_sum = 0.0;
      std::size_t left_n = 0;
      // iterate buckets from oldest to newest: highest level front first
      for (std::size_t lvl_back = levels.size(); lvl_back-- > 0 && !cut;) {
        for (const Bucket& b : levels[lvl_back]) {
          left_sum += b.sum;
          left_n += b.size;
          if (left_n == width) break;  // no right side left
          const double right_sum = total_sum - left_sum;
          const std::size_t right_n = width - left_n;
          const double gap = std::abs(left_sum / static_cast<double>(left_n) -
                                      right_sum / static_cast<double>(right_n));
          if (gap >= cut_bound(left_n, right_n)) {
            cut = true;
            break;
          }
        }
      }
      if (cut) {
        drop_oldest_bucket();
        cut_any = true;
      }
    }
    return cut_any;
  }

  double cut_bound(std::size_t n_left, std::size_t n_right) const {
    const double harmonic =
        1.0 / (1.0 / static_cast<double>(n_left) + 1.0 / static_cast<double>(n_right));
    const double delta_prime = confidence / static_cast<double>(width);
    return std::sqrt(std::log(4.0 / delta_prime) / (2.0 * harmonic));
  }

  void drop_oldest_bucket() {
    for (std::size_t lvl_back = levels.size(); lvl_back-- > 0;) {
      if (levels[lvl_back].empty()) continue;
      total_sum -= levels[lvl_back].front().sum;
      width -= levels[lvl_back].front().size;
      levels[lvl_back].pop_front();
      while (!levels.empty() && levels.back().empty()) levels.pop_back();
      return;
    }
  }
};

enum class BaselineKind { page_hinkley, cusum, ddm, stepd, adwin };

inline std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::page_hinkley: return "page_hinkley";
    case BaselineKind::cusum: return "cusum";
    case BaselineKind::ddm: return "ddm";
    case BaselineKind::stepd: return "stepd";
    case BaselineKind::adwin: return "adwin";
  }
  throw std::invalid_argument("baseline_name: unknown kind");
}

// Per-sample signal for the sequential detectors. Reference rows use
// out-of-bag confidence so the stream is comparable with the honest
// full-forest confidence on unseen rows; in-bag-everywhere rows fall back to
// the full-forest vote.
inline std::vector<double> adapter_signal(const RandomForest& m0, const LabeledBatch& d0,
                                          const LabeledBatch& d1) {
  std::vector<double> signal;
  signal.reserve(d0.rows() + d1.rows());
  const auto reference = predict_out_of_bag(m0, d0);
  for (double c : reference.confidences) signal.push_back(c);
  if (d1.rows() > 0) {
    const auto incoming = predict_with_confidence(m0, d1);
    for (double c : incoming.confidences) signal.push_back(c);
  }
  return signal;
}

// Streams the adapter signal for the reference rows (warming the detector up
// on stationary behaviour), then the incoming rows; the verdict is whether
// any alarm fired during the incoming segment. The statistic reported is the
// fraction of incoming samples that raised an alarm.
// Detector knobs for the batch adapter. Only the tuning fields are read;
// each call streams a freshly constructed detector.
struct BaselineParams {
  PageHinkleyDetector page_hinkley;
  CusumDetector cusum;
  DdmDetector ddm;
  StepdDetector stepd;
  AdwinDetector adwin;
};

inline DriftVerdict baseline_detect_batch(BaselineKind kind, const RandomForest& m0,
                                          const LabeledBatch& d0, const LabeledBatch& d1,
                                          const BaselineParams& params = {}) {
  if (!d0.has_labels()) {
    throw std::invalid_argument("baseline_detect_batch: reference needs labels");
  }
  const auto signal = adapter_signal(m0, d0, d1);
  const std::size_t split = d0.rows();

  PageHinkleyDetector ph{params.page_hinkley.delta, params.page_hinkley.lambda};
  CusumDetector cusum{params.cusum.delta, params.cusum.h};
  DdmDetector ddm{params.ddm.warmup};
  StepdDetector stepd{params.stepd.recent_size, params.stepd.alpha_drift};
  AdwinDetector adwin{params.adwin.confidence, params.adwin.max_buckets_per_level};

  std::size_t incoming_alarms = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    bool alarm = false;
    switch (kind) {
      case BaselineKind::page_hinkley: alarm = ph.update(signal[i]); break;
      case BaselineKind::cusum: alarm = cusum.update(signal[i]); break;
      case BaselineKind::ddm: alarm = ddm.update(signal[i] < 0.5) == DdmLevel::drift; break;
      case BaselineKind::stepd: alarm = stepd.update(signal[i] < 0.5); break;
      case BaselineKind::adwin: alarm = adwin.update(signal[i]); break;
    }
    if (alarm && i >= split) ++incoming_alarms;
  }

  DriftVerdict verdict;
  verdict.retrain = incoming_alarms > 0;
  verdict.utility = d1.rows() == 0 ? 0.0
                                   : static_cast<double>(incoming_alarms) /
                                         static_cast<double>(d1.rows());
  verdict.threshold_used = 0.0;
  verdict.detector_name = baseline_name(kind);
  return verdict;
}

}  // namespace driftbench
