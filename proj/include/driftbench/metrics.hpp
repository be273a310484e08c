#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftbench {

// Macro-averaged F1 over a declared class set {0, ..., class_count-1}.
// Every declared class contributes to the mean; a class with no true
// positives contributes 0 (this includes classes absent from both vectors).
inline double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted,
                       int class_count) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("macro_f1: truth and prediction lengths differ");
  }
  if (truth.empty()) {
    throw std::invalid_argument("macro_f1: empty input");
  }
  if (class_count <= 0) {
    throw std::invalid_argument("macro_f1: class_count must be positive");
  }
  std::vector<long long> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= class_count || p < 0 || p >= class_count) {
      throw std::invalid_argument("macro_f1: class id outside declared class set at row " +
                                  std::to_string(i));
    }
    if (t == p) {
      ++tp[t];
    } else {
      ++fn[t];
      ++fp[p];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < class_count; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    sum += denom > 0.0 ? (2.0 * static_cast<double>(tp[c])) / denom : 0.0;
  }
  return sum / static_cast<double>(class_count);
}

enum class DecisionCase { kTruePositive, kTrueNegative, kFalsePositive, kFalseNegative };

struct RewardParams {
  double t_s = 0.1;  // stability bonus for a correct "keep the model" decision
};

// Reward of one retrain/keep decision given what the batch really was.
//   true positive  -> the F1 the model gains from retraining
//   true negative  -> t_s (saved an unnecessary retrain)
//   false positive -> f1_gain - t_s (retrained for almost nothing)
//   false negative -> -f1_gain (kept a stale model)
inline double reward(DecisionCase c, double f1_gain, const RewardParams& params = {}) {
  switch (c) {
    case DecisionCase::kTruePositive:
      return f1_gain;
    case DecisionCase::kTrueNegative:
      return params.t_s;
    case DecisionCase::kFalsePositive:
      return f1_gain - params.t_s;
    case DecisionCase::kFalseNegative:
      return -f1_gain;
  }
  throw std::logic_error("reward: unknown decision case");
}

inline DecisionCase classify_decision(bool alarm, bool truth) {
  if (alarm && truth) return DecisionCase::kTruePositive;
  if (!alarm && !truth) return DecisionCase::kTrueNegative;
  if (alarm) return DecisionCase::kFalsePositive;
  return DecisionCase::kFalseNegative;
}

struct AlarmConfusion {
  double tp = 0, tn = 0, fp = 0, fn = 0;  // real-valued so trimmed means stay exact

  double precision() const { return tp + fp > 0 ? tp / (tp + fp) : 0.0; }
  double recall() const { return tp + fn > 0 ? tp / (tp + fn) : 0.0; }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  double total() const { return tp + tn + fp + fn; }
};

// Mean after discarding exactly one maximum and one minimum (one instance
// each, ties resolved by dropping a single instance). Mirrors the repeated-
// runs aggregation used throughout the benchmark.
inline double aggregate_trimmed(const std::vector<double>& values) {
  if (values.size() < 3) {
    throw std::invalid_argument("aggregate_trimmed: need at least 3 values");
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < sorted.size(); ++i) sum += sorted[i];
  return sum / static_cast<double>(sorted.size() - 2);
}

struct SequenceScore {
  double total_reward = 0.0;
  AlarmConfusion confusion;
};

// Sums decision rewards along one sequence. f1_gains[i] is the measured gain
// for batch i (used by the TP/FP/FN cases; ignored for TN).
inline SequenceScore score_sequence(const std::vector<bool>& alarms,
                                    const std::vector<char>& truth,
                                    const std::vector<double>& f1_gains,
                                    const RewardParams& params = {}) {
  if (alarms.size() != truth.size() || alarms.size() != f1_gains.size()) {
    throw std::invalid_argument("score_sequence: input lengths differ");
  }
  SequenceScore score;
  for (std::size_t i = 0; i < alarms.size(); ++i) {
    const DecisionCase c = classify_decision(alarms[i], truth[i] != 0);
    score.total_reward += reward(c, f1_gains[i], params);
    switch (c) {
      case DecisionCase::kTruePositive: score.confusion.tp += 1; break;
      case DecisionCase::kTrueNegative: score.confusion.tn += 1; break;
      case DecisionCase::kFalsePositive: score.confusion.fp += 1; break;
      case DecisionCase::kFalseNegative: score.confusion.fn += 1; break;
    }
  }
  return score;
}

}  // namespace driftbench
