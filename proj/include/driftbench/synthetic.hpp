#pragma once

// Synthetic drift generator: Gaussian mixtures with one component per class
// and unit within-class std, plus a controlled perturbation per drift kind.
// Class means sit on seeded random directions rescaled to a target pairwise
// separation; purely axis-aligned or uncontrolled-random layouts make tree
// ensembles agree too well (or too variably) to exercise the detectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/rng.hpp"

namespace driftbench {

enum class DriftKind { none, covariate, prior_probability, concept_shift, dataset_shift, new_class };

inline const char* drift_kind_name(DriftKind kind) {
  switch (kind) {
    case DriftKind::none: return "none";
    case DriftKind::covariate: return "covariate";
    case DriftKind::prior_probability: return "prior_probability";
    case DriftKind::concept_shift: return "concept";
    case DriftKind::dataset_shift: return "dataset";
    case DriftKind::new_class: return "new_class";
  }
  throw std::logic_error("drift_kind_name: unknown kind");
}

inline DriftKind parse_drift_kind(const std::string& name) {
  if (name == "none") return DriftKind::none;
  if (name == "covariate") return DriftKind::covariate;
  if (name == "prior_probability") return DriftKind::prior_probability;
  if (name == "concept") return DriftKind::concept_shift;
  if (name == "dataset") return DriftKind::dataset_shift;
  if (name == "new_class") return DriftKind::new_class;
  throw std::invalid_argument("unknown drift kind '" + name + "'");
}

struct SyntheticDriftScenario {
  DriftKind kind = DriftKind::none;
  double magnitude = 0.0;       // mean shift in within-class std units, or label-flip fraction
  int class_count = 3;
  int feature_count = 6;
  int samples_per_batch = 500;
  double class_separation = 8.0;  // approximate distance between component means
  std::uint64_t rng_seed = 1;
};

namespace detail {

// Seeded unit directions scaled to ~separation pairwise distance, with
// rejection so no two components land closer than 0.85 * separation.
inline std::vector<std::vector<double>> mixture_means(int class_count, int feature_count,
                                                      double separation, std::uint64_t seed) {
  auto rng = make_rng(seed, 0xda7a);
  std::normal_distribution<double> dir(0.0, 1.0);
  const double scale = separation / std::sqrt(2.0);
  const double min_dist = 0.85 * separation;
  std::vector<std::vector<double>> means;
  means.reserve(class_count);
  while (static_cast<int>(means.size()) < class_count) {
    std::vector<double> m(feature_count);
    double norm = 0.0;
    for (double& v : m) {
      v = dir(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (double& v : m) v = v / norm * scale;
    bool ok = true;
    for (const auto& other : means) {
      double d2 = 0.0;
      for (int f = 0; f < feature_count; ++f) d2 += (m[f] - other[f]) * (m[f] - other[f]);
      if (std::sqrt(d2) < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) means.push_back(std::move(m));
  }
  return means;
}

// Largest-remainder apportionment of `total` rows across `weights`.
inline std::vector<int> apportion_rows(int total, const std::vector<double>& weights) {
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double exact = total * weights[c] / weight_sum;
    counts[c] = static_cast<int>(exact);
    assigned += counts[c];
    remainders.emplace_back(exact - counts[c], c);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; i < total - assigned; ++i) counts[remainders[i].second] += 1;
  return counts;
}

// Draws `counts[c]` rows around means[c] with the given within-class std,
// then shuffles the row order.
inline LabeledBatch sample_mixture(const std::vector<std::vector<double>>& means,
                                   const std::vector<int>& counts, double within_std,
                                   std::mt19937_64& rng) {
  const int dims = static_cast<int>(means.front().size());
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  LabeledBatch batch;
  batch.features = FeatureMatrix(total, dims);
  std::vector<int> labels(total);
  std::normal_distribution<double> noise(0.0, within_std);
  std::size_t r = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (int i = 0; i < counts[c]; ++i, ++r) {
      for (int d = 0; d < dims; ++d) batch.features.at(r, d) = means[c][d] + noise(rng);
      labels[r] = static_cast<int>(c);
    }
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  batch.labels = std::move(labels);
  return subset_rows(batch, order);
}

// Covariate deformation field. Components 0 and 1 slide toward each other at
// the magnitude rate, so their contested boundary region grows while the
// labels keep their meaning; the same two ride a gentle all-ones diagonal
// and every remaining component rides a strong opposite diagonal, so the
// pooled marginal visibly translates and disperses as well. A rigid slide of
// the whole mixture would be invisible to translation-equivariant learners;
// opposed motion changes both the relative geometry and the marginals.
inline std::vector<std::vector<double>> covariate_deformation(
    const std::vector<std::vector<double>>& means, double magnitude) {
  constexpr double pair_diag_rate = 0.25;
  constexpr double lone_diag_rate = 2.5;
  auto shifted = means;
  const std::size_t dims = means.front().size();
  for (std::size_t c = 0; c < shifted.size(); ++c) {
    const double diag = (c < 2 ? pair_diag_rate : -lone_diag_rate) * magnitude;
    for (double& v : shifted[c]) v += diag;
  }
  for (std::size_t c = 0; c < 2 && c < shifted.size(); ++c) {
    const auto& from = means[c];
    const auto& to = means[c ^ 1];
    double norm = 0.0;
    for (std::size_t f = 0; f < dims; ++f) norm += (to[f] - from[f]) * (to[f] - from[f]);
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (std::size_t f = 0; f < dims; ++f) {
      shifted[c][f] += magnitude * (to[f] - from[f]) / norm;
    }
  }
  return shifted;
}

}  // namespace detail

// Builds the reference batch and one post-change batch for the requested
// drift kind. Both batches carry ground-truth labels; detectors must not look
// at d1's labels, they exist for scoring.
inline std::pair<LabeledBatch, LabeledBatch> generate_synthetic(
    const SyntheticDriftScenario& scenario) {
  if (scenario.magnitude < 0.0) {
    throw std::invalid_argument("generate_synthetic: magnitude must be >= 0");
  }
  if (scenario.kind == DriftKind::concept_shift && scenario.magnitude > 1.0) {
    throw std::invalid_argument("generate_synthetic: label-flip fraction must be <= 1");
  }
  if (scenario.class_count < 2) {
    throw std::invalid_argument("generate_synthetic: need at least 2 classes");
  }
  if (scenario.feature_count < 1) {
    throw std::invalid_argument("generate_synthetic: need at least 1 feature");
  }
  if (scenario.samples_per_batch < 2 * scenario.class_count) {
    throw std::invalid_argument("generate_synthetic: need at least 2 samples per class");
  }

  const auto means = detail::mixture_means(scenario.class_count, scenario.feature_count,
                                           scenario.class_separation, scenario.rng_seed);
  const std::vector<double> uniform(scenario.class_count, 1.0);
  const auto base_counts = detail::apportion_rows(scenario.samples_per_batch, uniform);

  auto rng0 = make_rng(scenario.rng_seed, 0xd0);
  LabeledBatch d0 = detail::sample_mixture(means, base_counts, 1.0, rng0);

  auto rng1 = make_rng(scenario.rng_seed, 0xd1);
  LabeledBatch d1;
  switch (scenario.kind) {
    case DriftKind::none: {
      d1 = detail::sample_mixture(means, base_counts, 1.0, rng1);
      break;
    }
    case DriftKind::covariate: {
      d1 = detail::sample_mixture(detail::covariate_deformation(means, scenario.magnitude),
                                  base_counts, 1.0, rng1);
      break;
    }
    case DriftKind::prior_probability: {
      std::vector<double> weights(scenario.class_count);
      for (int c = 0; c < scenario.class_count; ++c) {
        weights[c] = std::pow(1.0 + scenario.magnitude, c);
      }
      d1 = detail::sample_mixture(means, detail::apportion_rows(scenario.samples_per_batch, weights),
                                  1.0, rng1);
      break;
    }
    case DriftKind::concept_shift:
    case DriftKind::dataset_shift: {
      auto source_means = means;
      if (scenario.kind == DriftKind::dataset_shift) {
        source_means = detail::covariate_deformation(means, scenario.magnitude);
      }
      d1 = detail::sample_mixture(source_means, base_counts, 1.0, rng1);
      // Remap a fraction of labels by a fixed rotation; features stay tied to
      // the original component, so P(X) is untouched while P(y|X) moves.
      const double fraction = std::min(1.0, scenario.magnitude);
      const auto flips = static_cast<std::size_t>(std::lround(fraction * d1.rows()));
      std::vector<std::size_t> order(d1.rows());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng1);
      for (std::size_t i = 0; i < flips; ++i) {
        int& label = (*d1.labels)[order[i]];
        label = (label + 1) % scenario.class_count;
      }
      break;
    }
    case DriftKind::new_class: {
      // Half the batch is an unseen class: two wide clouds (std 2) centered
      // on the midpoints of base pairs (0,1) and (0,2). The deployed model
      // carves that region between its own classes, so the clouds straddle
      // contested boundaries and no relabeling of old components explains
      // them; a single tight midpoint cluster would be trivially separable.
      const int arrival_rows = scenario.samples_per_batch / 2;
      d1 = detail::sample_mixture(
          means, detail::apportion_rows(scenario.samples_per_batch - arrival_rows, uniform), 1.0,
          rng1);
      const int partner = scenario.class_count >= 3 ? 2 : 1;
      LabeledBatch arrivals;
      arrivals.features = FeatureMatrix(arrival_rows, scenario.feature_count);
      std::normal_distribution<double> spread(0.0, 2.0);
      for (int r = 0; r < arrival_rows; ++r) {
        const auto& pair_mean = means[r % 2 == 0 ? 1 : partner];
        for (int f = 0; f < scenario.feature_count; ++f) {
          arrivals.features.at(r, f) = 0.5 * (means[0][f] + pair_mean[f]) + spread(rng1);
        }
      }
      arrivals.labels = std::vector<int>(arrival_rows, scenario.class_count);
      d1 = concat_batches(d1, arrivals);
      std::vector<std::size_t> order(d1.rows());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng1);
      d1 = subset_rows(d1, order);
      break;
    }
  }
  d0.batch_id = 0;
  d1.batch_id = 1;
  return {std::move(d0), std::move(d1)};
}

// Source pool for the 32-batch fingerprinting protocol. Classes 0-2 are the
// deployment-time classes on separated directions within the first
// `base_dims` features. Classes 3..class_count-1 are later arrivals: each is
// a cloud over the junction (centroid) of the three base classes, lifted
// along its own dedicated feature axis. At introduction time the deployed
// model has never split that axis, so the lifted cloud projects onto the
// most contested region of the base space (detectable); once folded into
// the reference one axis split isolates it cleanly, so later batches score
// normally no matter how many arrivals have accumulated.
struct FingerprintingSourceSpec {
  int class_count = 13;
  int rows_per_class = 1000;
  int base_dims = 6;
  double class_separation = 5.0;
  double lift_height = 16.0;
  double arrival_std = 2.0;  // within-class std of the later-arrival clouds
  std::uint64_t rng_seed = 1;
};

inline LabeledBatch make_fingerprinting_source(const FingerprintingSourceSpec& spec) {
  if (spec.class_count < 4) {
    throw std::invalid_argument("make_fingerprinting_source: need at least 4 classes");
  }
  if (spec.rows_per_class < 2) {
    throw std::invalid_argument("make_fingerprinting_source: need at least 2 rows per class");
  }
  const int arrivals = spec.class_count - 3;
  const int dims = spec.base_dims + arrivals;
  const auto base = detail::mixture_means(3, spec.base_dims, spec.class_separation,
                                          spec.rng_seed);

  LabeledBatch source;
  source.features = FeatureMatrix(static_cast<std::size_t>(spec.class_count) * spec.rows_per_class,
                                  dims);
  std::vector<int> labels(source.rows());
  auto rng = make_rng(spec.rng_seed, 0xf1f0);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::size_t r = 0;
  for (int c = 0; c < spec.class_count; ++c) {
    for (int i = 0; i < spec.rows_per_class; ++i, ++r) {
      labels[r] = c;
      double* row = source.features.row(r);
      if (c < 3) {
        for (int d = 0; d < dims; ++d) {
          row[d] = (d < spec.base_dims ? base[c][d] : 0.0) + unit(rng);
        }
      } else {
        for (int d = 0; d < dims; ++d) {
          double center = d < spec.base_dims
                              ? (base[0][d] + base[1][d] + base[2][d]) / 3.0
                              : 0.0;
          if (d == spec.base_dims + (c - 3)) center = spec.lift_height;
          row[d] = center + spec.arrival_std * unit(rng);
        }
      }
    }
  }
  source.labels = std::move(labels);
  return source;
}

// Source pool for the 9-batch flattened-series protocol: every class is a
// smooth low-frequency curve over `series_length` points, rescaled to a
// target pairwise separation, with unit white noise per sample.
struct LinksSourceSpec {
  int class_count = 7;        // class 0 is the normal class
  int rows_per_class = 1215;  // 7 * 1215 / 9 = 945 rows per protocol batch
  int series_length = 300;
  double class_separation = 8.0;
  std::uint64_t rng_seed = 1;
};

inline LabeledBatch make_links_source(const LinksSourceSpec& spec) {
  if (spec.class_count < 5) {
    throw std::invalid_argument("make_links_source: need at least 5 classes");
  }
  if (spec.series_length < 2) {
    throw std::invalid_argument("make_links_source: series too short");
  }
  auto rng = make_rng(spec.rng_seed, 0x115);
  std::normal_distribution<double> coeff(0.0, 1.0);
  const double scale = spec.class_separation / std::sqrt(2.0);
  const double min_dist = 0.85 * spec.class_separation;

  std::vector<std::vector<double>> curves;
  curves.reserve(spec.class_count);
  while (static_cast<int>(curves.size()) < spec.class_count) {
    double a[3], phase[3];
    for (int h = 0; h < 3; ++h) {
      a[h] = coeff(rng);
      phase[h] = coeff(rng) * 3.141592653589793;
    }
    std::vector<double> curve(spec.series_length);
    double norm = 0.0;
    for (int t = 0; t < spec.series_length; ++t) {
      double v = 0.0;
      for (int h = 0; h < 3; ++h) {
        v += a[h] * std::sin(2.0 * 3.141592653589793 * (h + 1) * t / spec.series_length + phase[h]);
      }
      curve[t] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (double& v : curve) v = v / norm * scale;
    bool ok = true;
    for (const auto& other : curves) {
      double d2 = 0.0;
      for (int t = 0; t < spec.series_length; ++t) d2 += (curve[t] - other[t]) * (curve[t] - other[t]);
      if (std::sqrt(d2) < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) curves.push_back(std::move(curve));
  }

  LabeledBatch source;
  source.features = FeatureMatrix(static_cast<std::size_t>(spec.class_count) * spec.rows_per_class,
                                  spec.series_length);
  std::vector<int> labels(source.rows());
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t r = 0;
  for (int c = 0; c < spec.class_count; ++c) {
    for (int i = 0; i < spec.rows_per_class; ++i, ++r) {
      labels[r] = c;
      double* row = source.features.row(r);
      for (int t = 0; t < spec.series_length; ++t) row[t] = curves[c][t] + noise(rng);
    }
  }
  source.labels = std::move(labels);
  return source;
}

}  // namespace driftbench
