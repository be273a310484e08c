#include <algorithm>
#include <cmath>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "driftbench/synthetic.hpp"
#include "driftbench/tree.hpp"

using namespace driftbench;

namespace {

std::vector<double> feature_means(const LabeledBatch& batch) {
  std::vector<double> means(batch.cols(), 0.0);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t c = 0; c < batch.cols(); ++c) means[c] += batch.features.at(r, c);
  }
  for (double& m : means) m /= static_cast<double>(batch.rows());
  return means;
}

std::vector<double> class_feature_means(const LabeledBatch& batch, int label) {
  std::vector<double> means(batch.cols(), 0.0);
  std::size_t rows = 0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    if ((*batch.labels)[r] != label) continue;
    ++rows;
    for (std::size_t c = 0; c < batch.cols(); ++c) means[c] += batch.features.at(r, c);
  }
  REQUIRE(rows > 0);
  for (double& m : means) m /= static_cast<double>(rows);
  return means;
}

std::vector<int> class_histogram(const LabeledBatch& batch) {
  std::vector<int> counts(class_count_of(batch), 0);
  for (int label : *batch.labels) counts[label] += 1;
  return counts;
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic), used as an independent
// check that a generator left a marginal distribution alone.
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    p += sign * 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    sign = -sign;
  }
  return std::clamp(p, 0.0, 1.0);
}

double forest_accuracy(const RandomForest& m0, const LabeledBatch& batch) {
  const auto pred = predict_with_confidence(m0, batch);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    if (pred.classes[r] == (*batch.labels)[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.rows());
}

}  // namespace

TEST_CASE("no-drift scenario draws two matching batches") {
  for (std::uint64_t seed : {1, 2, 3}) {
    SyntheticDriftScenario scenario;
    scenario.kind = DriftKind::none;
    scenario.rng_seed = seed;
    const auto [d0, d1] = generate_synthetic(scenario);

    REQUIRE(validate_batch(d0).empty());
    REQUIRE(validate_batch(d1).empty());
    REQUIRE(d0.rows() == 500);
    REQUIRE(d1.rows() == 500);
    REQUIRE(class_count_of(d0) == 3);
    REQUIRE(class_count_of(d1) == 3);

    const auto m0 = feature_means(d0);
    const auto m1 = feature_means(d1);
    for (std::size_t f = 0; f < m0.size(); ++f) {
      REQUIRE(std::abs(m1[f] - m0[f]) < 0.2);
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::new_class;
  scenario.rng_seed = 9;
  const auto first = generate_synthetic(scenario);
  const auto second = generate_synthetic(scenario);
  REQUIRE(first.first.features.values == second.first.features.values);
  REQUIRE(first.second.features.values == second.second.features.values);
  REQUIRE(*first.second.labels == *second.second.labels);

  scenario.rng_seed = 10;
  const auto third = generate_synthetic(scenario);
  REQUIRE(first.first.features.values != third.first.features.values);
}

TEST_CASE("covariate scenario deforms the mixture at the requested magnitude") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::covariate;
  scenario.magnitude = 3.0;
  scenario.rng_seed = 4;
  const auto [d0, d1] = generate_synthetic(scenario);

  const auto b0 = class_feature_means(d0, 0);
  const auto b1 = class_feature_means(d0, 1);
  const auto b2 = class_feature_means(d0, 2);
  const auto a0 = class_feature_means(d1, 0);
  const auto a1 = class_feature_means(d1, 1);
  const auto a2 = class_feature_means(d1, 2);

  // Classes 0 and 1 approach each other by the magnitude from each side; the
  // approach cancels in their midpoint, which only rides the gentle diagonal.
  double before_gap = 0.0, after_gap = 0.0;
  for (std::size_t f = 0; f < b0.size(); ++f) {
    before_gap += (b1[f] - b0[f]) * (b1[f] - b0[f]);
    after_gap += (a1[f] - a0[f]) * (a1[f] - a0[f]);
    REQUIRE(std::abs(0.5 * (a0[f] + a1[f]) - 0.5 * (b0[f] + b1[f]) - 0.25 * 3.0) < 0.4);
  }
  REQUIRE(std::abs(std::sqrt(after_gap) - (std::sqrt(before_gap) - 2.0 * 3.0)) < 0.4);

  // The remaining class rides the strong opposite diagonal on every feature.
  for (std::size_t f = 0; f < b2.size(); ++f) {
    REQUIRE(std::abs((a2[f] - b2[f]) + 2.5 * 3.0) < 0.4);
  }

  // Labels keep their meaning: same class inventory on both sides.
  REQUIRE(class_count_of(d1) == class_count_of(d0));
}

TEST_CASE("prior scenario reweights class proportions without moving features") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::prior_probability;
  scenario.magnitude = 2.0;
  scenario.rng_seed = 5;
  const auto [d0, d1] = generate_synthetic(scenario);

  const auto before = class_histogram(d0);
  const auto after = class_histogram(d1);
  REQUIRE(before.size() == after.size());
  REQUIRE(std::abs(before[0] - before[2]) <= 1);  // balanced reference
  REQUIRE(after[0] < after[1]);
  REQUIRE(after[1] < after[2]);
  REQUIRE(after[2] > 3 * after[0]);
}

TEST_CASE("concept scenario rewires labels while leaving the features alone") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::concept_shift;
  scenario.magnitude = 1.0;
  scenario.rng_seed = 6;
  const auto [d0, d1] = generate_synthetic(scenario);

  for (std::size_t f = 0; f < d0.cols(); ++f) {
    std::vector<double> col0, col1;
    for (std::size_t r = 0; r < d0.rows(); ++r) col0.push_back(d0.features.at(r, f));
    for (std::size_t r = 0; r < d1.rows(); ++r) col1.push_back(d1.features.at(r, f));
    REQUIRE(ks_p_value(col0, col1) > 0.01);
  }

  const auto m0 = fit_random_forest(d0, 50, 16, scenario.rng_seed);
  REQUIRE(forest_accuracy(m0, d1) < 0.1);  // every label rotated one class over

  auto half = scenario;
  half.magnitude = 0.5;
  const auto [h0, h1] = generate_synthetic(half);
  const auto mh = fit_random_forest(h0, 50, 16, half.rng_seed);
  const double acc = forest_accuracy(mh, h1);
  REQUIRE(acc > 0.4);
  REQUIRE(acc < 0.6);
}

TEST_CASE("dataset scenario combines the covariate and label effects") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::dataset_shift;
  scenario.magnitude = 1.0;
  scenario.rng_seed = 7;
  const auto [d0, d1] = generate_synthetic(scenario);

  // At label-flip fraction 1 every component's rows carry the next label, so
  // rows labeled y came from component (y - 1 mod k), whose mean moved by the
  // covariate deformation of that component.
  const auto before0 = class_feature_means(d0, 0);
  const auto before1 = class_feature_means(d0, 1);
  const auto before2 = class_feature_means(d0, 2);
  const auto from0 = class_feature_means(d1, 1);  // component 0 now labeled 1
  const auto from1 = class_feature_means(d1, 2);
  const auto from2 = class_feature_means(d1, 0);
  for (std::size_t f = 0; f < before0.size(); ++f) {
    // Pair midpoint rides the gentle diagonal, the lone class the strong one.
    REQUIRE(std::abs(0.5 * (from0[f] + from1[f]) - 0.5 * (before0[f] + before1[f]) - 0.25) < 0.4);
    REQUIRE(std::abs((from2[f] - before2[f]) + 2.5) < 0.4);
  }
  const auto forest = fit_random_forest(d0, 50, 16, scenario.rng_seed);
  REQUIRE(forest_accuracy(forest, d1) < 0.15);  // far below the 1/3 chance level
}

TEST_CASE("new-class scenario adds one wide unseen class over old boundaries") {
  SyntheticDriftScenario scenario;
  scenario.kind = DriftKind::new_class;
  scenario.magnitude = 0.0;
  scenario.rng_seed = 8;
  const auto [d0, d1] = generate_synthetic(scenario);

  REQUIRE(class_count_of(d0) == 3);
  REQUIRE(class_count_of(d1) == 4);
  const auto counts = class_histogram(d1);
  REQUIRE(counts[3] == 250);  // new class carries exactly half the batch

  // The new class spans the midpoints of base pairs (0,1) and (0,2), so its
  // mean lands at the average of those midpoints and its spread is wider
  // than the unit-noise base classes.
  const auto means = detail::mixture_means(3, scenario.feature_count, scenario.class_separation,
                                           scenario.rng_seed);
  std::vector<double> new_mean(d1.cols(), 0.0);
  for (std::size_t r = 0; r < d1.rows(); ++r) {
    if ((*d1.labels)[r] != 3) continue;
    for (std::size_t f = 0; f < d1.cols(); ++f) new_mean[f] += d1.features.at(r, f) / counts[3];
  }
  double center_gap2 = 0.0;
  double scatter2 = 0.0;
  for (std::size_t f = 0; f < d1.cols(); ++f) {
    const double expected = 0.25 * (2.0 * means[0][f] + means[1][f] + means[2][f]);
    center_gap2 += (new_mean[f] - expected) * (new_mean[f] - expected);
    for (std::size_t r = 0; r < d1.rows(); ++r) {
      if ((*d1.labels)[r] != 3) continue;
      const double dev = d1.features.at(r, f) - new_mean[f];
      scatter2 += dev * dev / (counts[3] * static_cast<double>(d1.cols()));
    }
  }
  REQUIRE(std::sqrt(center_gap2) < 1.0);
  REQUIRE(std::sqrt(scatter2) > 1.5);  // two sigma-2 clouds, not one tight cluster

  // Still clearly inside the old classes' footprint rather than off to the
  // side: nearer to the first base mean than the base means are to each other.
  double to_base2 = 0.0;
  for (std::size_t f = 0; f < d1.cols(); ++f) {
    to_base2 += (new_mean[f] - means[0][f]) * (new_mean[f] - means[0][f]);
  }
  REQUIRE(std::sqrt(to_base2) < 0.6 * scenario.class_separation);
}

TEST_CASE("scenario validation") {
  SyntheticDriftScenario scenario;
  scenario.magnitude = -0.5;
  REQUIRE_THROWS_AS(generate_synthetic(scenario), std::invalid_argument);

  scenario.magnitude = 1.5;
  scenario.kind = DriftKind::concept_shift;
  REQUIRE_THROWS_AS(generate_synthetic(scenario), std::invalid_argument);

  scenario = {};
  scenario.class_count = 1;
  REQUIRE_THROWS_AS(generate_synthetic(scenario), std::invalid_argument);

  scenario = {};
  scenario.samples_per_batch = 4;
  REQUIRE_THROWS_AS(generate_synthetic(scenario), std::invalid_argument);
}

TEST_CASE("drift kind names round-trip") {
  for (DriftKind kind : {DriftKind::none, DriftKind::covariate, DriftKind::prior_probability,
                         DriftKind::concept_shift, DriftKind::dataset_shift, DriftKind::new_class}) {
    REQUIRE(parse_drift_kind(drift_kind_name(kind)) == kind);
  }
  REQUIRE_THROWS_AS(parse_drift_kind("sideways"), std::invalid_argument);
}

TEST_CASE("fingerprinting source layout") {
  FingerprintingSourceSpec spec;
  spec.rows_per_class = 200;
  spec.rng_seed = 2;
  const auto source = make_fingerprinting_source(spec);

  REQUIRE(source.rows() == 13u * 200u);
  REQUIRE(source.cols() == 16u);  // 6 base features + 10 lift axes
  REQUIRE(class_count_of(source) == 13);

  // Later-arrival classes sit high on their own lift axis and flat on the
  // others; deployment-time classes stay flat on all lift axes.
  std::vector<std::vector<double>> class_mean(13, std::vector<double>(source.cols(), 0.0));
  std::vector<int> counts(13, 0);
  for (std::size_t r = 0; r < source.rows(); ++r) {
    const int c = (*source.labels)[r];
    counts[c] += 1;
    for (std::size_t f = 0; f < source.cols(); ++f) class_mean[c][f] += source.features.at(r, f);
  }
  for (int c = 0; c < 13; ++c) {
    REQUIRE(counts[c] == 200);
    for (std::size_t f = 0; f < source.cols(); ++f) class_mean[c][f] /= counts[c];
  }
  for (int c = 3; c < 13; ++c) {
    for (int axis = 0; axis < 10; ++axis) {
      const double m = class_mean[c][6 + axis];
      if (axis == c - 3) {
        REQUIRE(std::abs(m - spec.lift_height) < 1.0);
      } else {
        REQUIRE(std::abs(m) < 1.0);
      }
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (int axis = 0; axis < 10; ++axis) {
      REQUIRE(std::abs(class_mean[c][6 + axis]) < 0.5);
    }
  }

  REQUIRE_THROWS_AS(make_fingerprinting_source({.class_count = 3}), std::invalid_argument);
}

TEST_CASE("links source layout") {
  LinksSourceSpec spec;
  spec.rows_per_class = 45;
  spec.rng_seed = 3;
  const auto source = make_links_source(spec);

  REQUIRE(source.rows() == 7u * 45u);
  REQUIRE(source.cols() == 300u);
  REQUIRE(class_count_of(source) == 7);

  // Per-class mean curves keep the requested pairwise separation.
  std::vector<std::vector<double>> curves(7, std::vector<double>(300, 0.0));
  for (std::size_t r = 0; r < source.rows(); ++r) {
    const int c = (*source.labels)[r];
    for (int t = 0; t < 300; ++t) curves[c][t] += source.features.at(r, t) / spec.rows_per_class;
  }
  for (int a = 0; a < 7; ++a) {
    for (int b = a + 1; b < 7; ++b) {
      double d2 = 0.0;
      for (int t = 0; t < 300; ++t) d2 += (curves[a][t] - curves[b][t]) * (curves[a][t] - curves[b][t]);
      REQUIRE(std::sqrt(d2) > 0.7 * spec.class_separation);
    }
  }

  REQUIRE_THROWS_AS(make_links_source({.class_count = 4}), std::invalid_argument);
}
