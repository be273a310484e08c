#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "driftbench/tree.hpp"
#include "support/blobs.hpp"
#include "support/hand_forest.hpp"

using namespace driftbench;
using testsupport::BlobSpec;
using testsupport::gaussian_blobs;

TEST_CASE("forest reaches macro-F1 1.0 on separable blobs") {
  auto train = gaussian_blobs({.class_count = 2, .rows_per_class = 50, .dims = 4, .spread = 8.0});
  auto forest = fit_random_forest(train, 50, 16, 3);
  auto pred = predict_with_confidence(forest, train);
  REQUIRE(macro_f1(*train.labels, pred.classes, 2) == Catch::Approx(1.0));
}

TEST_CASE("single-class training set predicts that class with confidence 1") {
  auto train = gaussian_blobs({.class_count = 1, .rows_per_class = 30});
  auto forest = fit_random_forest(train, 25, 16, 9);
  auto pred = predict_with_confidence(forest, train);
  for (std::size_t i = 0; i < pred.classes.size(); ++i) {
    REQUIRE(pred.classes[i] == 0);
    REQUIRE(pred.confidences[i] == Catch::Approx(1.0));
  }
}

TEST_CASE("forest training is deterministic given the seed") {
  auto train = gaussian_blobs({.class_count = 3, .rows_per_class = 40, .spread = 3.0});
  auto probe = gaussian_blobs(
      {.class_count = 3, .rows_per_class = 20, .spread = 3.0, .noise_salt = 5});
  auto a = predict_with_confidence(fit_random_forest(train, 30, 16, 7), probe);
  auto b = predict_with_confidence(fit_random_forest(train, 30, 16, 7), probe);
  REQUIRE(a.classes == b.classes);
  REQUIRE(a.confidences == b.confidences);
}

TEST_CASE("confidence equals the winning vote fraction") {
  // 10 trees; row 0 gets 9 votes for class 0, row 1 gets 6 for class 1,
  // row 2 gets 5 for class 2, row 3 splits 5/5 between classes 1 and 2.
  std::vector<std::vector<int>> votes;
  for (int t = 0; t < 10; ++t) {
    votes.push_back({t < 9 ? 0 : 1, t < 6 ? 1 : 0, t < 5 ? 2 : (t < 8 ? 0 : 1),
                     t < 5 ? 1 : 2});
  }
  auto forest = testsupport::hand_forest(votes, 3);
  auto pred = predict_with_confidence(forest, testsupport::four_bucket_rows());
  REQUIRE(pred.classes == std::vector<int>{0, 1, 2, 1});  // 5/5 tie keeps lowest id
  REQUIRE(pred.confidences[0] == Catch::Approx(0.9));
  REQUIRE(pred.confidences[1] == Catch::Approx(0.6));
  REQUIRE(pred.confidences[2] == Catch::Approx(0.5));
  REQUIRE(pred.confidences[3] == Catch::Approx(0.5));
}

TEST_CASE("confidence drops on a shifted distribution") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    BlobSpec base{.class_count = 3, .rows_per_class = 60, .dims = 4, .spread = 6.0, .seed = seed};
    auto train = gaussian_blobs(base);
    auto forest = fit_random_forest(train, 40, 16, seed);

    BlobSpec fresh = base;
    fresh.noise_salt = 1;
    BlobSpec shifted = fresh;
    shifted.shift = 4.0;
    auto in_dist = predict_with_confidence(forest, gaussian_blobs(fresh));
    auto out_dist = predict_with_confidence(forest, gaussian_blobs(shifted));
    double mean_in = 0.0, mean_out = 0.0;
    for (double c : in_dist.confidences) mean_in += c;
    for (double c : out_dist.confidences) mean_out += c;
    mean_in /= double(in_dist.confidences.size());
    mean_out /= double(out_dist.confidences.size());
    INFO("seed " << seed);
    REQUIRE(mean_in > mean_out);
  }
}

TEST_CASE("one-tree forest without randomness equals the plain decision tree") {
  auto train = gaussian_blobs({.class_count = 3, .rows_per_class = 30, .spread = 3.0});
  auto probe =
      gaussian_blobs({.class_count = 3, .rows_per_class = 25, .spread = 3.0, .noise_salt = 2});
  auto forest = fit_random_forest(train, 1, 16, 42, int(train.cols()), /*bootstrap=*/false);
  auto tree = fit_decision_tree(train, 16);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    REQUIRE(forest.trees[0].class_for(probe.features.row(r)) ==
            tree.class_for(probe.features.row(r)));
  }
  auto pred = predict_with_confidence(forest, probe);
  for (double c : pred.confidences) REQUIRE(c == Catch::Approx(1.0));
}

TEST_CASE("out-of-bag confidence stays below the plain training confidence") {
  auto train = gaussian_blobs({.class_count = 3, .rows_per_class = 50, .spread = 2.5});
  auto forest = fit_random_forest(train, 40, 16, 11);
  auto plain = predict_with_confidence(forest, train);
  auto oob = predict_out_of_bag(forest, train);
  double mean_plain = 0.0, mean_oob = 0.0;
  for (double c : plain.confidences) mean_plain += c;
  for (double c : oob.confidences) mean_oob += c;
  REQUIRE(mean_oob / double(train.rows()) <= mean_plain / double(train.rows()));

  LabeledBatch wrong = gaussian_blobs({.class_count = 3, .rows_per_class = 10, .spread = 2.5});
  REQUIRE_THROWS_AS(predict_out_of_bag(forest, wrong), std::invalid_argument);
}

TEST_CASE("fit_random_forest input validation") {
  LabeledBatch unlabeled;
  unlabeled.features = FeatureMatrix(4, 2);
  REQUIRE_THROWS_AS(fit_random_forest(unlabeled), std::invalid_argument);
  LabeledBatch empty;
  empty.labels = std::vector<int>{};
  REQUIRE_THROWS_AS(fit_random_forest(empty), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Boosted ensemble
// ---------------------------------------------------------------------------

TEST_CASE("boosted leaf weights match the closed form -G/(H+lambda)") {
  // 4 samples, 1 feature [0,0,1,1], labels [0,0,1,1], 2 classes. With raw
  // scores 0 every probability is 1/2, so per sample g = 1/2 - 1{y=c} and
  // h = 1/4. The root splits at 0.5; for the class-0 tree the left leaf has
  // G = -1, H = 1/2, giving weight  1/(1/2 + 1) = 2/3 at learning rate 1.
  LabeledBatch train;
  train.features = FeatureMatrix(4, 1);
  train.features.at(0, 0) = 0;
  train.features.at(1, 0) = 0;
  train.features.at(2, 0) = 1;
  train.features.at(3, 0) = 1;
  train.labels = std::vector<int>{0, 0, 1, 1};

  BoostedParams params;
  params.learning_rate = 1.0;
  params.reg_lambda = 1.0;
  params.reg_gamma = 0.0;
  auto ensemble = make_boosted(2, params);
  auto trace = boosted_fit_stages(ensemble, train, 1, train);
  REQUIRE(trace.size() == 1);
  REQUIRE(trace[0] == Catch::Approx(1.0));

  const DecisionTree& tree0 = ensemble.stages[0].class_trees[0];
  REQUIRE(tree0.nodes[0].feature == 0);
  REQUIRE(tree0.nodes[0].threshold == Catch::Approx(0.5));
  const double left = tree0.nodes[tree0.nodes[0].left].leaf_value;
  const double right = tree0.nodes[tree0.nodes[0].right].leaf_value;
  REQUIRE(std::abs(left - 2.0 / 3.0) < 1e-12);
  REQUIRE(std::abs(right - (-2.0 / 3.0)) < 1e-12);

  const DecisionTree& tree1 = ensemble.stages[0].class_trees[1];
  REQUIRE(std::abs(tree1.nodes[tree1.nodes[0].left].leaf_value - (-2.0 / 3.0)) < 1e-12);
  REQUIRE(std::abs(tree1.nodes[tree1.nodes[0].right].leaf_value - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("boosted trace covers every round and converges on separable data") {
  auto train = gaussian_blobs({.class_count = 3, .rows_per_class = 60, .spread = 6.0, .seed = 4});
  auto ensemble = make_boosted(3);
  auto trace = boosted_fit_stages(ensemble, train, 5, train);
  REQUIRE(trace.size() == 5);
  REQUIRE(ensemble.stages.size() == 5);
  REQUIRE(trace.back() >= 0.95);
}

TEST_CASE("warm start on identically distributed data stays near the converged score") {
  auto both = gaussian_blobs({.class_count = 3, .rows_per_class = 120, .spread = 6.0, .seed = 9});
  auto [d0, d1] = testsupport::split_alternating(both);
  auto ensemble = make_boosted(3);
  auto trace0 = boosted_fit_stages(ensemble, d0, 5, d0);
  auto trace1 = boosted_fit_stages(ensemble, d1, 5, d1);
  REQUIRE(ensemble.stages.size() == 10);
  for (double f1 : trace1) {
    REQUIRE(std::abs(f1 - trace0.back()) <= 0.1);
  }
}

TEST_CASE("boosted training objective is non-increasing across rounds") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto train =
        gaussian_blobs({.class_count = 3, .rows_per_class = 50, .spread = 2.0, .seed = seed});
    auto ensemble = make_boosted(3);
    double prev = boosted_objective(ensemble, train);
    for (int round = 0; round < 10; ++round) {
      boosted_fit_stages(ensemble, train, 1, train);
      const double obj = boosted_objective(ensemble, train);
      INFO("seed " << seed << " round " << round);
      REQUIRE(obj <= prev + 1e-9);
      prev = obj;
    }
  }
}

TEST_CASE("boosted rejects invalid input") {
  auto train = gaussian_blobs({.class_count = 2, .rows_per_class = 10});
  auto ensemble = make_boosted(2);
  REQUIRE_THROWS_AS(boosted_fit_stages(ensemble, train, 0, train), std::invalid_argument);
  LabeledBatch unlabeled;
  unlabeled.features = FeatureMatrix(4, train.cols());
  REQUIRE_THROWS_AS(boosted_fit_stages(ensemble, unlabeled, 1, train), std::invalid_argument);

  auto bad = train;
  (*bad.labels)[0] = 7;  // outside the declared class set
  REQUIRE_THROWS_MATCHES(boosted_fit_stages(ensemble, bad, 1, bad), std::invalid_argument,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("unseen class id")));
}

TEST_CASE("single-class boosted ensemble degenerates to a constant predictor") {
  auto train = gaussian_blobs({.class_count = 1, .rows_per_class = 20});
  auto ensemble = make_boosted(1);
  auto trace = boosted_fit_stages(ensemble, train, 3, train);
  for (double f1 : trace) REQUIRE(f1 == Catch::Approx(1.0));
  auto pred = boosted_predict(ensemble, train);
  for (int p : pred) REQUIRE(p == 0);
}
