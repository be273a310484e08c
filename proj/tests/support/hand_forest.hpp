#pragma once

// Hand-built forests with exactly controlled votes, so confidence-dependent
// logic can be tested against known vote fractions.

#include <vector>

#include "driftbench/tree.hpp"

namespace testsupport {

// A depth-2 lookup tree over feature 0 in {0,1,2,3}: bucket_classes[i] is the
// predicted class for rows whose feature 0 rounds to i.
inline driftbench::DecisionTree lookup_tree(const std::vector<int>& bucket_classes) {
  driftbench::DecisionTree tree;
  tree.nodes.resize(7);
  tree.nodes[0].feature = 0;
  tree.nodes[0].threshold = 1.5;
  tree.nodes[0].left = 1;
  tree.nodes[0].right = 4;
  tree.nodes[1].feature = 0;
  tree.nodes[1].threshold = 0.5;
  tree.nodes[1].left = 2;
  tree.nodes[1].right = 3;
  tree.nodes[2].leaf_class = bucket_classes[0];
  tree.nodes[3].leaf_class = bucket_classes[1];
  tree.nodes[4].feature = 0;
  tree.nodes[4].threshold = 2.5;
  tree.nodes[4].left = 5;
  tree.nodes[4].right = 6;
  tree.nodes[5].leaf_class = bucket_classes[2];
  tree.nodes[6].leaf_class = bucket_classes[3];
  return tree;
}

// Builds a forest whose per-row votes over 4 one-feature rows {0,1,2,3} are
// given column-wise: votes[t][i] is tree t's class for row i.
inline driftbench::RandomForest hand_forest(const std::vector<std::vector<int>>& votes,
                                            int class_count) {
  driftbench::RandomForest forest;
  forest.tree_count = int(votes.size());
  forest.class_count = class_count;
  forest.feature_count = 1;
  forest.trained_rows = 4;
  for (const auto& v : votes) {
    forest.trees.push_back(lookup_tree(v));
    forest.in_bag.emplace_back(4, std::uint8_t{1});
  }
  return forest;
}

// Rows 0..3 with feature 0 = 0,1,2,3.
inline driftbench::LabeledBatch four_bucket_rows() {
  driftbench::LabeledBatch batch;
  batch.features = driftbench::FeatureMatrix(4, 1);
  for (int r = 0; r < 4; ++r) batch.features.at(r, 0) = r;
  return batch;
}

}  // namespace testsupport
