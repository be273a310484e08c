#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/rng.hpp"

namespace driftbench {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // regression output (boosted trees)
  int leaf_class = -1;      // majority class (forest trees)
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(const double* row) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
      i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    }
    return i;
  }
  double value_for(const double* row) const { return nodes[leaf_index(row)].leaf_value; }
  int class_for(const double* row) const { return nodes[leaf_index(row)].leaf_class; }
};

namespace detail {

inline double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

inline int majority_class(const std::vector<std::size_t>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = static_cast<int>(c);  // tie keeps lowest id
  }
  return best;
}

// Recursive exact-greedy Gini tree over the index set [begin, end) of `order`.
// `feature_pool` is shuffled per node when a strict subset is requested.
struct GiniTreeBuilder {
  const FeatureMatrix* x = nullptr;
  const std::vector<int>* y = nullptr;
  int class_count = 0;
  int max_depth = 0;
  int features_per_split = 0;
  std::mt19937_64* rng = nullptr;
  DecisionTree* tree = nullptr;

  int build(std::vector<std::size_t>& indices, int depth) {
    std::vector<std::size_t> counts(class_count, 0);
    for (std::size_t i : indices) ++counts[(*y)[i]];
    const double node_gini = gini(counts, indices.size());

    const int node_id = static_cast<int>(tree->nodes.size());
    tree->nodes.emplace_back();

    const bool pure = node_gini <= 0.0;
    if (pure || depth >= max_depth || indices.size() < 2) {
      tree->nodes[node_id].leaf_class = majority_class(counts);
      return node_id;
    }

    std::vector<int> pool(static_cast<int>(x->cols));
    std::iota(pool.begin(), pool.end(), 0);
    int candidates = features_per_split;
    if (candidates < static_cast<int>(x->cols)) {
      for (int k = 0; k < candidates; ++k) {
        std::uniform_int_distribution<int> pick(k, static_cast<int>(pool.size()) - 1);
        std::swap(pool[k], pool[pick(*rng)]);
      }
    } else {
      candidates = static_cast<int>(x->cols);
    }

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = indices;
    for (int k = 0; k < candidates; ++k) {
      const int f = pool[k];
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        const double va = x->at(a, f), vb = x->at(b, f);
        return va != vb ? va < vb : a < b;
      });
      std::vector<std::size_t> left_counts(class_count, 0);
      const double total = static_cast<double>(indices.size());
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        ++left_counts[(*y)[sorted[i]]];
        const double v = x->at(sorted[i], f);
        const double v_next = x->at(sorted[i + 1], f);
        if (v_next <= v) continue;
        std::vector<std::size_t> right_counts(class_count, 0);
        for (int c = 0; c < class_count; ++c) right_counts[c] = counts[c] - left_counts[c];
        const std::size_t n_left = i + 1;
        const std::size_t n_right = indices.size() - n_left;
        const double child =
            (static_cast<double>(n_left) * gini(left_counts, n_left) +
             static_cast<double>(n_right) * gini(right_counts, n_right)) /
            total;
        const double gain = node_gini - child;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (v + v_next);
        }
      }
    }

    if (best_feature < 0) {
      tree->nodes[node_id].leaf_class = majority_class(counts);
      return node_id;
    }

    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (std::size_t i : indices) {
      (x->at(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    indices.clear();
    indices.shrink_to_fit();

    tree->nodes[node_id].feature = best_feature;
    tree->nodes[node_id].threshold = best_threshold;
    const int left_id = build(left_idx, depth + 1);
    tree->nodes[node_id].left = left_id;
    const int right_id = build(right_idx, depth + 1);
    tree->nodes[node_id].right = right_id;
    return node_id;
  }
};

}  // namespace detail

// Single deterministic Gini tree on all rows with every feature considered at
// every split. The forest degenerates to this when randomness is disabled.
inline DecisionTree fit_decision_tree(const LabeledBatch& train, int max_depth = 16,
                                      int class_count = 0) {
  if (!train.has_labels()) throw std::invalid_argument("fit_decision_tree: train batch unlabeled");
  if (train.rows() == 0) throw std::invalid_argument("fit_decision_tree: empty train batch");
  if (class_count <= 0) class_count = class_count_of(train);
  DecisionTree tree;
  std::mt19937_64 rng(0);
  detail::GiniTreeBuilder builder{&train.features, &*train.labels, class_count,
                                  max_depth,       static_cast<int>(train.cols()),
                                  &rng,            &tree};
  std::vector<std::size_t> indices(train.rows());
  std::iota(indices.begin(), indices.end(), 0);
  builder.build(indices, 0);
  return tree;
}

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::vector<std::vector<std::uint8_t>> in_bag;  // per tree: was training row bootstrapped in?
  int tree_count = 0;
  int features_per_split = 0;
  int max_depth = 0;
  int class_count = 0;
  std::size_t feature_count = 0;
  std::size_t trained_rows = 0;
  std::uint64_t rng_seed = 0;
};

inline RandomForest fit_random_forest(const LabeledBatch& train, int tree_count = 100,
                                      int max_depth = 16, std::uint64_t rng_seed = 0,
                                      int features_per_split = 0, bool bootstrap = true) {
  if (!train.has_labels()) throw std::invalid_argument("fit_random_forest: train batch unlabeled");
  if (train.rows() == 0) throw std::invalid_argument("fit_random_forest: empty train batch");
  if (tree_count <= 0) throw std::invalid_argument("fit_random_forest: tree_count must be positive");
  RandomForest forest;
  forest.tree_count = tree_count;
  forest.max_depth = max_depth;
  forest.class_count = class_count_of(train);
  forest.feature_count = train.cols();
  forest.trained_rows = train.rows();
  forest.rng_seed = rng_seed;
  forest.features_per_split =
      features_per_split > 0
          ? features_per_split
          : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(train.cols())))));
  forest.trees.reserve(tree_count);
  forest.in_bag.reserve(tree_count);

  const std::size_t n = train.rows();
  for (int t = 0; t < tree_count; ++t) {
    auto rng = make_rng(rng_seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> indices;
    std::vector<std::uint8_t> bag(n, 0);
    indices.reserve(n);
    if (bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = pick(rng);
        indices.push_back(j);
        bag[j] = 1;
      }
      std::sort(indices.begin(), indices.end());
    } else {
      indices.resize(n);
      std::iota(indices.begin(), indices.end(), 0);
      std::fill(bag.begin(), bag.end(), 1);
    }
    DecisionTree tree;
    detail::GiniTreeBuilder builder{&train.features,          &*train.labels, forest.class_count,
                                    max_depth,                forest.features_per_split,
                                    &rng,                     &tree};
    builder.build(indices, 0);
    forest.trees.push_back(std::move(tree));
    forest.in_bag.push_back(std::move(bag));
  }
  return forest;
}

struct PredictionBatch {
  std::vector<int> classes;
  std::vector<double> confidences;  // winning vote fraction, in (0, 1]
};

inline int forest_vote(const RandomForest& forest, const double* row, int* votes_out = nullptr) {
  std::vector<int> votes(forest.class_count, 0);
  for (const auto& tree : forest.trees) ++votes[tree.class_for(row)];
  int best = 0;
  for (int c = 1; c < forest.class_count; ++c) {
    if (votes[c] > votes[best]) best = c;  // tie keeps lowest id
  }
  if (votes_out) *votes_out = votes[best];
  return best;
}

inline PredictionBatch predict_with_confidence(const RandomForest& forest,
                                               const LabeledBatch& batch) {
  if (batch.cols() != forest.feature_count) {
    throw std::invalid_argument("predict_with_confidence: feature count mismatch");
  }
  PredictionBatch out;
  out.classes.resize(batch.rows());
  out.confidences.resize(batch.rows());
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    int winner_votes = 0;
    out.classes[r] = forest_vote(forest, batch.features.row(r), &winner_votes);
    out.confidences[r] = static_cast<double>(winner_votes) / static_cast<double>(forest.tree_count);
  }
  return out;
}

// Confidence for the forest's own training rows using only trees whose
// bootstrap sample excluded the row. Falls back to the full vote when every
// tree saw the row. Keeps reference streams from looking artificially sure.
inline PredictionBatch predict_out_of_bag(const RandomForest& forest, const LabeledBatch& train) {
  if (train.rows() != forest.trained_rows) {
    throw std::invalid_argument("predict_out_of_bag: batch is not the training batch");
  }
  PredictionBatch out;
  out.classes.resize(train.rows());
  out.confidences.resize(train.rows());
  std::vector<int> votes(forest.class_count);
  for (std::size_t r = 0; r < train.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    int total = 0;
    for (int t = 0; t < forest.tree_count; ++t) {
      if (forest.in_bag[t][r]) continue;
      ++votes[forest.trees[t].class_for(train.features.row(r))];
      ++total;
    }
    if (total == 0) {
      int winner_votes = 0;
      out.classes[r] = forest_vote(forest, train.features.row(r), &winner_votes);
      out.confidences[r] =
          static_cast<double>(winner_votes) / static_cast<double>(forest.tree_count);
      continue;
    }
    int best = 0;
    for (int c = 1; c < forest.class_count; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    out.classes[r] = best;
    out.confidences[r] = static_cast<double>(votes[best]) / static_cast<double>(total);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees, softmax cross-entropy objective with the usual
// per-tree penalty gamma*T + (lambda/2)*sum(w^2). One boosting round adds one
// regression tree per class; leaf weights are the Newton step -G/(H+lambda)
// scaled by the learning rate.
// ---------------------------------------------------------------------------

// Defaults are sized for the short five-round traces the drift detectors run:
// shallow trees and a conservative step keep a converged ensemble from
// absorbing a contradictory batch within the first few rounds, which is the
// inertia the utility score measures.
struct BoostedParams {
  double learning_rate = 0.15;
  int max_depth = 3;
  double reg_lambda = 1.0;
  double reg_gamma = 0.0;
};

struct BoostedStage {
  std::vector<DecisionTree> class_trees;  // class_count trees
};

struct BoostedEnsemble {
  std::vector<BoostedStage> stages;
  BoostedParams params;
  int class_count = 0;
  std::size_t feature_count = 0;
};

inline BoostedEnsemble make_boosted(int class_count, const BoostedParams& params = {}) {
  if (class_count <= 0) throw std::invalid_argument("make_boosted: class_count must be positive");
  BoostedEnsemble e;
  e.class_count = class_count;
  e.params = params;
  return e;
}

namespace detail {

// Grows one regression tree on (gradient, hessian) pairs, level by level over
// presorted feature columns. `node_of` carries the row->node assignment.
inline DecisionTree fit_boost_tree(const FeatureMatrix& x,
                                   const std::vector<std::vector<std::uint32_t>>& sorted_cols,
                                   const std::vector<double>& grad,
                                   const std::vector<double>& hess, const BoostedParams& params) {
  const std::size_t n = x.rows;
  DecisionTree tree;
  tree.nodes.emplace_back();

  std::vector<int> node_of(n, 0);
  struct NodeAgg {
    double g = 0, h = 0;
    std::size_t count = 0;
    bool open = true;  // still splittable
  };
  std::vector<NodeAgg> aggs(1);
  for (std::size_t i = 0; i < n; ++i) {
    aggs[0].g += grad[i];
    aggs[0].h += hess[i];
    ++aggs[0].count;
  }

  struct Candidate {
    double gain = 0;
    int feature = -1;
    double threshold = 0;
    double g_left = 0, h_left = 0;
  };
  struct Scan {
    double g = 0, h = 0;
    std::size_t count = 0;
    double last_val = 0;
  };

  const double lambda = params.reg_lambda;
  auto leaf_score = [lambda](double g, double h) { return g * g / (h + lambda); };

  for (int depth = 0; depth < params.max_depth; ++depth) {
    bool any_open = false;
    for (const auto& a : aggs) {
      if (a.open && a.count >= 2) any_open = true;
    }
    if (!any_open) break;

    std::vector<Candidate> best(aggs.size());
    std::vector<Scan> scan(aggs.size());
    for (std::size_t f = 0; f < x.cols; ++f) {
      for (auto& s : scan) s = Scan{};
      for (std::uint32_t ri : sorted_cols[f]) {
        const int nd = node_of[ri];
        if (nd < 0 || !aggs[nd].open) continue;
        Scan& s = scan[nd];
        const double v = x.at(ri, f);
        if (s.count > 0 && v > s.last_val) {
          const NodeAgg& a = aggs[nd];
          const double g_right = a.g - s.g;
          const double h_right = a.h - s.h;
          const double gain = 0.5 * (leaf_score(s.g, s.h) + leaf_score(g_right, h_right) -
                                     leaf_score(a.g, a.h)) -
                              params.reg_gamma;
          Candidate& b = best[nd];
          if (gain > b.gain + 1e-12) {
            b.gain = gain;
            b.feature = static_cast<int>(f);
            b.threshold = 0.5 * (s.last_val + v);
            b.g_left = s.g;
            b.h_left = s.h;
          }
        }
        s.g += grad[ri];
        s.h += hess[ri];
        ++s.count;
        s.last_val = v;
      }
    }

    // Materialize accepted splits.
    std::vector<int> left_child(aggs.size(), -1), right_child(aggs.size(), -1);
    const std::size_t node_count_before = aggs.size();
    for (std::size_t ndi = 0; ndi < node_count_before; ++ndi) {
      NodeAgg& a = aggs[ndi];
      const Candidate& b = best[ndi];
      if (!a.open) continue;
      if (b.feature < 0 || b.gain <= 1e-12) {
        a.open = false;
        continue;
      }
      const int left_id = static_cast<int>(tree.nodes.size());
      const int right_id = left_id + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[ndi].feature = b.feature;
      tree.nodes[ndi].threshold = b.threshold;
      tree.nodes[ndi].left = left_id;
      tree.nodes[ndi].right = right_id;
      left_child[ndi] = left_id;
      right_child[ndi] = right_id;
      NodeAgg left_agg, right_agg;
      left_agg.g = b.g_left;
      left_agg.h = b.h_left;
      right_agg.g = a.g - b.g_left;
      right_agg.h = a.h - b.h_left;
      a.open = false;
      aggs.push_back(left_agg);
      aggs.push_back(right_agg);
    }
    if (tree.nodes.size() == node_count_before) break;

    for (std::size_t i = 0; i < n; ++i) {
      const int nd = node_of[i];
      if (nd < 0 || static_cast<std::size_t>(nd) >= node_count_before) continue;
      if (left_child[nd] < 0) continue;
      const TreeNode& node = tree.nodes[nd];
      node_of[i] = x.at(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    for (std::size_t ndi = 0; ndi < node_count_before; ++ndi) {
      if (left_child[ndi] < 0) continue;
      auto& la = aggs[left_child[ndi]];
      auto& ra = aggs[right_child[ndi]];
      la.count = 0;
      ra.count = 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int nd = node_of[i];
      if (nd >= 0 && static_cast<std::size_t>(nd) >= node_count_before) ++aggs[nd].count;
    }
  }

  for (std::size_t ndi = 0; ndi < tree.nodes.size(); ++ndi) {
    if (tree.nodes[ndi].feature < 0) {
      tree.nodes[ndi].leaf_value =
          params.learning_rate * (-aggs[ndi].g / (aggs[ndi].h + params.reg_lambda));
    }
  }
  return tree;
}

inline void softmax_rows(const std::vector<double>& scores, std::size_t n, int classes,
                         std::vector<double>& probs) {
  probs.resize(scores.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double* s = scores.data() + i * classes;
    double* p = probs.data() + i * classes;
    double m = s[0];
    for (int c = 1; c < classes; ++c) m = std::max(m, s[c]);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) {
      p[c] = std::exp(s[c] - m);
      z += p[c];
    }
    for (int c = 0; c < classes; ++c) p[c] /= z;
  }
}

inline int argmax_row(const double* s, int classes) {
  int best = 0;
  for (int c = 1; c < classes; ++c) {
    if (s[c] > s[best]) best = c;  // tie keeps lowest id
  }
  return best;
}

}  // namespace detail

inline void boosted_accumulate_scores(const BoostedEnsemble& ensemble, const LabeledBatch& batch,
                                      std::vector<double>& scores) {
  scores.assign(batch.rows() * ensemble.class_count, 0.0);
  for (const auto& stage : ensemble.stages) {
    for (int c = 0; c < ensemble.class_count; ++c) {
      for (std::size_t r = 0; r < batch.rows(); ++r) {
        scores[r * ensemble.class_count + c] += stage.class_trees[c].value_for(batch.features.row(r));
      }
    }
  }
}

inline std::vector<int> boosted_predict(const BoostedEnsemble& ensemble,
                                        const LabeledBatch& batch) {
  std::vector<double> scores;
  boosted_accumulate_scores(ensemble, batch, scores);
  std::vector<int> out(batch.rows());
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    out[r] = detail::argmax_row(scores.data() + r * ensemble.class_count, ensemble.class_count);
  }
  return out;
}

// Appends `rounds` boosting stages fit on `train` (warm start: existing stages
// keep contributing to the margins) and returns the macro-F1 on `eval_on`
// measured after each appended round.
inline std::vector<double> boosted_fit_stages(BoostedEnsemble& ensemble, const LabeledBatch& train,
                                              int rounds, const LabeledBatch& eval_on) {
  if (rounds <= 0) throw std::invalid_argument("boosted_fit_stages: rounds must be positive");
  if (!train.has_labels()) throw std::invalid_argument("boosted_fit_stages: train batch unlabeled");
  if (!eval_on.has_labels()) {
    throw std::invalid_argument("boosted_fit_stages: eval batch unlabeled");
  }
  if (train.rows() == 0) throw std::invalid_argument("boosted_fit_stages: empty train batch");
  if (ensemble.class_count == 0) ensemble.class_count = class_count_of(train);
  if (ensemble.feature_count == 0) ensemble.feature_count = train.cols();
  if (train.cols() != ensemble.feature_count) {
    throw std::invalid_argument("boosted_fit_stages: feature count mismatch");
  }
  for (int label : *train.labels) {
    if (label >= ensemble.class_count) {
      throw std::invalid_argument("boosted_fit_stages: unseen class id " + std::to_string(label));
    }
  }

  const std::size_t n = train.rows();
  const int classes = ensemble.class_count;

  std::vector<std::vector<std::uint32_t>> sorted_cols(train.cols());
  for (std::size_t f = 0; f < train.cols(); ++f) {
    auto& col = sorted_cols[f];
    col.resize(n);
    std::iota(col.begin(), col.end(), 0u);
    std::sort(col.begin(), col.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double va = train.features.at(a, f), vb = train.features.at(b, f);
      return va != vb ? va < vb : a < b;
    });
  }

  std::vector<double> train_scores, eval_scores;
  boosted_accumulate_scores(ensemble, train, train_scores);
  boosted_accumulate_scores(ensemble, eval_on, eval_scores);

  std::vector<double> probs, grad(n), hess(n);
  std::vector<double> f1_per_round;
  f1_per_round.reserve(rounds);
  std::vector<int> eval_pred(eval_on.rows());

  for (int round = 0; round < rounds; ++round) {
    detail::softmax_rows(train_scores, n, classes, probs);
    BoostedStage stage;
    stage.class_trees.reserve(classes);
    for (int c = 0; c < classes; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[i * classes + c];
        grad[i] = p - ((*train.labels)[i] == c ? 1.0 : 0.0);
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
      stage.class_trees.push_back(
          detail::fit_boost_tree(train.features, sorted_cols, grad, hess, ensemble.params));
    }
    for (int c = 0; c < classes; ++c) {
      const DecisionTree& tree = stage.class_trees[c];
      for (std::size_t i = 0; i < n; ++i) {
        train_scores[i * classes + c] += tree.value_for(train.features.row(i));
      }
      for (std::size_t i = 0; i < eval_on.rows(); ++i) {
        eval_scores[i * classes + c] += tree.value_for(eval_on.features.row(i));
      }
    }
    ensemble.stages.push_back(std::move(stage));

    for (std::size_t i = 0; i < eval_on.rows(); ++i) {
      eval_pred[i] = detail::argmax_row(eval_scores.data() + i * classes, classes);
    }
    f1_per_round.push_back(macro_f1(*eval_on.labels, eval_pred, classes));
  }
  return f1_per_round;
}

// Training objective: summed softmax cross-entropy plus the structural
// penalty of every stored tree (gamma per leaf, lambda/2 per squared stored
// leaf weight). Used by tests to check per-round monotonicity.
inline double boosted_objective(const BoostedEnsemble& ensemble, const LabeledBatch& batch) {
  if (!batch.has_labels()) throw std::invalid_argument("boosted_objective: batch unlabeled");
  std::vector<double> scores;
  boosted_accumulate_scores(ensemble, batch, scores);
  std::vector<double> probs;
  detail::softmax_rows(scores, batch.rows(), ensemble.class_count, probs);
  double obj = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    obj -= std::log(std::max(probs[i * ensemble.class_count + (*batch.labels)[i]], 1e-300));
  }
  for (const auto& stage : ensemble.stages) {
    for (const auto& tree : stage.class_trees) {
      for (const auto& node : tree.nodes) {
        if (node.feature < 0) {
          obj += ensemble.params.reg_gamma +
                 0.5 * ensemble.params.reg_lambda * node.leaf_value * node.leaf_value;
        }
      }
    }
  }
  return obj;
}

}  // namespace driftbench
