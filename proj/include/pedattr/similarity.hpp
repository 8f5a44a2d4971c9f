#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pedattr/features.hpp"

namespace pedattr {

struct GaussianConfig {
  double sigma = 1.0;
  void validate() const;
};

double squared_distance(std::span<const double> u, std::span<const double> v);

/// exp(-||u - v||^2 / sigma^2)
double gaussian_similarity(const FeatureVector& u, const FeatureVector& v,
                           const GaussianConfig& cfg);
double gaussian_from_sqdist(double sqdist, double sigma);

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = 12;
  /// A split is admissible only if both children keep at least this many samples.
  std::size_t min_leaf = 5;
  /// Candidate features per node; 0 means round(sqrt(dim)).
  std::size_t features_per_node = 0;
  /// Real samples drawn (without replacement) per tree; 0 means all of them.
  std::size_t samples_per_tree = 0;

  void validate() const;
};

/// Internal node: `feature >= 0`, u[feature] <= threshold goes left.
/// Leaf: `feature < 0`, `leaf` is its id, unique within the tree.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int leaf_count = 0;

  int route(std::span<const double> u) const;
};

struct ForestModel {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  /// Leaf id reached in each tree.
  std::vector<int> leaves(std::span<const double> u) const;
};

/// Pseudo two-class forest: each tree separates the real vectors from a
/// synthetic set of equal size whose coordinates are drawn independently
/// from the real per-dimension marginals. Gini splits over sqrt(d) random
/// features with midpoint thresholds. Deterministic per seed.
ForestModel train_unsupervised_forest(const std::vector<FeatureVector>& features,
                                      const ForestConfig& cfg, std::uint64_t seed);

/// Fraction of trees in which u and v share a leaf.
double forest_similarity(const ForestModel& model, const FeatureVector& u,
                         const FeatureVector& v);

/// Same quantity from precomputed leaf vectors.
double leaf_agreement(std::span<const int> a, std::span<const int> b);

/// Text serialization:
///   pedattr-forest v1
///   dim <d> seed <s> trees <T>
///   tree <node_count> <leaf_count>
///   s <feature> <threshold> <left> <right>   |   l <leaf_id>
void save_forest(const std::filesystem::path& path, const ForestModel& model);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace pedattr
