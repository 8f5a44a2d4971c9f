#include "pedattr/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pedattr/error.hpp"
#include "pedattr/random.hpp"

namespace pedattr {

namespace fs = std::filesystem;

void GaussianConfig::validate() const {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw Error("sigma must be positive");
}

double squared_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error("dimension mismatch (" + std::to_string(u.size()) + " vs " +
                std::to_string(v.size()) + ")");
  }
  double s0 = 0, s1 = 0;
  std::size_t i = 0;
  for (; i + 2 <= u.size(); i += 2) {
    const double d0 = u[i] - v[i], d1 = u[i + 1] - v[i + 1];
    s0 += d0 * d0;
    s1 += d1 * d1;
  }
  if (i < u.size()) {
    const double d = u[i] - v[i];
    s0 += d * d;
  }
  return s0 + s1;
}

double gaussian_from_sqdist(double sqdist, double sigma) {
  return std::exp(-sqdist / (sigma * sigma));
}

double gaussian_similarity(const FeatureVector& u, const FeatureVector& v,
                           const GaussianConfig& cfg) {
  cfg.validate();
  return gaussian_from_sqdist(squared_distance(u.values, v.values), cfg.sigma);
}

void ForestConfig::validate() const {
  if (trees < 1) throw Error("forest needs at least one tree");
  if (min_leaf < 1) throw Error("min_leaf must be >= 1");
}

int DecisionTree::route(std::span<const double> u) const {
  int idx = 0;
  while (nodes[idx].feature >= 0) {
    const TreeNode& n = nodes[idx];
    idx = u[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[idx].leaf;
}

std::vector<int> ForestModel::leaves(std::span<const double> u) const {
  if (u.size() != dim) {
    throw Error("forest expects dim " + std::to_string(dim) + ", got " +
                std::to_string(u.size()));
  }
  std::vector<int> out(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) out[t] = trees[t].route(u);
  return out;
}

namespace {

/// Grows one real-vs-synthetic tree. Sample codes >= 0 index real rows of
/// `rows`; code c < 0 is synthetic sample -c-1, whose coordinate f is the
/// coordinate f of a hashed real row.
class TreeGrower {
 public:
  TreeGrower(const std::vector<const std::vector<double>*>& rows, std::size_t dim,
             const ForestConfig& cfg, std::uint64_t tree_seed)
      : rows_(rows), dim_(dim), cfg_(cfg), seed_(tree_seed), rng_(tree_seed) {
    mtry_ = cfg.features_per_node > 0
                ? std::min(cfg.features_per_node, dim)
                : std::max<std::size_t>(1, static_cast<std::size_t>(
                                               std::llround(std::sqrt(double(dim)))));
  }

  DecisionTree grow() {
    const auto n = static_cast<int>(rows_.size());
    codes_.resize(2 * rows_.size());
    for (int i = 0; i < n; ++i) {
      codes_[i] = i;
      codes_[n + i] = -i - 1;
    }
    tree_.nodes.clear();
    tree_.leaf_count = 0;
    tree_.nodes.emplace_back();
    build(0, 0, codes_.size(), 0);
    return std::move(tree_);
  }

 private:
  double value(int code, std::size_t f) const {
    if (code >= 0) return (*rows_[code])[f];
    const std::uint64_t j = static_cast<std::uint64_t>(-(code + 1));
    const std::uint64_t h = mix64(seed_ ^ mix64(j * dim_ + f));
    return (*rows_[h % rows_.size()])[f];
  }

  void make_leaf(std::size_t node) {
    tree_.nodes[node].feature = -1;
    tree_.nodes[node].leaf = tree_.leaf_count++;
  }

  static double impurity(double real, double total) {
    if (total <= 0) return 0;
    const double p = real / total;
    return total * 2.0 * p * (1.0 - p);
  }

  void draw_features() {
    features_.clear();
    if (mtry_ >= dim_) {
      for (std::size_t f = 0; f < dim_; ++f) features_.push_back(f);
      return;
    }
    while (features_.size() < mtry_) {
      const std::size_t f = uniform_index(rng_, dim_);
      if (std::find(features_.begin(), features_.end(), f) == features_.end()) {
        features_.push_back(f);
      }
    }
  }

  void build(std::size_t node, std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t size = end - begin;
    std::size_t real = 0;
    for (std::size_t k = begin; k < end; ++k) real += codes_[k] >= 0;
    if (real == 0 || real == size || depth >= cfg_.max_depth ||
        size < 2 * cfg_.min_leaf) {
      make_leaf(node);
      return;
    }

    const double parent = impurity(double(real), double(size));
    double best = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0;
    draw_features();
    for (std::size_t f : features_) {
      scratch_.clear();
      for (std::size_t k = begin; k < end; ++k) {
        scratch_.emplace_back(value(codes_[k], f), codes_[k] >= 0 ? 1 : 0);
      }
      std::sort(scratch_.begin(), scratch_.end());
      std::size_t left_real = 0;
      for (std::size_t k = 0; k + 1 < size; ++k) {
        left_real += scratch_[k].second;
        const std::size_t nl = k + 1, nr = size - nl;
        if (scratch_[k].first >= scratch_[k + 1].first) continue;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        const double score = impurity(double(left_real), double(nl)) +
                             impurity(double(real - left_real), double(nr));
        if (score < best) {
          best = score;
          best_feature = static_cast<int>(f);
          const double a = scratch_[k].first, b = scratch_[k + 1].first;
          double mid = a + (b - a) / 2;
          if (!(mid < b)) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) {
      make_leaf(node);
      return;
    }

    const auto f = static_cast<std::size_t>(best_feature);
    auto mid_it = std::stable_partition(
        codes_.begin() + begin, codes_.begin() + end,
        [&](int code) { return value(code, f) <= best_threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - codes_.begin());

    const auto left = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto right = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = best_feature;
    tree_.nodes[node].threshold = best_threshold;
    tree_.nodes[node].left = left;
    tree_.nodes[node].right = right;
    build(static_cast<std::size_t>(left), begin, mid, depth + 1);
    build(static_cast<std::size_t>(right), mid, end, depth + 1);
  }

  const std::vector<const std::vector<double>*>& rows_;
  std::size_t dim_;
  const ForestConfig& cfg_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t mtry_ = 1;
  std::vector<int> codes_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, int>> scratch_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_unsupervised_forest(const std::vector<FeatureVector>& features,
                                      const ForestConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (features.size() < 2) throw Error("forest training needs at least 2 samples");
  const std::size_t dim = features.front().dim();
  if (dim == 0) throw Error("forest training needs non-empty feature vectors");
  for (const auto& f : features) {
    if (f.dim() != dim) throw Error("forest training: feature dimensions differ");
  }

  ForestModel model;
  model.dim = dim;
  model.seed = seed;
  model.trees.reserve(cfg.trees);
  std::vector<const std::vector<double>*> all(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) all[i] = &features[i].values;

  for (std::size_t t = 0; t < cfg.trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    std::vector<const std::vector<double>*> rows = all;
    if (cfg.samples_per_tree > 0 && cfg.samples_per_tree < rows.size()) {
      Rng pick(derive_seed(tree_seed, 0x5a17));
      shuffle(rows, pick);
      rows.resize(cfg.samples_per_tree);
    }
    TreeGrower grower(rows, dim, cfg, tree_seed);
    model.trees.push_back(grower.grow());
  }
  return model;
}

double leaf_agreement(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) throw Error("leaf vectors differ in length");
  std::size_t same = 0;
  for (std::size_t t = 0; t < a.size(); ++t) same += a[t] == b[t];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

double forest_similarity(const ForestModel& model, const FeatureVector& u,
                         const FeatureVector& v) {
  const auto lu = model.leaves(u.values);
  const auto lv = model.leaves(v.values);
  return leaf_agreement(lu, lv);
}

void save_forest(const fs::path& path, const ForestModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write forest " + path.string());
  out << "pedattr-forest v1\n";
  out << "dim " << model.dim << " seed " << model.seed << " trees " << model.trees.size()
      << '\n';
  char buf[32];
  for (const DecisionTree& tree : model.trees) {
    out << "tree " << tree.nodes.size() << ' ' << tree.leaf_count << '\n';
    for (const TreeNode& n : tree.nodes) {
      if (n.feature >= 0) {
        auto res = std::to_chars(buf, buf + sizeof buf, n.threshold);
        out << "s " << n.feature << ' ' << std::string_view(buf, res.ptr - buf) << ' '
            << n.left << ' ' << n.right << '\n';
      } else {
        out << "l " << n.leaf << '\n';
      }
    }
  }
  if (!out) throw Error("write failed for " + path.string());
}

ForestModel load_forest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open forest " + path.string());
  std::string magic, version, key;
  if (!(in >> magic >> version) || magic != "pedattr-forest" || version != "v1") {
    throw Error("not a pedattr-forest v1 file: " + path.string());
  }
  ForestModel model;
  std::size_t ntrees = 0;
  if (!(in >> key >> model.dim) || key != "dim" || !(in >> key >> model.seed) ||
      key != "seed" || !(in >> key >> ntrees) || key != "trees") {
    throw Error("forest file: bad header");
  }
  model.trees.resize(ntrees);
  for (DecisionTree& tree : model.trees) {
    std::size_t count = 0;
    if (!(in >> key >> count >> tree.leaf_count) || key != "tree") {
      throw Error("forest file: bad tree header");
    }
    tree.nodes.resize(count);
    for (TreeNode& n : tree.nodes) {
      if (!(in >> key)) throw Error("forest file: truncated");
      if (key == "s") {
        std::string thr;
        if (!(in >> n.feature >> thr >> n.left >> n.right)) throw Error("forest file: bad split");
        auto res = std::from_chars(thr.data(), thr.data() + thr.size(), n.threshold);
        if (res.ec != std::errc()) throw Error("forest file: bad threshold");
        const auto c = static_cast<int>(count);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= model.dim ||
            n.left <= 0 || n.left >= c || n.right <= 0 || n.right >= c) {
          throw Error("forest file: split references out of range");
        }
      } else if (key == "l") {
        if (!(in >> n.leaf)) throw Error("forest file: bad leaf");
        n.feature = -1;
      } else {
        throw Error("forest file: unknown node tag '" + key + "'");
      }
    }
  }
  return model;
}

}  // namespace pedattr
