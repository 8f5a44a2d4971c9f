#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pedattr/dataset.hpp"
#include "pedattr/features.hpp"
#include "pedattr/similarity.hpp"

namespace pedattr {

/// Undirected edge, u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

struct KnnGraph {
  std::vector<std::string> ids;
  std::vector<Edge> edges;  // sorted by (u, v)
  std::size_t k = 5;

  std::size_t size() const { return ids.size(); }
};

/// Symmetric affinity in [0, 1] between node indices.
using Affinity = std::function<double(std::size_t, std::size_t)>;

/// Each node keeps its min(k, n-1) highest-affinity neighbours (ties to the
/// smaller index); the union of those lists forms the edge set, weighted by
/// the affinity.
KnnGraph build_knn_graph(std::vector<std::string> ids, const Affinity& affinity,
                         std::size_t k = 5);

void write_graph_dump(const std::filesystem::path& path, const KnnGraph& graph);

/// Unary cost of a clamped node's forbidden label.
inline constexpr double kClampCost = 1e9;
/// Capacities are integers in units of 1e-9 energy.
inline constexpr double kFixedPointScale = 1e9;

/// Marks a node as free in a clamp vector.
inline constexpr std::int8_t kFree = -1;

struct UnaryCost {
  double c0 = 0.0;  // -log P(l = 0 | u)
  double c1 = 0.0;  // -log P(l = 1 | u)
};

/// Binary MRF: sum of unary costs plus `weight` for every edge whose
/// endpoints disagree. Each undirected edge contributes once.
struct MrfProblem {
  std::vector<UnaryCost> unary;
  std::vector<Edge> edges;  // weights already multiplied by lambda
  std::vector<std::int8_t> clamp;  // kFree, 0 or 1 per node
  double lambda = 1.0;

  std::size_t size() const { return unary.size(); }
};

/// `prob_positive[i]` is P(l = 1 | u_i); it must lie in (0, 1) for free
/// nodes and is ignored for clamped ones (cost 0 for the clamp, kClampCost
/// for the other label). `clamp` may be empty (no clamps).
MrfProblem assemble_problem(const KnnGraph& graph, std::span<const double> prob_positive,
                            std::span<const std::int8_t> clamp, double lambda = 1.0);

double mrf_energy(const MrfProblem& problem, std::span<const std::uint8_t> labels);

struct LabelAssignment {
  std::vector<std::uint8_t> labels;
  /// Energy of `labels`, evaluated in double precision.
  double energy = 0.0;
};

/// Exact minimiser via an s-t min cut (source side = label 0). Nodes not
/// reachable from the source in the residual graph take label 1. Throws
/// "non-submodular" on negative edge weights.
LabelAssignment solve_maxflow(const MrfProblem& problem);

/// The min-cut value converted back to energy units plus the constant offset
/// removed during graph construction. Agrees with the energy of the returned
/// labeling up to the fixed-point rounding of each term.
double maxflow_energy_bound(const MrfProblem& problem);

/// Exhaustive minimiser for <= 24 nodes; ties go to the lexicographically
/// smallest labeling (node 0 most significant).
LabelAssignment brute_force_solve(const MrfProblem& problem);

enum class Regime { IkSvm, MrfG1, MrfG2, MrfR1, MrfR2 };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view token);
bool uses_forest(Regime r);
/// True for the schemes whose graphs also contain the training nodes.
bool includes_training(Regime r);

/// Everything a regime needs, indexed by dataset node.
struct RegimeData {
  std::vector<std::string> ids;
  std::vector<Split> splits;
  const std::vector<FeatureVector>* features = nullptr;
  std::vector<std::string> attributes;
  /// [attribute][node] calibrated P(l = 1 | u); an empty row marks a missing model.
  std::vector<std::vector<double>> prob;
  /// [attribute][node]
  std::vector<std::vector<Label>> truth;
};

struct RegimeConfig {
  std::size_t k = 5;
  double lambda = 1.0;
  GaussianConfig gaussian;
  const ForestModel* forest = nullptr;
  /// Nodes predicted (Test normally, Verify while tuning).
  Split target = Split::Test;
};

struct RegimeResult {
  /// Dataset indices of the predicted nodes, in dataset order.
  std::vector<std::size_t> targets;
  /// [attribute][i] label of targets[i].
  std::vector<std::vector<std::uint8_t>> labels;
  /// [attribute] energy of the full graph labeling (0 for ikSVM).
  std::vector<double> energies;
  /// Graph over the regime's nodes; empty for ikSVM.
  KnnGraph graph;
  /// Dataset index of each graph node.
  std::vector<std::size_t> graph_nodes;
};

/// Dataset nodes in the regime's graph: the target split, plus the training
/// split for scheme-2 regimes. Dataset order.
std::vector<std::size_t> regime_nodes(Regime regime, std::span<const Split> splits,
                                      Split target);

/// ikSVM thresholds P >= 0.5. MRF regimes build one k-NN graph (Gaussian
/// affinity for g, forest affinity for r), clamp training nodes with known
/// labels in scheme 2, and solve every attribute exactly.
RegimeResult run_regime(Regime regime, const RegimeData& data, const RegimeConfig& cfg);

/// Same, on an already built graph over `graph_nodes`.
RegimeResult solve_on_graph(Regime regime, const RegimeData& data, KnnGraph graph,
                            std::vector<std::size_t> graph_nodes, double lambda,
                            Split target);

}  // namespace pedattr
