#include "pedattr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "pedattr/error.hpp"
#include "pedattr/maxflow.hpp"

namespace pedattr {

KnnGraph build_knn_graph(std::vector<std::string> ids, const Affinity& affinity,
                         std::size_t k) {
  if (k < 1) throw Error("k must be >= 1");
  const std::size_t n = ids.size();
  if (n < 2) throw Error("k-NN graph needs at least 2 nodes");
  const std::size_t k_eff = std::min(k, n - 1);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * k_eff);
  std::vector<std::size_t> order(n);
  std::vector<double> aff(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double a = affinity(i, j);
      if (!(a >= 0.0 && a <= 1.0)) {
        throw Error("affinity between '" + ids[i] + "' and '" + ids[j] +
                    "' is outside [0, 1]");
      }
      aff[j] = a;
    }
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_eff),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return aff[a] != aff[b] ? aff[a] > aff[b] : a < b;
                      });
    for (std::size_t r = 0; r < k_eff; ++r) {
      pairs.emplace_back(std::min(i, order[r]), std::max(i, order[r]));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  KnnGraph g;
  g.k = k;
  g.edges.reserve(pairs.size());
  for (auto [u, v] : pairs) g.edges.push_back({u, v, affinity(u, v)});
  g.ids = std::move(ids);
  return g;
}

void write_graph_dump(const std::filesystem::path& path, const KnnGraph& graph) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write graph dump " + path.string());
  out.precision(17);
  out << "pedattr-graph v1\nnodes " << graph.size() << " k " << graph.k << '\n';
  for (const auto& id : graph.ids) out << id << '\n';
  out << "edges " << graph.edges.size() << '\n';
  for (const Edge& e : graph.edges) {
    out << graph.ids[e.u] << '\t' << graph.ids[e.v] << '\t' << e.weight << '\n';
  }
}

MrfProblem assemble_problem(const KnnGraph& graph, std::span<const double> prob_positive,
                            std::span<const std::int8_t> clamp, double lambda) {
  const std::size_t n = graph.size();
  if (prob_positive.size() != n) throw Error("assemble_problem: probability count mismatch");
  if (!clamp.empty() && clamp.size() != n) throw Error("assemble_problem: clamp count mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be >= 0");

  MrfProblem p;
  p.lambda = lambda;
  p.unary.resize(n);
  p.clamp.assign(n, kFree);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int8_t c = clamp.empty() ? kFree : clamp[i];
    if (c == 0 || c == 1) {
      p.clamp[i] = c;
      p.unary[i] = c == 0 ? UnaryCost{0.0, kClampCost} : UnaryCost{kClampCost, 0.0};
      continue;
    }
    if (c != kFree) throw Error("assemble_problem: clamp values must be -1, 0 or 1");
    const double prob = prob_positive[i];
    if (!(prob > 0.0 && prob < 1.0)) {
      throw Error("assemble_problem: P(l=1) of '" + graph.ids[i] + "' is " +
                  std::to_string(prob) + ", outside (0, 1)");
    }
    p.unary[i] = {-std::log1p(-prob), -std::log(prob)};
  }
  p.edges = graph.edges;
  for (Edge& e : p.edges) e.weight *= lambda;
  return p;
}

double mrf_energy(const MrfProblem& problem, std::span<const std::uint8_t> labels) {
  if (labels.size() != problem.size()) throw Error("mrf_energy: label count mismatch");
  double e = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    e += labels[i] ? problem.unary[i].c1 : problem.unary[i].c0;
  }
  for (const Edge& edge : problem.edges) {
    if (labels[edge.u] != labels[edge.v]) e += edge.weight;
  }
  return e;
}

namespace {

void check_problem(const MrfProblem& problem) {
  for (const UnaryCost& c : problem.unary) {
    if (!std::isfinite(c.c0) || !std::isfinite(c.c1) || c.c0 < 0 || c.c1 < 0) {
      throw Error("unary costs must be finite and non-negative");
    }
  }
  for (const Edge& e : problem.edges) {
    if (e.weight < 0) throw Error("non-submodular: negative edge weight");
    if (!std::isfinite(e.weight)) throw Error("edge weight is not finite");
    if (e.u >= problem.size() || e.v >= problem.size() || e.u == e.v) {
      throw Error("edge endpoints out of range");
    }
  }
}

/// Positive amounts map to at least one unit so a strict preference survives.
MaxFlowGraph::Capacity quantize(double x) {
  if (x <= 0) return 0;
  const double scaled = std::round(x * kFixedPointScale);
  if (scaled > 0x1p62) throw Error("capacity too large for fixed-point flow");
  return std::max<MaxFlowGraph::Capacity>(1, static_cast<MaxFlowGraph::Capacity>(scaled));
}

struct FlowSetup {
  MaxFlowGraph graph;
  double offset = 0.0;
};

FlowSetup build_flow(const MrfProblem& problem) {
  check_problem(problem);
  FlowSetup s{MaxFlowGraph(problem.size()), 0.0};
  // the flow never exceeds the summed edge capacities (cut at the unary argmin)
  long double edge_total = 0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const UnaryCost& c = problem.unary[i];
    s.offset += std::min(c.c0, c.c1);
    const double d = c.c1 - c.c0;
    // label 1 = sink side pays the source arc, label 0 pays the sink arc
    if (d > 0) {
      const auto q = quantize(d);
      s.graph.add_terminal(i, q, 0);
    } else if (d < 0) {
      const auto q = quantize(-d);
      s.graph.add_terminal(i, 0, q);
    }
  }
  for (const Edge& e : problem.edges) {
    const auto q = quantize(e.weight);
    if (q > 0) {
      s.graph.add_edge(e.u, e.v, q, q);
      edge_total += 2.0L * q;
    }
  }
  if (edge_total >= 0x1p62L) {
    throw Error("total capacity overflows fixed-point flow");
  }
  return s;
}

}  // namespace

LabelAssignment solve_maxflow(const MrfProblem& problem) {
  FlowSetup s = build_flow(problem);
  s.graph.solve();
  LabelAssignment out;
  out.labels.resize(problem.size());
  for (std::size_t i = 0; i < problem.size(); ++i) {
    out.labels[i] = s.graph.source_side(i) ? 0 : 1;
  }
  out.energy = mrf_energy(problem, out.labels);
  return out;
}

double maxflow_energy_bound(const MrfProblem& problem) {
  FlowSetup s = build_flow(problem);
  const auto flow = s.graph.solve();
  return s.offset + static_cast<double>(flow) / kFixedPointScale;
}

LabelAssignment brute_force_solve(const MrfProblem& problem) {
  check_problem(problem);
  const std::size_t n = problem.size();
  if (n > 24) throw Error("brute_force_solve: " + std::to_string(n) + " nodes exceeds 24");
  LabelAssignment best;
  best.energy = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> labels(n);
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t code = 0; code < total; ++code) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = (code >> (n - 1 - i)) & 1U;
    const double e = mrf_energy(problem, labels);
    if (e < best.energy) {
      best.energy = e;
      best.labels = labels;
    }
  }
  return best;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::IkSvm: return "iksvm";
    case Regime::MrfG1: return "mrfg1";
    case Regime::MrfG2: return "mrfg2";
    case Regime::MrfR1: return "mrfr1";
    case Regime::MrfR2: return "mrfr2";
  }
  return "?";
}

Regime parse_regime(std::string_view token) {
  if (token == "iksvm") return Regime::IkSvm;
  if (token == "mrfg1") return Regime::MrfG1;
  if (token == "mrfg2") return Regime::MrfG2;
  if (token == "mrfr1") return Regime::MrfR1;
  if (token == "mrfr2") return Regime::MrfR2;
  throw Error("unknown regime '" + std::string(token) +
              "' (expected iksvm|mrfg1|mrfg2|mrfr1|mrfr2)");
}

bool uses_forest(Regime r) { return r == Regime::MrfR1 || r == Regime::MrfR2; }
bool includes_training(Regime r) { return r == Regime::MrfG2 || r == Regime::MrfR2; }

std::vector<std::size_t> regime_nodes(Regime regime, std::span<const Split> splits,
                                      Split target) {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == target || (includes_training(regime) && splits[i] == Split::Train)) {
      nodes.push_back(i);
    }
  }
  return nodes;
}

namespace {

void check_data(const RegimeData& data) {
  const std::size_t n = data.ids.size();
  if (data.splits.size() != n) throw Error("regime data: split count mismatch");
  if (data.prob.size() != data.attributes.size() ||
      data.truth.size() != data.attributes.size()) {
    throw Error("regime data: per-attribute tables do not match the attribute list");
  }
  std::string missing;
  for (std::size_t a = 0; a < data.attributes.size(); ++a) {
    if (data.prob[a].empty()) missing += (missing.empty() ? "" : ", ") + data.attributes[a];
    else if (data.prob[a].size() != n) throw Error("regime data: probability row size mismatch");
    if (data.truth[a].size() != n) throw Error("regime data: truth row size mismatch");
  }
  if (!missing.empty()) throw Error("missing unary model for attribute(s): " + missing);
}

}  // namespace

RegimeResult solve_on_graph(Regime regime, const RegimeData& data, KnnGraph graph,
                            std::vector<std::size_t> graph_nodes, double lambda,
                            Split target) {
  check_data(data);
  if (graph.size() != graph_nodes.size()) throw Error("graph/node list size mismatch");
  RegimeResult res;
  std::vector<std::size_t> target_pos;
  for (std::size_t g = 0; g < graph_nodes.size(); ++g) {
    if (data.splits[graph_nodes[g]] == target) {
      res.targets.push_back(graph_nodes[g]);
      target_pos.push_back(g);
    }
  }
  const bool clamp_train = includes_training(regime);
  std::vector<double> probs(graph_nodes.size());
  std::vector<std::int8_t> clamp(graph_nodes.size(), kFree);
  for (std::size_t a = 0; a < data.attributes.size(); ++a) {
    for (std::size_t g = 0; g < graph_nodes.size(); ++g) {
      const std::size_t node = graph_nodes[g];
      probs[g] = data.prob[a][node];
      clamp[g] = kFree;
      if (clamp_train && data.splits[node] == Split::Train) {
        const Label l = data.truth[a][node];
        if (l != Label::Unknown) clamp[g] = l == Label::Positive ? 1 : 0;
      }
    }
    const MrfProblem problem = assemble_problem(graph, probs, clamp, lambda);
    const LabelAssignment sol = solve_maxflow(problem);
    std::vector<std::uint8_t> labels(target_pos.size());
    for (std::size_t t = 0; t < target_pos.size(); ++t) labels[t] = sol.labels[target_pos[t]];
    res.labels.push_back(std::move(labels));
    res.energies.push_back(sol.energy);
  }
  res.graph = std::move(graph);
  res.graph_nodes = std::move(graph_nodes);
  return res;
}

RegimeResult run_regime(Regime regime, const RegimeData& data, const RegimeConfig& cfg) {
  check_data(data);
  if (regime == Regime::IkSvm) {
    RegimeResult res;
    for (std::size_t i = 0; i < data.splits.size(); ++i) {
      if (data.splits[i] == cfg.target) res.targets.push_back(i);
    }
    for (std::size_t a = 0; a < data.attributes.size(); ++a) {
      std::vector<std::uint8_t> labels;
      for (std::size_t node : res.targets) labels.push_back(data.prob[a][node] >= 0.5 ? 1 : 0);
      res.labels.push_back(std::move(labels));
      res.energies.push_back(0.0);
    }
    return res;
  }
  if (data.features == nullptr || data.features->size() != data.ids.size()) {
    throw Error("regime " + std::string(to_string(regime)) + " needs per-node features");
  }
  const auto& feats = *data.features;

  std::vector<std::size_t> nodes = regime_nodes(regime, data.splits, cfg.target);
  std::vector<std::string> ids;
  for (std::size_t node : nodes) ids.push_back(data.ids[node]);

  KnnGraph graph;
  if (uses_forest(regime)) {
    if (cfg.forest == nullptr) throw Error("forest regime without a trained forest");
    std::vector<std::vector<int>> leaves;
    leaves.reserve(nodes.size());
    for (std::size_t node : nodes) leaves.push_back(cfg.forest->leaves(feats[node].values));
    graph = build_knn_graph(std::move(ids),
                            [&](std::size_t i, std::size_t j) {
                              return leaf_agreement(leaves[i], leaves[j]);
                            },
                            cfg.k);
  } else {
    cfg.gaussian.validate();
    const std::size_t n = nodes.size();
    const double sigma = cfg.gaussian.sigma;
    // upper-triangle distance cache; PETA-sized graphs compute on the fly
    constexpr std::size_t kCacheLimit = 6000;
    std::vector<double> sq;
    if (n <= kCacheLimit) {
      sq.assign(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          sq[i * n + j] = sq[j * n + i] =
              squared_distance(feats[nodes[i]].values, feats[nodes[j]].values);
        }
      }
    }
    graph = build_knn_graph(std::move(ids),
                            [&](std::size_t i, std::size_t j) {
                              const double d =
                                  sq.empty() ? squared_distance(feats[nodes[i]].values,
                                                                feats[nodes[j]].values)
                                             : sq[i * n + j];
                              return gaussian_from_sqdist(d, sigma);
                            },
                            cfg.k);
  }
  return solve_on_graph(regime, data, std::move(graph), std::move(nodes), cfg.lambda,
                        cfg.target);
}

}  // namespace pedattr
