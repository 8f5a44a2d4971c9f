// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "pedattr/config.hpp"
#include "pedattr/inference.hpp"
#include "pedattr/pipeline.hpp"
#include "pedattr/random.hpp"
#include "pedattr/report.hpp"
#include "pedattr/similarity.hpp"
#include "pedattr/svm.hpp"

using namespace pedattr;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> ids_of(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
  return ids;
}

// 1. max-flow energy equals the exhaustive minimum
void solver_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(4, 12), kdist(1, 4);
  double worst = 0;
  std::size_t mismatched = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = size(rng);
    std::vector<std::array<double, 3>> pts(n);
    for (auto& p : pts) p = {U(rng), U(rng), U(rng)};
    auto aff = [&](std::size_t i, std::size_t j) {
      double d = 0;
      for (int c = 0; c < 3; ++c) d += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
      return std::exp(-d / 0.2);
    };
    const KnnGraph g = build_knn_graph(ids_of(n), aff, kdist(rng));
    std::vector<double> prob(n);
    for (auto& p : prob) p = 0.001 + 0.998 * U(rng);
    MrfProblem problem = assemble_problem(g, prob, {}, 4.0 * U(rng));
    // every third instance gets arbitrary finite unaries instead of -log P
    if (t % 3 == 0) {
      for (auto& u : problem.unary) u = {5.0 * U(rng), 5.0 * U(rng)};
    }
    const double mf = solve_maxflow(problem).energy;
    const double bf = brute_force_solve(problem).energy;
    const double rel = std::abs(mf - bf) / std::max(std::abs(bf), 1e-300);
    worst = std::max(worst, rel);
    mismatched += rel > 1e-9;
  }
  const double secs = seconds_since(t0);
  verdict(1, mismatched == 0 && secs < 60, "max-flow energy equals exhaustive minimum",
          "1000 instances, worst relative gap " + fmt("%.3g", worst) + ", " +
              fmt("%.2f", secs) + " s");
}

// 2. reported energy equals a direct recomputation with forest pairwise terms
void energy_fidelity() {
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(6, 40);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = size(rng);
    std::vector<FeatureVector> feats(n);
    for (auto& f : feats) f.values = {U(rng), U(rng), U(rng), U(rng)};
    ForestConfig fc;
    fc.trees = 10 + t % 20;
    fc.min_leaf = 1;
    fc.max_depth = 5;
    const ForestModel forest = train_unsupervised_forest(feats, fc, 77 + t);
    std::vector<std::vector<int>> leaves;
    for (const auto& f : feats) leaves.push_back(forest.leaves(f.values));
    const KnnGraph g = build_knn_graph(
        ids_of(n), [&](std::size_t i, std::size_t j) { return leaf_agreement(leaves[i], leaves[j]); },
        5);
    std::vector<double> prob(n);
    for (auto& p : prob) p = 0.01 + 0.98 * U(rng);
    const double lambda = 0.5 + 2.0 * U(rng);
    const LabelAssignment sol = solve_maxflow(assemble_problem(g, prob, {}, lambda));

    // independent: route every tree, count shared leaves, divide by T
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) e += -std::log(sol.labels[i] ? prob[i] : 1.0 - prob[i]);
    for (const Edge& edge : g.edges) {
      if (sol.labels[edge.u] == sol.labels[edge.v]) continue;
      int together = 0;
      for (const auto& tree : forest.trees) {
        together += tree.route(feats[edge.u].values) == tree.route(feats[edge.v].values);
      }
      e += lambda * together / static_cast<double>(forest.trees.size());
    }
    worst = std::max(worst, std::abs(e - sol.energy));
  }
  verdict(2, worst <= 1e-9, "reported energy equals direct evaluation",
          "100 forest-affinity instances, worst gap " + fmt("%.3g", worst));
}

// 4. SMO against the exact QP, KKT gap on separable toys
void svm_correctness() {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(2, 6);
  auto gram_of = [](const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> g(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] = intersection_kernel(pts[i], pts[j]);
    }
    return g;
  };
  double worst = 0;
  bool oracle_ok = true;
  const double Cs[] = {0.1, 1.0, 10.0};
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = size(rng);
    std::vector<std::vector<double>> pts(n, std::vector<double>(4));
    for (auto& p : pts) {
      for (auto& x : p) x = U(rng);
    }
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i == 0 ? 1 : i == 1 ? -1 : (U(rng) < 0.5 ? 1 : -1);
    const double C = Cs[t % 3];
    const auto g = gram_of(pts);
    const SvmDual dual = solve_svm_dual(g, y, C, 1e-7, 1000000);
    std::vector<std::vector<double>> K(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) K[i][j] = g[i * n + j];
    }
    const auto exact = oracle::svm_dual_qp(K, y, C);
    if (exact.size() != n) {
      oracle_ok = false;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(dual.alpha[i] - exact[i]));
  }

  const TrainConfig defaults;
  double worst_gap = -1e300;
  for (int t = 0; t < 50; ++t) {
    // two linearly separable 2-D blobs in the positive quadrant
    std::vector<std::vector<double>> pts;
    std::vector<int> y;
    const std::size_t per = 5 + t % 20;
    for (std::size_t i = 0; i < 2 * per; ++i) {
      const bool pos = i < per;
      pts.push_back({(pos ? 2.0 : 0.2) + 0.5 * U(rng), (pos ? 0.2 : 2.0) + 0.5 * U(rng)});
      y.push_back(pos ? 1 : -1);
    }
    const auto g = gram_of(pts);
    const SvmDual dual =
        solve_svm_dual(g, y, defaults.C, defaults.kkt_tol, defaults.max_passes * pts.size());
    worst_gap = std::max(worst_gap, kkt_gap(g, y, dual.alpha, defaults.C));
  }
  verdict(4, oracle_ok && worst <= 1e-3 && worst_gap < defaults.kkt_tol,
          "SMO matches exact QP and meets KKT tolerance",
          "50 QP problems, worst |alpha diff| " + fmt("%.3g", worst) + "; 50 separable sets, worst gap " +
              fmt("%.3g", worst_gap));
}

// 5. forest similarity separates two well-separated clusters
void forest_sanity() {
  std::mt19937_64 rng(5005);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<FeatureVector> feats(200);
  for (std::size_t i = 0; i < 200; ++i) {
    const double shift = i < 100 ? 0.0 : 6.0 / std::sqrt(2.0);  // centres 6 sd apart
    feats[i].values = {N(rng) + shift, N(rng) + shift};
  }
  auto gap = [&](const ForestConfig& fc, double& within, double& between) {
    const ForestModel forest = train_unsupervised_forest(feats, fc, 55);
    std::vector<std::vector<int>> leaves;
    for (const auto& f : feats) leaves.push_back(forest.leaves(f.values));
    within = between = 0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      for (std::size_t j = i + 1; j < 200; ++j) {
        const double s = leaf_agreement(leaves[i], leaves[j]);
        if ((i < 100) == (j < 100)) {
          within += s;
          ++nw;
        } else {
          between += s;
          ++nb;
        }
      }
    }
    within /= nw;
    between /= nb;
  };
  // Depth 12 over 400 two-dimensional points keeps splitting inside each
  // cluster, where real and resampled points share one distribution.
  ForestConfig fc;
  fc.trees = 100;
  fc.max_depth = 6;
  double within = 0, between = 0;
  gap(fc, within, between);
  ForestConfig deep;
  deep.trees = 100;
  double deep_within = 0, deep_between = 0;
  gap(deep, deep_within, deep_between);
  verdict(5, within - between >= 0.2, "forest similarity separates clusters",
          "T 100, depth 6, min leaf 5: within " + fmt("%.3f", within) + ", between " +
              fmt("%.3f", between) + "; depth 12 gives " + fmt("%.3f", deep_within) + " vs " +
              fmt("%.3f", deep_between));
}

RunConfig synthetic_run(double noise, const std::filesystem::path& cache) {
  RunConfig cfg;
  cfg.synth.n = 1000;
  cfg.synth.noise = noise;
  cfg.cache_dir = cache;
  return cfg;
}

std::size_t column_of(const EvalReport& r, const std::string& name) {
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    if (r.columns[c] == name) return c;
  }
  throw Error("report lacks column " + name);
}

// 3. lambda = 0 reduces every regime to thresholding
void decoupling(const std::filesystem::path& cache) {
  const RunConfig cfg = synthetic_run(0.15, cache);
  const PreparedDataset prepared = prepare_dataset(cfg);
  const Dataset& ds = prepared.dataset;
  const FilterBankConfig bank = filter_bank_for(cfg);
  const FeatureConfig fcfg = feature_config_for(cfg, Scheme::ForeWhole);
  const auto features = dataset_features(ds, prepared.id, bank, fcfg, cache);
  std::vector<std::vector<double>> prob;
  for (std::size_t a = 0; a < ds.registry.size(); ++a) {
    UnaryOptions opts;
    const UnaryModel m =
        train_attribute_model(ds, a, features, bank, fcfg, opts, derive_seed(cfg.seed, 10));
    prob.push_back(attribute_probabilities(m, features));
  }
  const RegimeData data = make_regime_data(ds, features, prob);
  const ForestModel forest =
      train_unsupervised_forest(features, forest_config_for(cfg), derive_seed(cfg.seed, 20));

  RegimeConfig rc;
  rc.lambda = 0.0;
  rc.forest = &forest;
  rc.gaussian.sigma = sigma_candidates(features)[2];
  std::size_t checked = 0, differing = 0;
  for (Regime regime : {Regime::IkSvm, Regime::MrfG1, Regime::MrfG2, Regime::MrfR1, Regime::MrfR2}) {
    const RegimeResult res = run_regime(regime, data, rc);
    for (std::size_t a = 0; a < data.attributes.size(); ++a) {
      for (std::size_t t = 0; t < res.targets.size(); ++t) {
        const std::uint8_t expect = prob[a][res.targets[t]] >= 0.5 ? 1 : 0;
        differing += res.labels[a][t] != expect;
        ++checked;
      }
    }
  }
  verdict(3, differing == 0 && ds.samples.size() >= 500,
          "lambda = 0 equals thresholding in every regime",
          std::to_string(ds.samples.size()) + " samples, " + std::to_string(checked) +
              " predictions, " + std::to_string(differing) + " differ");
}

// 6. end-to-end lift on synthetic data
void synthetic_lift(const std::filesystem::path& cache) {
  const auto t0 = Clock::now();
  const EvalReport noisy = run_pipeline(synthetic_run(0.15, cache));
  RunConfig clean_cfg = synthetic_run(0.0, cache);
  clean_cfg.regimes = {Regime::IkSvm};
  const EvalReport clean = run_pipeline(clean_cfg);
  const double secs = seconds_since(t0);

  const auto avg = noisy.average();
  const double svm = avg[column_of(noisy, "iksvm/fore-whole")];
  const double mrf = avg[column_of(noisy, "mrfr2/fore-whole")];
  const double svm_clean = clean.average()[column_of(clean, "iksvm/fore-whole")];
  verdict(6, mrf >= svm && svm_clean >= 80.0 && secs < 300,
          "MRFr2 >= ikSVM at noise 0.15, ikSVM >= 80% noise-free",
          "MRFr2 " + fmt("%.2f", mrf) + ", ikSVM " + fmt("%.2f", svm) + ", noise-free ikSVM " +
              fmt("%.2f", svm_clean) + ", " + fmt("%.1f", secs) + " s");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. repeated runs give byte-identical reports
void determinism() {
  oracle::TempDir a("accept-a"), b("accept-b");
  RunConfig cfg;
  cfg.synth.n = 300;
  cfg.synth.noise = 0.15;
  cfg.trees = 20;
  write_report(a.path(), run_pipeline(cfg));
  write_report(b.path(), run_pipeline(cfg));
  bool same = true;
  for (const char* f : {"report.txt", "report.csv", "report_balanced.csv"}) {
    const std::string x = slurp(a.path() / f), y = slurp(b.path() / f);
    same &= !x.empty() && x == y;
  }
  verdict(8, same, "repeated pipeline runs give byte-identical reports",
          "report.txt, report.csv, report_balanced.csv");
}

template <typename F>
void guarded(int id, const std::string& what, F&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    verdict(id, false, what, std::string("error: ") + e.what());
  }
}

}  // namespace

int main() {
  oracle::TempDir cache("accept-cache");
  guarded(1, "solver exactness", solver_exactness);
  guarded(2, "energy fidelity", energy_fidelity);
  // 6 runs first so its timing includes feature extraction; 3 reuses the cache
  guarded(6, "synthetic lift", [&] { synthetic_lift(cache.path()); });
  guarded(3, "decoupling limit", [&] { decoupling(cache.path()); });
  guarded(4, "SVM correctness", svm_correctness);
  guarded(5, "forest affinity sanity", forest_sanity);
  std::printf("SKIP criterion 7: full-dataset reproduction needs a local PETA manifest\n");
  guarded(8, "determinism", determinism);
  return failures == 0 ? 0 : 1;
}
