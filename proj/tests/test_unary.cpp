#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pedattr/augment.hpp"
#include "pedattr/error.hpp"
#include "pedattr/svm.hpp"

using namespace pedattr;

namespace {

FeatureVector vec(std::vector<double> v) {
  FeatureVector f;
  f.values = std::move(v);
  return f;
}

std::vector<double> gram_of(const std::vector<std::vector<double>>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[i * n + j] = intersection_kernel(pts[i], pts[j]);
  }
  return g;
}

double dual_objective(const std::vector<double>& g, const std::vector<int>& y,
                      const std::vector<double>& a) {
  const std::size_t n = y.size();
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s += 0.5 * a[i] * a[j] * y[i] * y[j] * g[i * n + j];
    s -= a[i];
  }
  return s;
}

// Two separable blobs of histogram-like vectors.
void blobs(std::mt19937_64& rng, std::size_t n, std::vector<FeatureVector>& f,
           std::vector<int>& labels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = static_cast<int>(i % 2);
    std::vector<double> v(6);
    for (std::size_t d = 0; d < 6; ++d) v[d] = 0.2 * u(rng) + ((d < 3) == (l == 1) ? 0.8 : 0.0);
    f.push_back(vec(v));
    labels.push_back(l);
  }
}

}  // namespace

TEST(IntersectionKernel, SmallExample) {
  const std::vector<double> u{0.2, 0.3};
  EXPECT_DOUBLE_EQ(intersection_kernel(u, u), 0.5);
  const std::vector<double> a{0.1, 0.7, 0.2}, b{0.4, 0.1, 0.5};
  EXPECT_DOUBLE_EQ(intersection_kernel(a, b), 0.1 + 0.1 + 0.2);
  EXPECT_DOUBLE_EQ(intersection_kernel(a, b), intersection_kernel(b, a));
  EXPECT_THROW(intersection_kernel(a, u), Error);
}

TEST(IntersectionKernel, SelfSimilarityBoundsOthers) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> u(10), v(10);
    for (auto& x : u) x = U(rng);
    for (auto& x : v) x = U(rng);
    const double kuu = intersection_kernel(u, u);
    EXPECT_DOUBLE_EQ(kuu, std::accumulate(u.begin(), u.end(), 0.0));
    EXPECT_LE(intersection_kernel(u, v), kuu + 1e-15);
  }
}

TEST(Smo, MatchesExactQpOnRandomProblems) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> size(3, 6);
  const double Cs[] = {0.05, 0.3, 1.0, 5.0};
  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<std::vector<double>> pts(n, std::vector<double>(5));
    for (auto& p : pts) {
      for (auto& x : p) x = U(rng);
    }
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = U(rng) < 0.5 ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const double C = Cs[t % 4];
    const auto g = gram_of(pts);
    const SvmDual dual = solve_svm_dual(g, y, C, 1e-6, 100000);

    std::vector<std::vector<double>> K(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) K[i][j] = g[i * n + j];
    }
    const auto exact = oracle::svm_dual_qp(K, y, C);
    ASSERT_EQ(exact.size(), n) << "oracle found no KKT point, trial " << t;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(dual.alpha[i], exact[i], 1e-3) << "trial " << t << " i " << i;
    }
    EXPECT_NEAR(dual_objective(g, y, dual.alpha), dual_objective(g, y, exact), 1e-5);
    EXPECT_LE(kkt_gap(g, y, dual.alpha, C), 1e-6 + 1e-12);
  }
}

TEST(Smo, KktGapSmallOnSeparableSets) {
  std::mt19937_64 rng(5);
  std::vector<FeatureVector> f;
  std::vector<int> labels;
  blobs(rng, 60, f, labels);
  std::vector<std::vector<double>> pts;
  std::vector<int> y;
  for (std::size_t i = 0; i < f.size(); ++i) {
    pts.push_back(f[i].values);
    y.push_back(labels[i] ? 1 : -1);
  }
  const auto g = gram_of(pts);
  const SvmDual dual = solve_svm_dual(g, y, 1.0, 1e-3, 100000);
  EXPECT_LT(kkt_gap(g, y, dual.alpha, 1.0), 1e-3);
  double ya = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GE(dual.alpha[i], 0.0);
    EXPECT_LE(dual.alpha[i], 1.0);
    ya += y[i] * dual.alpha[i];
  }
  EXPECT_NEAR(ya, 0.0, 1e-9);
}

TEST(Smo, RejectsSingleClass) {
  const std::vector<double> g{1, 0, 0, 1};
  const std::vector<int> y{1, 1};
  try {
    solve_svm_dual(g, y, 1.0, 1e-3, 100);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("both classes"), std::string::npos);
  }
}

TEST(Smo, IterationBudgetRaisesConvergenceError) {
  std::mt19937_64 rng(8);
  std::vector<FeatureVector> f;
  std::vector<int> labels;
  blobs(rng, 40, f, labels);
  std::vector<std::vector<double>> pts;
  std::vector<int> y;
  for (std::size_t i = 0; i < f.size(); ++i) {
    pts.push_back(f[i].values);
    y.push_back(labels[i] ? 1 : -1);
  }
  EXPECT_THROW(solve_svm_dual(gram_of(pts), y, 10.0, 1e-12, 2), ConvergenceError);
}

TEST(UnaryModel, CoefficientsBoundedAndBalanced) {
  std::mt19937_64 rng(11);
  std::vector<FeatureVector> f;
  std::vector<int> labels;
  blobs(rng, 50, f, labels);
  // some label noise so bounded coefficients appear
  labels[0] ^= 1;
  labels[7] ^= 1;
  TrainConfig cfg;
  cfg.C = 0.5;
  const UnaryModel m = train_iksvm(f, labels, cfg, "bag");
  EXPECT_EQ(m.attribute, "bag");
  EXPECT_EQ(m.dim, 6u);
  double sum = 0;
  for (double c : m.dual_coefs) {
    EXPECT_LE(std::abs(c), cfg.C + 1e-12);
    EXPECT_NE(c, 0.0);
    sum += c;
  }
  EXPECT_NEAR(sum, 0.0, 1e-9);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double p = predict_proba(m, f[i]);
    EXPECT_GE(p, cfg.calib_eps);
    EXPECT_LE(p, 1 - cfg.calib_eps);
    correct += (p >= 0.5) == (labels[i] == 1);
  }
  EXPECT_GE(correct, 46u);
}

TEST(UnaryModel, TrainingIsDeterministic) {
  std::mt19937_64 rng(12);
  std::vector<FeatureVector> f;
  std::vector<int> labels;
  blobs(rng, 30, f, labels);
  const UnaryModel a = train_iksvm(f, labels, TrainConfig{});
  const UnaryModel b = train_iksvm(f, labels, TrainConfig{});
  EXPECT_EQ(a.dual_coefs, b.dual_coefs);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.calib_A, b.calib_A);
}

TEST(UnaryModel, SaveLoadRoundTrip) {
  oracle::TempDir dir("unary");
  std::mt19937_64 rng(13);
  std::vector<FeatureVector> f;
  std::vector<int> labels;
  blobs(rng, 20, f, labels);
  const UnaryModel m = train_iksvm(f, labels, TrainConfig{}, "hat");
  save_unary_model(dir.path() / "hat.model", m);
  const UnaryModel r = load_unary_model(dir.path() / "hat.model");
  EXPECT_EQ(r.attribute, "hat");
  EXPECT_EQ(r.support_vectors, m.support_vectors);
  EXPECT_EQ(r.dual_coefs, m.dual_coefs);
  EXPECT_EQ(r.bias, m.bias);
  for (const auto& x : f) EXPECT_EQ(predict_proba(r, x), predict_proba(m, x));
  EXPECT_THROW(r.decision(std::vector<double>(3)), Error);
  EXPECT_THROW(load_unary_model(dir.path() / "none.model"), Error);
}

TEST(Platt, SymmetricScoresGiveHalfAtZero) {
  const std::vector<double> s{-3, -2, -1, 1, 2, 3};
  const std::vector<int> l{0, 0, 0, 1, 1, 1};
  const PlattParams p = fit_platt(s, l);
  EXPECT_NEAR(p.B, 0.0, 1e-6);
  EXPECT_LT(p.A, 0.0);
  UnaryModel m;
  m.calib_A = p.A;
  m.calib_B = p.B;
  EXPECT_NEAR(probability_from_score(m, 0.0), 0.5, 1e-6);
  EXPECT_GT(probability_from_score(m, 2.0), 0.5);
}

TEST(Platt, ClampsAndRejectsOneClass) {
  UnaryModel m;
  m.calib_A = -100;
  m.calib_B = 0;
  m.calib_eps = 1e-6;
  EXPECT_DOUBLE_EQ(probability_from_score(m, 50.0), 1 - 1e-6);
  EXPECT_DOUBLE_EQ(probability_from_score(m, -50.0), 1e-6);
  const std::vector<double> s{1, 2};
  const std::vector<int> l{1, 1};
  EXPECT_THROW(fit_platt(s, l), Error);
}

TEST(Augment, GrowsPositivesDeterministically) {
  std::vector<Sample> pos(3);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i].id = "p" + std::to_string(i);
    pos[i].image = cv::Mat(20, 10, CV_8UC3, cv::Scalar(40 * i, 100, 200));
    pos[i].mask = cv::Mat(20, 10, CV_8U, cv::Scalar(1));
  }
  const auto a = augment_positives(pos, 8, JitterConfig{}, 4);
  const auto b = augment_positives(pos, 8, JitterConfig{}, 4);
  ASSERT_EQ(a.size(), 8u);
  EXPECT_EQ(a[0].id, "p0");
  EXPECT_EQ(a[2].id, "p2");
  EXPECT_EQ(a[3].id, "p0#aug0");
  EXPECT_EQ(a[7].id, "p1#aug4");
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(a[i].image.size(), pos[0].image.size());
    EXPECT_EQ(cv::norm(a[i].image, b[i].image, cv::NORM_INF), 0.0);
  }
  EXPECT_THROW(augment_positives({}, 4, JitterConfig{}, 1), Error);
  EXPECT_THROW(augment_positives(pos, 2, JitterConfig{}, 1), Error);
  JitterConfig bad;
  bad.scale_min = 2.0;
  EXPECT_THROW(augment_positives(pos, 5, bad, 1), Error);
}

TEST(Augment, IdentityJitterCopiesPixels) {
  Sample s;
  s.image = cv::Mat(8, 8, CV_8UC3, cv::Scalar(1, 2, 3));
  const Sample j = jitter_sample(s, 1.0, 0.0);
  EXPECT_EQ(cv::norm(j.image, s.image, cv::NORM_INF), 0.0);
}
