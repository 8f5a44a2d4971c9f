#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pedattr/error.hpp"
#include "pedattr/features.hpp"

namespace pedattr {

struct TrainConfig {
  double C = 1.0;
  /// Stopping threshold on the maximal violating pair gap.
  double kkt_tol = 1e-3;
  /// Iteration budget is max_passes * n.
  std::size_t max_passes = 1000;
  /// Probabilities are clamped to [calib_eps, 1 - calib_eps].
  double calib_eps = 1e-6;
  /// Seeds positive augmentation in the pipeline; SMO itself is pivot-deterministic.
  std::uint64_t seed = 0;
  /// Kernel row cache budget for large training sets.
  std::size_t cache_mb = 512;

  void validate() const;
};

/// sum_i min(u_i, v_i). Throws on length mismatch.
double intersection_kernel(std::span<const double> u, std::span<const double> v);
double intersection_kernel(const FeatureVector& u, const FeatureVector& v);

/// Dual solution of the soft-margin SVM
///   max sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij,
///   0 <= alpha <= C, sum(alpha_i y_i) = 0.
struct SvmDual {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  /// Maximal violating pair gap at exit.
  double gap = 0.0;
};

/// Thrown when SMO exhausts its iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double gap)
      : Error(what), iterations(iterations), gap(gap) {}
  std::size_t iterations;
  double gap;
};

/// SMO with maximal-violating-pair working set selection on a dense
/// row-major Gram matrix. `y` entries are +1 / -1.
SvmDual solve_svm_dual(std::span<const double> gram, std::span<const int> y, double C,
                       double tol, std::size_t max_iterations);

/// Maximal violating pair gap m(alpha) - M(alpha) recomputed from scratch.
/// Zero or negative means the KKT conditions hold exactly.
double kkt_gap(std::span<const double> gram, std::span<const int> y,
               std::span<const double> alpha, double C);

/// Sigmoid calibration P(positive | f) = 1 / (1 + exp(A f + B)).
struct PlattParams {
  double A = -1.0;
  double B = 0.0;
};

/// Maximum-likelihood sigmoid fit with smoothed targets (Newton iterations
/// with backtracking). `labels` are 0/1; both classes must be present.
PlattParams fit_platt(std::span<const double> scores, std::span<const int> labels);

struct UnaryModel {
  std::string attribute;
  std::vector<std::vector<double>> support_vectors;
  /// alpha_i * y_i, each in [-C, C], summing to zero.
  std::vector<double> dual_coefs;
  double bias = 0.0;
  double calib_A = -1.0;
  double calib_B = 0.0;
  double calib_eps = 1e-6;
  std::size_t dim = 0;

  /// sum_i coef_i K(sv_i, u) + bias
  double decision(std::span<const double> u) const;
};

/// Trains an intersection-kernel SVM. Labels are 0/1. The calibration is
/// initialised from the training scores; call calibrate() with held-out
/// data to replace it.
UnaryModel train_iksvm(const std::vector<FeatureVector>& features,
                       std::span<const int> labels, const TrainConfig& cfg,
                       std::string attribute = {});

/// Refits the sigmoid on held-out (features, 0/1 labels).
void calibrate(UnaryModel& model, const std::vector<FeatureVector>& features,
               std::span<const int> labels);

/// Calibrated P(positive | u), clamped to [calib_eps, 1 - calib_eps].
double predict_proba(const UnaryModel& model, const FeatureVector& u);
double probability_from_score(const UnaryModel& model, double score);

void save_unary_model(const std::filesystem::path& path, const UnaryModel& model);
UnaryModel load_unary_model(const std::filesystem::path& path);

}  // namespace pedattr
