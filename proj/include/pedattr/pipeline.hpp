#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pedattr/augment.hpp"
#include "pedattr/config.hpp"
#include "pedattr/dataset.hpp"
#include "pedattr/features.hpp"
#include "pedattr/inference.hpp"
#include "pedattr/report.hpp"
#include "pedattr/similarity.hpp"
#include "pedattr/svm.hpp"

namespace pedattr {

using Progress = std::function<void(const std::string&)>;

struct PreparedDataset {
  Dataset dataset;
  std::string id;
};

/// Loads the manifest (or renders the synthetic set), keeps the configured
/// attributes and assigns seeded splits when any sample lacks one.
PreparedDataset prepare_dataset(const RunConfig& cfg);

FilterBankConfig filter_bank_for(const RunConfig& cfg);
FeatureConfig feature_config_for(const RunConfig& cfg, Scheme scheme);
ForestConfig forest_config_for(const RunConfig& cfg);

/// cfg.cache_dir, else $PEDATTR_CACHE_DIR, else empty (no caching).
std::filesystem::path resolve_cache_dir(const RunConfig& cfg);

/// Features of every sample in dataset order. With a cache directory the
/// result is read from, or written to, a file keyed by dataset id, bank and
/// layout.
std::vector<FeatureVector> dataset_features(const Dataset& dataset, const std::string& dataset_id,
                                            const FilterBankConfig& bank,
                                            const FeatureConfig& fcfg,
                                            const std::filesystem::path& cache_dir = {});

struct UnaryOptions {
  TrainConfig train;
  bool augment = true;
  JitterConfig jitter;
  bool tune_C = true;
  std::vector<double> C_grid{1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
};

/// Trains on the training split (labeled samples only), jittering positives
/// up to the negative count when they are the minority, and calibrates on
/// the verify split. Falls back to the training scores for calibration when
/// the verify split lacks a class.
UnaryModel train_attribute_model(const Dataset& dataset, std::size_t attr,
                                 const std::vector<FeatureVector>& features,
                                 const FilterBankConfig& bank, const FeatureConfig& fcfg,
                                 const UnaryOptions& opts, std::uint64_t seed);

/// Calibrated P(l = 1) for every feature vector.
std::vector<double> attribute_probabilities(const UnaryModel& model,
                                            const std::vector<FeatureVector>& features);

RegimeData make_regime_data(const Dataset& dataset, const std::vector<FeatureVector>& features,
                            std::vector<std::vector<double>> prob);

/// Per-attribute accuracy of a regime's target labels against the truth;
/// nodes with unknown truth are skipped.
std::vector<Accuracy> score_regime(const RegimeData& data, const RegimeResult& result);

/// Candidate sigmas: quantiles of pairwise distances over a deterministic
/// subsample of nodes.
std::vector<double> sigma_candidates(const std::vector<FeatureVector>& features);

/// Picks the candidate with the best mean verify accuracy (first on ties).
double tune_sigma(Regime regime, const RegimeData& data, std::size_t k, double lambda);

/// extract -> train -> infer -> evaluate for every scheme and regime.
EvalReport run_pipeline(const RunConfig& cfg, const Progress& progress = {});

struct Predictions {
  std::vector<std::string> attributes;
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint8_t>> labels;  // [node][attribute]
};

void write_predictions(const std::filesystem::path& path, const Predictions& p);
Predictions read_predictions(const std::filesystem::path& path);

}  // namespace pedattr
