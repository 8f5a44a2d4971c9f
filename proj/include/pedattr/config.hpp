#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pedattr/dataset.hpp"
#include "pedattr/features.hpp"
#include "pedattr/inference.hpp"
#include "pedattr/synthetic.hpp"

namespace pedattr {

using ConfigMap = std::map<std::string, std::string>;

/// Everything a pipeline run depends on. Paths under `out` and the cache
/// directory do not influence results and stay out of the config hash.
struct RunConfig {
  std::filesystem::path manifest;  // empty: synthetic data
  SynthConfig synth;

  std::vector<Scheme> schemes{Scheme::ForeWhole};
  std::vector<Regime> regimes{Regime::IkSvm, Regime::MrfG1, Regime::MrfG2, Regime::MrfR1,
                              Regime::MrfR2};
  /// "", "gauss" or "forest"; restricts the MRF regimes.
  std::string pairwise;
  std::vector<std::string> attributes;  // empty: all

  int height = 128;
  int width = 48;
  int strips = 6;
  int bins = 16;
  std::filesystem::path filter_bank;  // empty: built-in bank

  double C = 1.0;
  bool tune_C = true;
  bool augment = true;
  std::size_t max_passes = 1000;

  std::size_t k = 5;
  double lambda = 1.0;
  double sigma = 0.0;  // <= 0: tuned on the verify split
  std::size_t trees = 100;
  std::size_t forest_depth = 12;
  std::size_t forest_min_leaf = 5;
  std::size_t forest_samples = 0;

  SplitRatios split;
  std::uint64_t seed = 1;

  std::filesystem::path out = "report";
  std::filesystem::path cache_dir;  // empty: $PEDATTR_CACHE_DIR, else no cache

  /// Checks value ranges and that referenced input paths exist.
  void validate() const;
  /// Regimes left after the `pairwise` filter.
  std::vector<Regime> active_regimes() const;
};

/// Reads `key = value` lines; '#' starts a comment.
ConfigMap read_config_file(const std::filesystem::path& path);
/// Applies every key in `map` onto `cfg`; unknown keys are errors.
void apply_config(const ConfigMap& map, RunConfig& cfg);
/// Canonical key/value form of the result-relevant fields.
ConfigMap config_to_map(const RunConfig& cfg);
/// FNV-1a over the canonical form, hex.
std::string config_hash(const RunConfig& cfg);

}  // namespace pedattr
