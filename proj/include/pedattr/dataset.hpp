#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

namespace pedattr {

enum class Split : std::uint8_t { Train = 0, Verify = 1, Test = 2 };

enum class Label : std::int8_t { Negative = 0, Positive = 1, Unknown = -1 };

std::string_view to_string(Split s);
Split parse_split(std::string_view token);

/// One pedestrian crop. `image` is CV_8UC3 in RGB order; `mask`, when
/// present, is CV_8UC1 with values in {0, 1} (1 = foreground).
struct Sample {
  std::string id;
  cv::Mat image;
  std::optional<cv::Mat> mask;
  /// Indexed like AttributeRegistry::names.
  std::vector<Label> labels;
  /// Absent until assigned by the manifest or split_partition().
  std::optional<Split> split;

  /// Source files, kept so a loaded dataset can be written back out.
  std::string image_path;
  std::string mask_path;
};

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Ordered attribute names plus per-split label tallies. Slot 3 of each
/// count array holds samples whose split is not yet assigned.
struct AttributeRegistry {
  std::vector<std::string> names;
  std::vector<std::array<ClassCounts, 4>> counts;

  std::size_t size() const { return names.size(); }
  /// Index of `name`, or throws.
  std::size_t index_of(std::string_view name) const;
  ClassCounts count(std::size_t attr, std::optional<Split> split) const;
};

/// Builds a registry for `names`, validating uniqueness, and tallies labels.
AttributeRegistry make_registry(std::vector<std::string> names,
                                const std::vector<Sample>& samples);

/// Recomputes registry tallies from the samples (e.g. after re-splitting).
void recount(AttributeRegistry& registry, const std::vector<Sample>& samples);

struct Dataset {
  AttributeRegistry registry;
  std::vector<Sample> samples;
};

/// Reads a tab-separated manifest. The first line is a header
/// `id  image  mask  split  <attr>...`; each following line is one sample with
/// label tokens `1`, `0` or `?`. Relative paths resolve against the manifest
/// directory. Empty or `-` mask/split fields mean "absent".
Dataset load_manifest(const std::filesystem::path& path);

/// Writes the manifest text for samples whose image_path/mask_path are set.
void write_manifest(const std::filesystem::path& path,
                    const AttributeRegistry& registry,
                    const std::vector<Sample>& samples);

/// Writes every image (and mask) as PNG under `dir` and a manifest.tsv that
/// references them. Updates the samples' paths. Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir,
                                   const AttributeRegistry& registry,
                                   std::vector<Sample>& samples);

struct SplitRatios {
  double train = 0.5;
  double verify = 0.1;
  double test = 0.4;
};

/// Random partition into train/verify/test. Sizes are round(n*train),
/// round(n*verify) and the remainder. Every ratio must be positive and the
/// three must sum to 1 within 1e-9.
std::vector<Sample> split_partition(std::vector<Sample> samples,
                                    SplitRatios ratios, std::uint64_t seed);

}  // namespace pedattr
