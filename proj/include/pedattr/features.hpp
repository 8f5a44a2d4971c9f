#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "pedattr/dataset.hpp"

namespace pedattr {

inline constexpr int kColorChannels = 8;
inline constexpr int kGaborFilters = 8;
inline constexpr int kSchmidFilters = 13;
inline constexpr int kChannels = kColorChannels + kGaborFilters + kSchmidFilters;

/// Cosine Gabor on the luminance channel:
///   g(x, y) = exp(-(x'^2 + aspect^2 y'^2) / (2 bandwidth)) cos(2 pi x' / wavelength)
/// with x' = x cos(orientation) + y sin(orientation). `bandwidth` is the
/// variance of the Gaussian envelope.
struct GaborParams {
  double orientation = 0.0;  // radians
  double wavelength = 4.0;   // pixels
  double aspect = 0.3;
  double bandwidth = 2.0;
};

/// Rotation-invariant Schmid filter
///   F(r) = F0 + cos(pi tau r / sigma) exp(-r^2 / (2 sigma^2)),
/// F0 chosen so the kernel has zero mean.
struct SchmidParams {
  double sigma = 2.0;
  double tau = 1.0;
};

struct FilterBankConfig {
  std::vector<GaborParams> gabor;
  std::vector<SchmidParams> schmid;

  /// Throws unless there are exactly 8 Gabor and 13 Schmid filters.
  void validate() const;
};

FilterBankConfig default_filter_bank();

/// Reads a filter bank from text: one filter per line, either
/// `gabor <orientation_deg> <wavelength> <aspect> <bandwidth>` or
/// `schmid <sigma> <tau>`. `#` starts a comment.
FilterBankConfig load_filter_bank(const std::filesystem::path& path);

/// 29 CV_32F planes, all values in [0, 1]:
/// R G B Y Cb Cr H S, then the 8 Gabor and 13 Schmid responses.
struct ChannelStack {
  std::vector<cv::Mat> channels;

  int rows() const { return channels.empty() ? 0 : channels.front().rows; }
  int cols() const { return channels.empty() ? 0 : channels.front().cols; }
};

/// Builds the channel stack of an RGB (CV_8UC3) image. Texture channels are
/// filter responses on Y, mapped affinely from the filter's attainable
/// response range on [0, 1] inputs onto [0, 1].
ChannelStack compute_channels(const cv::Mat& rgb, const FilterBankConfig& bank);

/// The filter kernels in channel order (Gabor first), CV_64F.
std::vector<cv::Mat> make_filter_kernels(const FilterBankConfig& bank);

enum class Scheme { Whole, Fore, ForeBack, ForeWhole };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view token);
/// Number of region descriptors the scheme concatenates (1 or 2).
int scheme_regions(Scheme s);

/// Histogram descriptor. Values are laid out as
/// [region][channel][strip][bin], each 16-bin block L1-normalized or all-zero.
struct FeatureVector {
  Scheme scheme = Scheme::Whole;
  int channels = kChannels;
  int strips = 6;
  int bins = 16;
  int regions = 1;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool same_layout(const FeatureVector& o) const {
    return channels == o.channels && strips == o.strips && bins == o.bins;
  }
};

/// Raw per-(channel, strip) pixel counts over the pixels where
/// `region_mask` is nonzero (all pixels when absent). Layout as FeatureVector.
std::vector<double> strip_counts(const ChannelStack& stack,
                                 const std::optional<cv::Mat>& region_mask,
                                 int strips = 6, int bins = 16);

/// Strip histograms: rows are cut into `strips` horizontal bands
/// (band s spans rows [s*H/strips, (s+1)*H/strips)), values binned over [0,1]
/// with the top bin closed. Blocks with no selected pixels stay all-zero.
FeatureVector strip_histograms(const ChannelStack& stack,
                               const std::optional<cv::Mat>& region_mask,
                               int strips = 6, int bins = 16);

FeatureVector compose_scheme(const FeatureVector& fore, const FeatureVector& back,
                             const FeatureVector& whole, Scheme scheme);

struct FeatureConfig {
  int height = 128;
  int width = 48;
  int strips = 6;
  int bins = 16;
  Scheme scheme = Scheme::ForeWhole;
};

/// Resizes to the working resolution (bilinear image, nearest mask).
Sample resize_sample(const Sample& sample, int height, int width);

/// Full extraction for one sample. Without a mask the foreground is the whole
/// image and the background is empty.
FeatureVector extract_features(const Sample& sample, const FilterBankConfig& bank,
                               const FeatureConfig& cfg);

/// Feature cache file (text, shortest round-trip decimal encoding):
///   pedattr-features v1 <channels> <strips> <bins>
///   <id> TAB <scheme> TAB <dim> TAB <v0> <v1> ...
void write_feature_file(const std::filesystem::path& path,
                        const std::vector<std::string>& ids,
                        const std::vector<FeatureVector>& features);

struct FeatureFile {
  std::vector<std::string> ids;
  std::vector<FeatureVector> features;
};

FeatureFile read_feature_file(const std::filesystem::path& path);

}  // namespace pedattr
