#include "pedattr/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "pedattr/error.hpp"

namespace pedattr {

namespace fs = std::filesystem;

void FilterBankConfig::validate() const {
  if (gabor.size() != static_cast<std::size_t>(kGaborFilters) ||
      schmid.size() != static_cast<std::size_t>(kSchmidFilters)) {
    throw Error("filter bank needs exactly 8 Gabor and 13 Schmid filters, got " +
                std::to_string(gabor.size()) + " and " +
                std::to_string(schmid.size()));
  }
  for (const auto& g : gabor) {
    if (!(g.wavelength > 0 && g.aspect > 0 && g.bandwidth > 0)) {
      throw Error("Gabor wavelength, aspect and bandwidth must be positive");
    }
  }
  for (const auto& s : schmid) {
    if (!(s.sigma > 0)) throw Error("Schmid sigma must be positive");
  }
}

FilterBankConfig default_filter_bank() {
  FilterBankConfig bank;
  // 2 orientations x 2 wavelengths x 2 (aspect, bandwidth) settings
  for (double orientation : {0.0, std::numbers::pi / 2}) {
    for (auto [aspect, bandwidth] : {std::pair{0.3, 2.0}, std::pair{0.4, 1.0}}) {
      for (double wavelength : {4.0, 8.0}) {
        bank.gabor.push_back({orientation, wavelength, aspect, bandwidth});
      }
    }
  }
  bank.schmid = {{2, 1}, {4, 1}, {4, 2}, {6, 1}, {6, 2}, {6, 3}, {8, 1},
                 {8, 2}, {8, 3}, {10, 1}, {10, 2}, {10, 3}, {10, 4}};
  return bank;
}

FilterBankConfig load_filter_bank(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open filter bank " + path.string());
  FilterBankConfig bank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    if (kind == "gabor") {
      GaborParams g;
      double deg;
      if (!(ss >> deg >> g.wavelength >> g.aspect >> g.bandwidth)) {
        throw Error("filter bank line " + std::to_string(lineno) + ": expected 4 numbers");
      }
      g.orientation = deg * std::numbers::pi / 180.0;
      bank.gabor.push_back(g);
    } else if (kind == "schmid") {
      SchmidParams s;
      if (!(ss >> s.sigma >> s.tau)) {
        throw Error("filter bank line " + std::to_string(lineno) + ": expected 2 numbers");
      }
      bank.schmid.push_back(s);
    } else {
      throw Error("filter bank line " + std::to_string(lineno) + ": unknown filter '" +
                  kind + "'");
    }
  }
  bank.validate();
  return bank;
}

namespace {

cv::Mat gabor_kernel(const GaborParams& g) {
  const double sx = std::sqrt(g.bandwidth);
  const double sy = sx / g.aspect;
  const int radius = static_cast<int>(std::ceil(3.0 * std::max(sx, sy)));
  const int size = 2 * radius + 1;
  cv::Mat k(size, size, CV_64F);
  const double c = std::cos(g.orientation), s = std::sin(g.orientation);
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      const double xr = x * c + y * s;
      const double yr = -x * s + y * c;
      k.at<double>(y + radius, x + radius) =
          std::exp(-(xr * xr + g.aspect * g.aspect * yr * yr) / (2.0 * g.bandwidth)) *
          std::cos(2.0 * std::numbers::pi * xr / g.wavelength);
    }
  }
  return k;
}

cv::Mat schmid_kernel(const SchmidParams& p) {
  const int radius = static_cast<int>(std::ceil(3.0 * p.sigma));
  const int size = 2 * radius + 1;
  cv::Mat k(size, size, CV_64F);
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      const double r = std::hypot(x, y);
      k.at<double>(y + radius, x + radius) =
          std::cos(std::numbers::pi * p.tau * r / p.sigma) *
          std::exp(-r * r / (2.0 * p.sigma * p.sigma));
    }
  }
  k -= cv::mean(k)[0];
  k /= cv::norm(k, cv::NORM_L1);
  return k;
}

}  // namespace

std::vector<cv::Mat> make_filter_kernels(const FilterBankConfig& bank) {
  bank.validate();
  std::vector<cv::Mat> kernels;
  for (const auto& g : bank.gabor) kernels.push_back(gabor_kernel(g));
  for (const auto& s : bank.schmid) kernels.push_back(schmid_kernel(s));
  return kernels;
}

ChannelStack compute_channels(const cv::Mat& rgb, const FilterBankConfig& bank) {
  if (rgb.empty() || rgb.rows == 0 || rgb.cols == 0) {
    throw Error("compute_channels: zero-area image");
  }
  if (rgb.type() != CV_8UC3) throw Error("compute_channels: expected 8-bit RGB image");

  const int rows = rgb.rows, cols = rgb.cols;
  ChannelStack stack;
  stack.channels.reserve(kChannels);
  for (int c = 0; c < kColorChannels; ++c) stack.channels.emplace_back(rows, cols, CV_32F);

  for (int y = 0; y < rows; ++y) {
    const auto* px = rgb.ptr<cv::Vec3b>(y);
    std::array<float*, kColorChannels> out;
    for (int c = 0; c < kColorChannels; ++c) out[c] = stack.channels[c].ptr<float>(y);
    for (int x = 0; x < cols; ++x) {
      const double r = px[x][0] / 255.0, g = px[x][1] / 255.0, b = px[x][2] / 255.0;
      // full-range BT.601 YCbCr
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      const double cb = 0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      const double cr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b;
      const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
      const double delta = mx - mn;
      double hue = 0.0;
      if (delta > 0) {
        if (mx == r) hue = std::fmod((g - b) / delta + 6.0, 6.0);
        else if (mx == g) hue = (b - r) / delta + 2.0;
        else hue = (r - g) / delta + 4.0;
        hue /= 6.0;
      }
      const double sat = mx > 0 ? delta / mx : 0.0;
      const double vals[kColorChannels] = {r, g, b, luma, cb, cr, hue, sat};
      for (int c = 0; c < kColorChannels; ++c) {
        out[c][x] = static_cast<float>(std::clamp(vals[c], 0.0, 1.0));
      }
    }
  }

  const cv::Mat& luma = stack.channels[3];
  for (const cv::Mat& kernel : make_filter_kernels(bank)) {
    double pos = 0, neg = 0;
    for (auto it = kernel.begin<double>(); it != kernel.end<double>(); ++it) {
      (*it > 0 ? pos : neg) += std::abs(*it);
    }
    cv::Mat kf;
    kernel.convertTo(kf, CV_32F);
    cv::Mat response;
    cv::filter2D(luma, response, CV_32F, kf, cv::Point(-1, -1), 0.0,
                 cv::BORDER_REFLECT_101);
    // input in [0,1] => response in [-neg, pos]
    response = (response + neg) / (pos + neg);
    cv::min(cv::max(response, 0.0), 1.0, response);
    stack.channels.push_back(std::move(response));
  }
  return stack;
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Whole: return "whole";
    case Scheme::Fore: return "fore";
    case Scheme::ForeBack: return "fore-back";
    case Scheme::ForeWhole: return "fore-whole";
  }
  return "?";
}

Scheme parse_scheme(std::string_view token) {
  if (token == "whole") return Scheme::Whole;
  if (token == "fore") return Scheme::Fore;
  if (token == "fore-back") return Scheme::ForeBack;
  if (token == "fore-whole") return Scheme::ForeWhole;
  throw Error("unknown scheme '" + std::string(token) +
              "' (expected whole|fore|fore-back|fore-whole)");
}

int scheme_regions(Scheme s) {
  return (s == Scheme::ForeBack || s == Scheme::ForeWhole) ? 2 : 1;
}

std::vector<double> strip_counts(const ChannelStack& stack,
                                 const std::optional<cv::Mat>& region_mask,
                                 int strips, int bins) {
  if (strips < 1 || bins < 1) throw Error("strips and bins must be >= 1");
  if (stack.channels.empty()) throw Error("empty channel stack");
  const int rows = stack.rows(), cols = stack.cols();
  if (region_mask && (region_mask->rows != rows || region_mask->cols != cols ||
                      region_mask->type() != CV_8U)) {
    throw Error("region mask must be CV_8U with the stack's dimensions");
  }
  const auto nch = static_cast<int>(stack.channels.size());
  std::vector<double> counts(static_cast<std::size_t>(nch) * strips * bins, 0.0);
  for (int s = 0; s < strips; ++s) {
    const int r0 = s * rows / strips, r1 = (s + 1) * rows / strips;
    for (int c = 0; c < nch; ++c) {
      double* block = counts.data() + (static_cast<std::size_t>(c) * strips + s) * bins;
      for (int y = r0; y < r1; ++y) {
        const float* v = stack.channels[c].ptr<float>(y);
        const std::uint8_t* m = region_mask ? region_mask->ptr<std::uint8_t>(y) : nullptr;
        for (int x = 0; x < cols; ++x) {
          if (m && !m[x]) continue;
          int b = static_cast<int>(v[x] * bins);
          b = std::clamp(b, 0, bins - 1);
          block[b] += 1.0;
        }
      }
    }
  }
  return counts;
}

FeatureVector strip_histograms(const ChannelStack& stack,
                               const std::optional<cv::Mat>& region_mask,
                               int strips, int bins) {
  FeatureVector fv;
  fv.channels = static_cast<int>(stack.channels.size());
  fv.strips = strips;
  fv.bins = bins;
  fv.values = strip_counts(stack, region_mask, strips, bins);
  for (std::size_t off = 0; off < fv.values.size(); off += bins) {
    double total = 0;
    for (int b = 0; b < bins; ++b) total += fv.values[off + b];
    if (total > 0) {
      for (int b = 0; b < bins; ++b) fv.values[off + b] /= total;
    }
  }
  return fv;
}

FeatureVector compose_scheme(const FeatureVector& fore, const FeatureVector& back,
                             const FeatureVector& whole, Scheme scheme) {
  if (!fore.same_layout(back) || !fore.same_layout(whole) || fore.regions != 1 ||
      back.regions != 1 || whole.regions != 1 || fore.dim() != whole.dim() ||
      back.dim() != whole.dim()) {
    throw Error("compose_scheme: inputs have mismatched layouts");
  }
  FeatureVector out = whole;
  out.scheme = scheme;
  switch (scheme) {
    case Scheme::Whole:
      break;
    case Scheme::Fore:
      out.values = fore.values;
      break;
    case Scheme::ForeBack:
    case Scheme::ForeWhole: {
      const FeatureVector& second = scheme == Scheme::ForeBack ? back : whole;
      out.regions = 2;
      out.values = fore.values;
      out.values.insert(out.values.end(), second.values.begin(), second.values.end());
      break;
    }
  }
  return out;
}

Sample resize_sample(const Sample& sample, int height, int width) {
  Sample out = sample;
  if (sample.image.rows == height && sample.image.cols == width) return out;
  cv::resize(sample.image, out.image, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  if (sample.mask) {
    cv::Mat m;
    cv::resize(*sample.mask, m, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
    out.mask = m;
  }
  return out;
}

FeatureVector extract_features(const Sample& sample, const FilterBankConfig& bank,
                               const FeatureConfig& cfg) {
  const Sample s = resize_sample(sample, cfg.height, cfg.width);
  const ChannelStack stack = compute_channels(s.image, bank);
  const FeatureVector whole = strip_histograms(stack, std::nullopt, cfg.strips, cfg.bins);
  if (cfg.scheme == Scheme::Whole) return compose_scheme(whole, whole, whole, cfg.scheme);

  cv::Mat fore_mask = s.mask ? *s.mask : cv::Mat(s.image.size(), CV_8U, cv::Scalar(1));
  cv::Mat back_mask = 1 - fore_mask;
  const FeatureVector fore = strip_histograms(stack, fore_mask, cfg.strips, cfg.bins);
  const FeatureVector back = cfg.scheme == Scheme::ForeBack
                                 ? strip_histograms(stack, back_mask, cfg.strips, cfg.bins)
                                 : whole;
  return compose_scheme(fore, back, whole, cfg.scheme);
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

void write_feature_file(const fs::path& path, const std::vector<std::string>& ids,
                        const std::vector<FeatureVector>& features) {
  if (ids.size() != features.size()) throw Error("ids/features size mismatch");
  if (features.empty()) throw Error("no features to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature file " + path.string());
  const FeatureVector& f0 = features.front();
  out << "pedattr-features v1 " << f0.channels << ' ' << f0.strips << ' ' << f0.bins
      << '\n';
  std::string line;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const FeatureVector& f = features[i];
    if (!f.same_layout(f0)) throw Error("feature layouts differ within one file");
    line.clear();
    line += ids[i];
    line += '\t';
    line += to_string(f.scheme);
    line += '\t';
    line += std::to_string(f.dim());
    line += '\t';
    for (std::size_t j = 0; j < f.values.size(); ++j) {
      if (j) line += ' ';
      append_double(line, f.values[j]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("write failed for " + path.string());
}

FeatureFile read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty feature file " + path.string());
  std::istringstream header(line);
  std::string magic, version;
  int channels = 0, strips = 0, bins = 0;
  if (!(header >> magic >> version >> channels >> strips >> bins) ||
      magic != "pedattr-features" || version != "v1") {
    throw Error("bad feature file header in " + path.string());
  }
  FeatureFile file;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const char* why) {
      throw Error("feature file line " + std::to_string(lineno) + ": " + why);
    };
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    const auto t3 = t2 == std::string::npos ? t2 : line.find('\t', t2 + 1);
    if (t3 == std::string::npos) fail("expected 4 tab-separated fields");
    FeatureVector fv;
    fv.channels = channels;
    fv.strips = strips;
    fv.bins = bins;
    fv.scheme = parse_scheme(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    fv.regions = scheme_regions(fv.scheme);
    const std::size_t dim = std::stoul(line.substr(t2 + 1, t3 - t2 - 1));
    fv.values.reserve(dim);
    const char* p = line.data() + t3 + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      double v;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) fail("bad number");
      fv.values.push_back(v);
      p = res.ptr;
      while (p < end && *p == ' ') ++p;
    }
    if (fv.values.size() != dim) fail("value count does not match dim");
    if (dim != static_cast<std::size_t>(channels) * strips * bins * fv.regions) {
      fail("dim does not match layout");
    }
    file.ids.push_back(line.substr(0, t1));
    file.features.push_back(std::move(fv));
  }
  return file;
}

}  // namespace pedattr
