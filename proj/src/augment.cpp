#include "pedattr/augment.hpp"

#include <string>

#include <opencv2/imgproc.hpp>

#include "pedattr/error.hpp"
#include "pedattr/random.hpp"

namespace pedattr {

Sample jitter_sample(const Sample& sample, double scale, double rotation_deg) {
  Sample out = sample;
  if (scale == 1.0 && rotation_deg == 0.0) {
    out.image = sample.image.clone();
    if (sample.mask) out.mask = sample.mask->clone();
    return out;
  }
  const cv::Point2f centre((sample.image.cols - 1) / 2.0f, (sample.image.rows - 1) / 2.0f);
  const cv::Mat warp = cv::getRotationMatrix2D(centre, rotation_deg, scale);
  cv::warpAffine(sample.image, out.image, warp, sample.image.size(), cv::INTER_LINEAR,
                 cv::BORDER_REFLECT_101);
  if (sample.mask) {
    cv::Mat m;
    cv::warpAffine(*sample.mask, m, warp, sample.mask->size(), cv::INTER_NEAREST,
                   cv::BORDER_CONSTANT, cv::Scalar(0));
    out.mask = m;
  }
  return out;
}

std::vector<Sample> augment_positives(const std::vector<Sample>& positives,
                                      std::size_t target_count, const JitterConfig& jitter,
                                      std::uint64_t seed) {
  if (positives.empty()) throw Error("augment_positives: no positive samples");
  if (target_count < positives.size()) {
    throw Error("augment_positives: target " + std::to_string(target_count) +
                " is below the positive count " + std::to_string(positives.size()));
  }
  if (jitter.scale_min <= 0 || jitter.scale_min > jitter.scale_max ||
      jitter.rotation_min_deg > jitter.rotation_max_deg) {
    throw Error("augment_positives: invalid jitter ranges");
  }
  std::vector<Sample> out = positives;
  out.reserve(target_count);
  Rng rng(seed);
  for (std::size_t j = 0; out.size() < target_count; ++j) {
    const Sample& src = positives[j % positives.size()];
    const double scale = uniform(rng, jitter.scale_min, jitter.scale_max);
    const double angle = uniform(rng, jitter.rotation_min_deg, jitter.rotation_max_deg);
    Sample copy = jitter_sample(src, scale, angle);
    copy.id = src.id + "#aug" + std::to_string(j);
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace pedattr
