#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pedattr/dataset.hpp"

namespace pedattr {

struct JitterConfig {
  double scale_min = 0.9;
  double scale_max = 1.1;
  double rotation_min_deg = -10.0;
  double rotation_max_deg = 10.0;
};

/// Rescales and rotates the crop about its centre, keeping its size.
/// Image uses bilinear sampling with reflected borders; the mask uses
/// nearest-neighbour sampling and zero outside the source.
Sample jitter_sample(const Sample& sample, double scale, double rotation_deg);

/// Grows `positives` to `target_count` samples: the originals in order, then
/// jittered copies cycling through the originals. Copy j gets id
/// "<id>#aug<j>". Deterministic for a fixed seed.
std::vector<Sample> augment_positives(const std::vector<Sample>& positives,
                                      std::size_t target_count,
                                      const JitterConfig& jitter, std::uint64_t seed);

}  // namespace pedattr
