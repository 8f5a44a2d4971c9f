#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pedattr/dataset.hpp"

namespace pedattr {

/// Attribute cues the renderer knows, in registry order.
enum class SynthAttribute { UpperRed, LowerDark, Hat, Bag, Stripes, LongHair };
inline constexpr int kSynthAttributes = 6;

std::string synth_attribute_name(SynthAttribute a);

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t attrs = 4;
  double noise = 0.0;
  std::uint64_t seed = 1;
  /// Samples per identity on average; identities share appearance and labels.
  std::size_t cluster_size = 8;
  int height = 128;
  int width = 48;
  /// Whole identities go to one split, so test people are never seen in
  /// training. Off: splits are left unset.
  bool identity_splits = true;
  SplitRatios ratios;

  void validate() const;
  /// Stable textual id used in report metadata.
  std::string dataset_id() const;
};

/// Procedural crops. Each identity fixes a background, clothing colors and a
/// label per attribute; its samples vary in pose offset, lighting and pixel
/// noise. Each attribute's cue is independently drawn flipped with
/// probability `noise`; the label stays the identity's. Masks cover the person
/// exactly.
Dataset generate_synthetic(const SynthConfig& cfg);

/// Rendering parameters of one sample, kept so tests can check the labels.
struct SynthRender {
  std::vector<bool> cue;  // per attribute, what was drawn
  int dx = 0;
  int dy = 0;
};

Dataset generate_synthetic(const SynthConfig& cfg, std::vector<SynthRender>* renders);

}  // namespace pedattr
