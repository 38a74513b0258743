#pragma once

#include <cstdint>

#include "impatient/data.hpp"

namespace impatient {

/// Ten-class grayscale images whose class evidence lives at two spatial
/// scales:
///
///   classes 0-4  coarse layouts: bright left half, right half, top half,
///                bottom half, or central disk (boundary jittered by up to
///                `jitter` pixels);
///   classes 5-9  a 5x5 stroke motif (plus, diagonal cross, L, T, ring) at a
///                random position on a flat background.
///
/// Every image also carries `distractors` random 3-pixel bars and Gaussian
/// pixel noise, and is clamped to [0, 1]. Coarse layouts are visible after a
/// single conv block; telling motifs apart from distractor bars requires
/// composing strokes, i.e. depth.
struct SyntheticConfig {
  std::size_t per_class = 400;
  std::size_t image_size = 16;
  double background = 0.1;
  double min_amplitude = 0.5;
  double max_amplitude = 0.9;
  double noise = 0.15;
  std::size_t distractors = 3;
  std::size_t jitter = 2;
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kSyntheticClasses = 10;

/// Examples are class-interleaved (0, 1, ..., 9, 0, 1, ...) and tagged train.
Dataset generate_scale_cues(const SyntheticConfig& cfg);

}  // namespace impatient
