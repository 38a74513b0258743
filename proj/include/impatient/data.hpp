#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impatient/checkpoint.hpp"
#include "impatient/tensor.hpp"

namespace impatient {

enum class Split : std::uint8_t { train, val, test };

std::string to_string(Split split);

/// Labelled images (N x C x H x W) with a split tag per example.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<Split> splits;

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> indices(Split split) const;
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Examples tagged `split`, re-tagged as `split`.
  Dataset select(Split split) const;
  /// Checks labels < num_classes and consistent extents.
  void validate() const;
};

/// Reads an IDX image file (magic 0x00000803, u8 pixels, big-endian extents)
/// and an IDX label file (magic 0x00000801). Pixels are scaled to [0, 1].
/// When `num_classes` is given, any label >= num_classes is an error;
/// otherwise the class count is max label + 1. All examples tagged train.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> num_classes = std::nullopt);

/// Writes images (quantized to u8 via round(v * 255), clamped) and labels as
/// an IDX pair. Images must have a single channel.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& data);

/// One example per line: label, then prod(example_shape) pixel values.
Dataset load_csv(const std::string& path, const Shape& example_shape,
                 std::optional<std::size_t> num_classes = std::nullopt);

/// Splits each class proportionally to `fractions` (1 to 3 parts tagged
/// train, val, test in order). Per-class counts use largest-remainder
/// rounding; the per-class shuffle is seeded.
Dataset stratified_split(const Dataset& data, const std::vector<double>& fractions,
                         std::uint64_t seed);

/// Per-channel mean and standard deviation over the train split only.
Normalization fit_normalization(const Dataset& data);
void apply_normalization(Dataset& data, const Normalization& norm);
void apply_normalization(Tensor& images, const Normalization& norm);

}  // namespace impatient
