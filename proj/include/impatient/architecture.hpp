#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "impatient/layers.hpp"
#include "json.hpp"

namespace impatient {

/// One backbone layer. Unused fields are ignored for a given kind.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t out = 0;     // conv output channels / fc output features
  std::size_t kernel = 3;  // conv
  std::size_t pad = 1;     // conv
  std::size_t window = 2;  // max pool window, grid-pool cells per axis

  bool operator==(const LayerSpec&) const = default;
};

enum class HeadKind { fc_only, avg, avg4x4 };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

/// An early-prediction head reading the output of backbone layer `attach`.
struct HeadSpec {
  std::size_t attach = 0;
  HeadKind kind = HeadKind::avg;

  bool operator==(const HeadSpec&) const = default;
};

struct Architecture {
  Shape input_shape;  // per example, C x H x W
  std::size_t num_classes = 10;
  std::vector<LayerSpec> backbone;
  std::vector<HeadSpec> heads;
  /// Hidden units of an extra FC + ReLU inside each head; 0 disables it.
  std::size_t head_hidden = 0;

  bool operator==(const Architecture&) const = default;

  /// Per-example activation extents after each backbone layer.
  std::vector<Shape> activation_shapes() const;

  /// Throws ConfigError / ShapeError for any invalid combination.
  void validate() const;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);
};

/// Stacked conv -> [BN] -> ReLU -> maxpool blocks with one head after each
/// block. Heads use grid pooling where the block output is at least 4x4 and
/// global pooling otherwise.
Architecture block_architecture(const Shape& input_shape, std::size_t num_classes,
                                const std::vector<std::size_t>& block_channels,
                                bool batchnorm);

/// Five conv stages and two FC stages with a head after each, mirroring the
/// early-prediction placement used for AlexNet. Scaled-down widths.
Architecture alexnet_style_architecture(const Shape& input_shape, std::size_t num_classes,
                                        bool batchnorm);

/// Builds an un-initialized layer for a spec given its per-example input.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input);

}  // namespace impatient
