#include "impatient/architecture.hpp"

#include <algorithm>

#include "impatient/error.hpp"

namespace impatient {

namespace {

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto kind : {LayerKind::conv2d, LayerKind::fully_connected, LayerKind::relu,
                    LayerKind::max_pool, LayerKind::avg_pool_global, LayerKind::avg_pool_grid,
                    LayerKind::batch_norm}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown layer type '" + name + "'");
}

}  // namespace

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::fc_only: return "fc";
    case HeadKind::avg: return "avg";
    case HeadKind::avg4x4: return "avg4x4";
  }
  return "unknown";
}

HeadKind head_kind_from_string(const std::string& name) {
  for (auto kind : {HeadKind::fc_only, HeadKind::avg, HeadKind::avg4x4}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown head kind '" + name + "'");
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::conv2d:
      if (input.size() != 3) throw ShapeError("conv needs C x H x W input, got " + shape_string(input));
      if (spec.out == 0 || spec.kernel == 0) throw ConfigError("conv needs out > 0 and kernel > 0");
      return std::make_unique<Conv2D>(input[0], spec.out, spec.kernel, spec.pad);
    case LayerKind::fully_connected:
      if (spec.out == 0) throw ConfigError("fc needs out > 0");
      return std::make_unique<FullyConnected>(shape_size(input), spec.out);
    case LayerKind::relu:
      return std::make_unique<ReLU>();
    case LayerKind::max_pool:
      return std::make_unique<MaxPool2D>(spec.window);
    case LayerKind::avg_pool_global:
      return std::make_unique<AvgPoolGlobal>();
    case LayerKind::avg_pool_grid:
      return std::make_unique<AvgPoolGrid>(spec.window);
    case LayerKind::batch_norm:
      if (input.empty()) throw ShapeError("batchnorm needs a nonempty input");
      return std::make_unique<BatchNorm>(input[0]);
  }
  throw ConfigError("unsupported layer kind");
}

std::vector<Shape> Architecture::activation_shapes() const {
  std::vector<Shape> shapes;
  Shape current = input_shape;
  for (const auto& spec : backbone) {
    if (spec.kind == LayerKind::batch_norm && current.size() != 3 && current.size() != 1) {
      throw ShapeError("batchnorm needs C x H x W or flat input, got " + shape_string(current));
    }
    current = make_layer(spec, current)->output_shape(current);
    shapes.push_back(current);
  }
  return shapes;
}

void Architecture::validate() const {
  if (input_shape.size() != 3 || shape_size(input_shape) == 0) {
    throw ConfigError("input shape must be C x H x W, got " + shape_string(input_shape));
  }
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (backbone.empty()) throw ConfigError("backbone is empty");
  if (heads.empty()) throw ConfigError("network needs at least one head");
  const auto shapes = activation_shapes();
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const auto& head = heads[k];
    if (head.attach >= backbone.size()) {
      throw ConfigError("head " + std::to_string(k + 1) + " attaches past the backbone end");
    }
    if (k > 0 && head.attach <= heads[k - 1].attach) {
      throw ConfigError("head attach points must be strictly increasing");
    }
    const Shape& s = shapes[head.attach];
    if (head.kind != HeadKind::fc_only && s.size() != 3) {
      throw ShapeError("pooling head " + std::to_string(k + 1) + " needs a spatial input, got " +
                       shape_string(s));
    }
    if (head.kind == HeadKind::avg4x4 && (s[1] < 4 || s[2] < 4)) {
      throw ShapeError("avg4x4 head " + std::to_string(k + 1) + " needs spatial extent >= 4, got " +
                       shape_string(s));
    }
  }
  if (heads.back().attach != backbone.size() - 1) {
    throw ConfigError("the last head must attach at the backbone output");
  }
}

nlohmann::json Architecture::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : backbone) {
    nlohmann::json j{{"type", to_string(l.kind)}};
    switch (l.kind) {
      case LayerKind::conv2d:
        j["out"] = l.out;
        j["kernel"] = l.kernel;
        j["pad"] = l.pad;
        break;
      case LayerKind::fully_connected:
        j["out"] = l.out;
        break;
      case LayerKind::max_pool:
      case LayerKind::avg_pool_grid:
        j["window"] = l.window;
        break;
      default:
        break;
    }
    layers.push_back(j);
  }
  nlohmann::json heads_json = nlohmann::json::array();
  for (const auto& h : heads) heads_json.push_back({{"after", h.attach}, {"kind", to_string(h.kind)}});
  return {{"input", input_shape},
          {"classes", num_classes},
          {"layers", layers},
          {"heads", heads_json},
          {"head_hidden", head_hidden}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  Architecture a;
  try {
    a.input_shape = j.at("input").get<Shape>();
    a.num_classes = j.at("classes").get<std::size_t>();
    a.head_hidden = j.value("head_hidden", std::size_t{0});
    if (j.contains("blocks")) {
      // Shorthand for block_architecture.
      Architecture b = block_architecture(a.input_shape, a.num_classes,
                                          j.at("blocks").get<std::vector<std::size_t>>(),
                                          j.value("batchnorm", true));
      b.head_hidden = a.head_hidden;
      if (j.contains("head_kind")) {
        const HeadKind kind = head_kind_from_string(j.at("head_kind").get<std::string>());
        for (auto& h : b.heads) h.kind = kind;
      }
      b.validate();
      return b;
    }
    for (const auto& l : j.at("layers")) {
      LayerSpec spec;
      spec.kind = layer_kind_from_string(l.at("type").get<std::string>());
      spec.out = l.value("out", std::size_t{0});
      spec.kernel = l.value("kernel", std::size_t{3});
      spec.pad = l.value("pad", std::size_t{1});
      spec.window = l.value("window", spec.kind == LayerKind::avg_pool_grid ? std::size_t{4}
                                                                             : std::size_t{2});
      a.backbone.push_back(spec);
    }
    for (const auto& h : j.at("heads")) {
      a.heads.push_back({h.at("after").get<std::size_t>(),
                         head_kind_from_string(h.value("kind", std::string("avg")))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad architecture config: ") + e.what());
  }
  a.validate();
  return a;
}

Architecture block_architecture(const Shape& input_shape, std::size_t num_classes,
                                const std::vector<std::size_t>& block_channels, bool batchnorm) {
  Architecture a;
  a.input_shape = input_shape;
  a.num_classes = num_classes;
  for (std::size_t channels : block_channels) {
    a.backbone.push_back({LayerKind::conv2d, channels, 3, 1, 2});
    if (batchnorm) a.backbone.push_back({LayerKind::batch_norm});
    a.backbone.push_back({LayerKind::relu});
    a.backbone.push_back({LayerKind::max_pool, 0, 3, 1, 2});
    a.heads.push_back({a.backbone.size() - 1, HeadKind::avg});
  }
  const auto shapes = a.activation_shapes();
  for (auto& h : a.heads) {
    const Shape& s = shapes[h.attach];
    h.kind = (s[1] >= 4 && s[2] >= 4) ? HeadKind::avg4x4 : HeadKind::avg;
  }
  a.validate();
  return a;
}

Architecture alexnet_style_architecture(const Shape& input_shape, std::size_t num_classes,
                                        bool batchnorm) {
  Architecture a;
  a.input_shape = input_shape;
  a.num_classes = num_classes;
  const auto conv = [&](std::size_t out, bool pool) {
    a.backbone.push_back({LayerKind::conv2d, out, 3, 1, 2});
    if (batchnorm) a.backbone.push_back({LayerKind::batch_norm});
    a.backbone.push_back({LayerKind::relu});
    if (pool) a.backbone.push_back({LayerKind::max_pool, 0, 3, 1, 2});
    a.heads.push_back({a.backbone.size() - 1, HeadKind::avg});
  };
  conv(8, true);
  conv(16, true);
  conv(24, false);
  conv(24, false);
  conv(16, true);
  for (int i = 0; i < 2; ++i) {
    a.backbone.push_back({LayerKind::fully_connected, 64});
    a.backbone.push_back({LayerKind::relu});
    a.heads.push_back({a.backbone.size() - 1, HeadKind::fc_only});
  }
  const auto shapes = a.activation_shapes();
  for (auto& h : a.heads) {
    const Shape& s = shapes[h.attach];
    if (h.kind == HeadKind::avg && s[1] >= 4 && s[2] >= 4) h.kind = HeadKind::avg4x4;
  }
  a.validate();
  return a;
}

}  // namespace impatient
