#include "impatient/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "impatient/error.hpp"

namespace impatient {

namespace {

using Motif = std::array<const char*, 5>;

constexpr std::array<Motif, 5> kMotifs = {{
    {"..#..", "..#..", "#####", "..#..", "..#.."},  // plus
    {"#...#", ".#.#.", "..#..", ".#.#.", "#...#"},  // diagonal cross
    {"#....", "#....", "#....", "#....", "#####"},  // L
    {"#####", "..#..", "..#..", "..#..", "..#.."},  // T
    {"#####", "#...#", "#...#", "#...#", "#####"},  // ring
}};

class Canvas {
 public:
  Canvas(std::size_t size, float fill) : size_(size), px_(size * size, fill) {}

  void add(std::ptrdiff_t y, std::ptrdiff_t x, float v) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(size_) ||
        x >= static_cast<std::ptrdiff_t>(size_)) {
      return;
    }
    px_[static_cast<std::size_t>(y) * size_ + static_cast<std::size_t>(x)] += v;
  }

  std::vector<float>& pixels() { return px_; }

 private:
  std::size_t size_;
  std::vector<float> px_;
};

}  // namespace

Dataset generate_scale_cues(const SyntheticConfig& cfg) {
  if (cfg.image_size < 8) throw ConfigError("synthetic images must be at least 8x8");
  if (cfg.per_class == 0) throw ConfigError("synthetic set needs at least one example per class");
  if (!(cfg.max_amplitude >= cfg.min_amplitude)) throw ConfigError("amplitude range is empty");

  const std::size_t s = cfg.image_size;
  const auto si = static_cast<std::ptrdiff_t>(s);
  const std::size_t n = cfg.per_class * kSyntheticClasses;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<float> amplitude(static_cast<float>(cfg.min_amplitude),
                                                  static_cast<float>(cfg.max_amplitude));
  std::normal_distribution<float> noise(0.0f, static_cast<float>(cfg.noise));
  std::uniform_int_distribution<std::ptrdiff_t> jitter(-static_cast<std::ptrdiff_t>(cfg.jitter),
                                                       static_cast<std::ptrdiff_t>(cfg.jitter));
  std::uniform_int_distribution<std::ptrdiff_t> position(0, si - 1);
  std::uniform_int_distribution<std::ptrdiff_t> motif_position(0, si - 5);
  std::bernoulli_distribution coin(0.5);

  Dataset ds;
  ds.num_classes = kSyntheticClasses;
  std::vector<float> pixels;
  pixels.reserve(n * s * s);

  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % kSyntheticClasses);
    Canvas canvas(s, static_cast<float>(cfg.background));
    const float a = amplitude(rng);

    if (label < 5) {
      const std::ptrdiff_t half = si / 2 + jitter(rng);
      const std::ptrdiff_t cy = si / 2 + jitter(rng), cx = si / 2 + jitter(rng);
      const std::ptrdiff_t radius = si / 4;
      for (std::ptrdiff_t y = 0; y < si; ++y) {
        for (std::ptrdiff_t x = 0; x < si; ++x) {
          bool on = false;
          switch (label) {
            case 0: on = x < half; break;
            case 1: on = x >= half; break;
            case 2: on = y < half; break;
            case 3: on = y >= half; break;
            default: on = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius; break;
          }
          if (on) canvas.add(y, x, a);
        }
      }
    } else {
      const Motif& motif = kMotifs[static_cast<std::size_t>(label - 5)];
      const std::ptrdiff_t oy = motif_position(rng), ox = motif_position(rng);
      for (std::ptrdiff_t y = 0; y < 5; ++y) {
        for (std::ptrdiff_t x = 0; x < 5; ++x) {
          if (motif[static_cast<std::size_t>(y)][x] == '#') canvas.add(oy + y, ox + x, a);
        }
      }
    }

    for (std::size_t d = 0; d < cfg.distractors; ++d) {
      const bool horizontal = coin(rng);
      const std::ptrdiff_t y = position(rng), x = position(rng);
      const float b = amplitude(rng);
      for (std::ptrdiff_t t = 0; t < 3; ++t) canvas.add(horizontal ? y : y + t, horizontal ? x + t : x, b);
    }

    for (float& v : canvas.pixels()) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
    pixels.insert(pixels.end(), canvas.pixels().begin(), canvas.pixels().end());
    ds.labels.push_back(label);
  }

  ds.images = Tensor({n, 1, s, s}, std::move(pixels));
  ds.splits.assign(n, Split::train);
  return ds;
}

}  // namespace impatient
