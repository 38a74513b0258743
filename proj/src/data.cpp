#include "impatient/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "impatient/error.hpp"

namespace impatient {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) throw IoError("truncated IDX header in " + path);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

std::size_t resolve_classes(const std::vector<int>& labels, std::optional<std::size_t> declared) {
  if (labels.empty()) throw IoError("dataset has no examples");
  const int top = *std::max_element(labels.begin(), labels.end());
  if (declared) {
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= *declared) {
        throw IoError("label " + std::to_string(l) + " out of range for " +
                      std::to_string(*declared) + " classes");
      }
    }
    return *declared;
  }
  return static_cast<std::size_t>(top) + 1;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.images = images.gather_batch(rows);
  out.num_classes = num_classes;
  for (auto r : rows) {
    out.labels.push_back(labels.at(r));
    out.splits.push_back(splits.at(r));
  }
  return out;
}

Dataset Dataset::select(Split split) const {
  const auto rows = indices(split);
  if (rows.empty()) throw ConfigError("dataset has no " + to_string(split) + " examples");
  return subset(rows);
}

void Dataset::validate() const {
  if (images.rank() != 4) throw ShapeError("dataset images must be N x C x H x W");
  if (images.batch() != labels.size() || splits.size() != labels.size()) {
    throw ShapeError("dataset images, labels and split tags disagree in count");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw ConfigError("label " + std::to_string(l) + " out of range");
    }
  }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> num_classes) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (read_be32(img, 0, images_path) != kIdxImages) throw IoError("bad IDX image magic in " + images_path);
  if (read_be32(lab, 0, labels_path) != kIdxLabels) throw IoError("bad IDX label magic in " + labels_path);

  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n != n_labels) {
    throw IoError("image file has " + std::to_string(n) + " examples but label file has " +
                  std::to_string(n_labels));
  }
  if (n == 0 || rows == 0 || cols == 0) throw IoError("IDX file declares an empty extent");
  if (img.size() != 16 + n * rows * cols) {
    throw IoError("IDX image file " + images_path + " has " + std::to_string(img.size()) +
                  " bytes, expected " + std::to_string(16 + n * rows * cols));
  }
  if (lab.size() != 8 + n) {
    throw IoError("IDX label file " + labels_path + " has " + std::to_string(lab.size()) +
                  " bytes, expected " + std::to_string(8 + n));
  }

  Dataset ds;
  std::vector<float> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(img[16 + i]) / 255.0f;
  ds.images = Tensor({n, 1, rows, cols}, std::move(pixels));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lab[8 + i];
  ds.num_classes = resolve_classes(ds.labels, num_classes);
  ds.splits.assign(n, Split::train);
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& data) {
  data.validate();
  if (data.images.dim(1) != 1) throw ShapeError("IDX export supports single-channel images only");
  const std::size_t n = data.size(), rows = data.images.dim(2), cols = data.images.dim(3);
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!img || !lab) throw IoError("cannot write IDX files " + images_path + ", " + labels_path);
  write_be32(img, kIdxImages);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (float v : data.images.values()) {
    const float q = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    img.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
  write_be32(lab, kIdxLabels);
  write_be32(lab, static_cast<std::uint32_t>(n));
  for (int l : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  if (!img || !lab) throw IoError("failed writing IDX files");
}

Dataset load_csv(const std::string& path, const Shape& example_shape,
                 std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const std::size_t width = shape_size(example_shape);
  std::vector<float> pixels;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != width + 1) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width + 1) +
                    " columns, got " + std::to_string(row.size()));
    }
    if (row[0] != std::floor(row[0])) throw IoError(path + ":" + std::to_string(line_no) + ": label must be an integer");
    labels.push_back(static_cast<int>(row[0]));
    for (std::size_t i = 1; i < row.size(); ++i) pixels.push_back(static_cast<float>(row[i]));
  }
  Dataset ds;
  ds.num_classes = resolve_classes(labels, num_classes);
  Shape shape = example_shape;
  shape.insert(shape.begin(), labels.size());
  if (shape.size() == 2) shape = {labels.size(), 1, 1, width};
  ds.images = Tensor(shape, std::move(pixels));
  ds.labels = std::move(labels);
  ds.splits.assign(ds.labels.size(), Split::train);
  return ds;
}

Dataset stratified_split(const Dataset& data, const std::vector<double>& fractions,
                         std::uint64_t seed) {
  if (fractions.empty() || fractions.size() > 3) throw ConfigError("split needs 1 to 3 fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t parts =
      static_cast<std::size_t>(std::count_if(fractions.begin(), fractions.end(),
                                             [](double f) { return f > 0.0; }));

  Dataset out = data;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < parts) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                        " examples, fewer than the " + std::to_string(parts) + " split parts");
    }
    std::shuffle(members.begin(), members.end(), rng);

    // Largest-remainder apportionment of this class across the parts.
    const std::size_t m = members.size();
    std::vector<std::size_t> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      const double exact = fractions[p] * static_cast<double>(m);
      counts[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      assigned += counts[p];
      remainders.emplace_back(exact - static_cast<double>(counts[p]), p);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < m; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];

    std::size_t pos = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      for (std::size_t j = 0; j < counts[p]; ++j) out.splits[members[pos++]] = static_cast<Split>(p);
    }
  }
  return out;
}

Normalization fit_normalization(const Dataset& data) {
  const auto rows = data.indices(Split::train);
  if (rows.empty()) throw ConfigError("normalization needs training examples");
  const std::size_t channels = data.images.dim(1);
  const std::size_t plane = data.images.dim(2) * data.images.dim(3);
  Normalization norm;
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0, sq = 0.0;
    for (auto r : rows) {
      const float* p = data.images.data() + (r * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += p[i];
        sq += static_cast<double>(p[i]) * p[i];
      }
    }
    const double count = static_cast<double>(rows.size() * plane);
    const double mean = sum / count;
    const double var = std::max(sq / count - mean * mean, 0.0);
    norm.mean.push_back(static_cast<float>(mean));
    norm.stddev.push_back(static_cast<float>(std::max(std::sqrt(var), 1e-6)));
  }
  return norm;
}

void apply_normalization(Tensor& images, const Normalization& norm) {
  const std::size_t channels = images.dim(1);
  if (norm.mean.size() != channels || norm.stddev.size() != channels) {
    throw ShapeError("normalization has " + std::to_string(norm.mean.size()) +
                     " channels, images have " + std::to_string(channels));
  }
  const std::size_t plane = images.dim(2) * images.dim(3);
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      float* p = images.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - norm.mean[c]) / norm.stddev[c];
    }
  }
}

void apply_normalization(Dataset& data, const Normalization& norm) {
  apply_normalization(data.images, norm);
}

}  // namespace impatient
