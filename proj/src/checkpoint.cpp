#include "impatient/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "impatient/error.hpp"

namespace impatient {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'P', 'N', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 24;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::string encode_checkpoint(ImpatientNet& net, const std::optional<Normalization>& norm) {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  const auto named = net.named_tensors();
  for (const auto& [name, t] : named) {
    tensors.push_back({{"name", name}, {"shape", t->shape()}, {"dtype", "f32"}, {"offset", offset}});
    offset += t->size();
  }
  nlohmann::json manifest{{"format", "impatient-checkpoint"},
                          {"version", kCheckpointVersion},
                          {"architecture", net.architecture().to_json()},
                          {"tensors", tensors},
                          {"total_values", offset}};
  if (norm) manifest["normalization"] = {{"mean", norm->mean}, {"stddev", norm->stddev}};
  const std::string text = manifest.dump(1);

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 4);
  for (const auto& [name, t] : named) {
    for (float v : t->values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::optional<Architecture>& expected) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto manifest_size = get_le<std::uint64_t>(bytes, 16);
  if (manifest_size > bytes.size() - kHeaderSize) throw IoError("truncated checkpoint manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(kHeaderSize, manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint manifest: ") + e.what());
  }

  const Architecture stored = Architecture::from_json(manifest.at("architecture"));
  if (expected && !(*expected == stored)) {
    throw ConfigError("checkpoint architecture does not match the configured architecture");
  }

  Checkpoint ckpt{ImpatientNet::build(stored, 0), std::nullopt};
  const auto named = ckpt.net.named_tensors();
  const auto& entries = manifest.at("tensors");
  if (entries.size() != named.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(entries.size()) + " tensors, network has " +
                      std::to_string(named.size()));
  }
  const std::size_t block = kHeaderSize + manifest_size;
  const std::size_t total = manifest.at("total_values").get<std::size_t>();
  if (bytes.size() != block + total * 4) throw IoError("checkpoint parameter block has wrong size");

  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != name || e.at("shape").get<Shape>() != t->shape() ||
        e.at("dtype").get<std::string>() != "f32") {
      throw ConfigError("checkpoint tensor " + e.at("name").get<std::string>() +
                        " does not match network tensor " + name + " " + shape_string(t->shape()));
    }
    const std::size_t offset = e.at("offset").get<std::size_t>();
    if (offset + t->size() > total) throw IoError("checkpoint tensor offset out of range");
    for (std::size_t j = 0; j < t->size(); ++j) {
      (*t)[j] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, block + (offset + j) * 4));
    }
  }
  if (manifest.contains("normalization")) {
    const auto& n = manifest["normalization"];
    ckpt.normalization = Normalization{n.at("mean").get<std::vector<float>>(),
                                       n.at("stddev").get<std::vector<float>>()};
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, ImpatientNet& net,
                     const std::optional<Normalization>& norm) {
  const std::string bytes = encode_checkpoint(net, norm);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<Architecture>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str(), expected);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint " + path + ": " + e.what());
  }
}

}  // namespace impatient
