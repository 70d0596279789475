#include "ctlab/encoder.hpp"

#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace ctlab {

namespace {

struct TensorInfo {
  std::string name;
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0, end = 0;
};

struct SafetensorsHeader {
  std::uint64_t data_start = 0;
  std::vector<TensorInfo> tensors;
};

SafetensorsHeader read_header(std::ifstream& in, const std::filesystem::path& file) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n == 0 || n > (100u << 20)) throw ValidationError("not a safetensors file: " + file.string());
  std::string header(n, '\0');
  in.read(header.data(), static_cast<std::streamsize>(n));
  if (!in) throw ValidationError("truncated safetensors header: " + file.string());
  SafetensorsHeader h;
  h.data_start = 8 + n;
  try {
    auto j = nlohmann::json::parse(header);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "__metadata__") continue;
      TensorInfo t;
      t.name = it.key();
      t.dtype = it.value().at("dtype").get<std::string>();
      t.shape = it.value().at("shape").get<std::vector<std::int64_t>>();
      auto off = it.value().at("data_offsets").get<std::vector<std::uint64_t>>();
      if (off.size() != 2) throw ValidationError("bad data_offsets for " + t.name);
      t.begin = off[0];
      t.end = off[1];
      h.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad safetensors header in " + file.string() + ": " + e.what());
  }
  return h;
}

const TensorInfo& find_tensor(const SafetensorsHeader& h, std::string_view suffix, const std::filesystem::path& file) {
  for (const auto& t : h.tensors)
    if (std::string_view(t.name).ends_with(suffix)) return t;
  throw ConfigError("no tensor ending in '" + std::string(suffix) + "' in " + file.string());
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1F;
  std::uint32_t mant = h & 0x3FF;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while ((mant & 0x400) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FF;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

Eigen::MatrixXd read_safetensors_matrix(const std::filesystem::path& file, std::string_view name_suffix) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  const auto header = read_header(in, file);
  const auto& t = find_tensor(header, name_suffix, file);
  if (t.shape.size() != 2) throw ValidationError("tensor " + t.name + " is not 2-D");
  const auto rows = t.shape[0], cols = t.shape[1];
  const std::size_t width = t.dtype == "F32" ? 4 : (t.dtype == "F16" || t.dtype == "BF16") ? 2 : 0;
  if (width == 0) throw ValidationError("unsupported dtype " + t.dtype + " for " + t.name);
  if (t.end - t.begin != static_cast<std::uint64_t>(rows * cols) * width)
    throw ValidationError("size mismatch for tensor " + t.name);

  std::vector<char> raw(t.end - t.begin);
  in.seekg(static_cast<std::streamoff>(header.data_start + t.begin));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ValidationError("truncated tensor data for " + t.name);

  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const std::size_t k = static_cast<std::size_t>(r * cols + c);  // row-major on disk
      double v;
      if (width == 4) {
        float f;
        std::memcpy(&f, raw.data() + 4 * k, 4);
        v = f;
      } else {
        std::uint16_t h;
        std::memcpy(&h, raw.data() + 2 * k, 2);
        v = t.dtype == "F16" ? half_to_float(h) : std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
      }
      m(r, c) = v;
    }
  }
  return m;
}

void write_safetensors_matrix(const std::filesystem::path& file, const std::string& name, const Eigen::MatrixXd& m) {
  nlohmann::json header;
  const std::uint64_t bytes = static_cast<std::uint64_t>(m.size()) * 4;
  header[name] = {{"dtype", "F32"}, {"shape", {m.rows(), m.cols()}}, {"data_offsets", {0, bytes}}};
  std::string h = header.dump();
  while ((h.size() + 8) % 8 != 0) h.push_back(' ');
  std::string out;
  const std::uint64_t n = h.size();
  out.append(reinterpret_cast<const char*>(&n), 8);
  out += h;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      out.append(reinterpret_cast<const char*>(&f), 4);
    }
  write_file(file, out);
}

EncoderRegistry::EncoderRegistry(std::vector<std::filesystem::path> search_roots) : roots_(std::move(search_roots)) {}

EncoderSpec EncoderRegistry::resolve(std::string_view id) const {
  if (id == "tiny") return EncoderSpec{"tiny", EncoderKind::Tiny, 32, 32, {}};
  std::vector<std::filesystem::path> candidates;
  for (const auto& root : roots_) candidates.push_back(root / std::string(id));
  candidates.emplace_back(std::string(id));
  for (const auto& dir : candidates) {
    if (std::filesystem::exists(dir / "vocab.txt") && std::filesystem::exists(dir / "model.safetensors")) {
      std::ifstream in(dir / "model.safetensors", std::ios::binary);
      const auto header = read_header(in, dir / "model.safetensors");
      const auto& t = find_tensor(header, kWordEmbeddingSuffix, dir / "model.safetensors");
      if (t.shape.size() != 2) throw ValidationError("embedding tensor is not 2-D in " + dir.string());
      return EncoderSpec{std::string(id), EncoderKind::Pretrained, static_cast<int>(t.shape[1]), 64, dir};
    }
  }
  throw ConfigError("unknown encoder '" + std::string(id) +
                    "': use 'tiny' or place a directory <encoders_dir>/" + std::string(id) +
                    " containing vocab.txt and model.safetensors (e.g. a Hugging Face BERT export)");
}

std::shared_ptr<const Tokenizer> EncoderRegistry::tokenizer(const EncoderSpec& spec) const {
  if (spec.kind == EncoderKind::Tiny) return std::make_shared<HashedSubwordTokenizer>();
  return std::make_shared<WordPieceTokenizer>(WordPieceTokenizer::from_file(spec.id, spec.dir / "vocab.txt"));
}

Eigen::MatrixXd EncoderRegistry::pretrained_embeddings(const EncoderSpec& spec) const {
  if (spec.kind != EncoderKind::Pretrained) throw ConfigError("encoder '" + spec.id + "' has no pretrained embeddings");
  return read_safetensors_matrix(spec.dir / "model.safetensors", kWordEmbeddingSuffix);
}

}  // namespace ctlab
