#include "treegcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "treegcn/error.hpp"

namespace treegcn {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'E', 'D'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

struct Block {
  std::string name;
  Shape shape;
  std::span<const double> values;
};

}  // namespace

Checkpoint Checkpoint::capture(const TreeGcnModel& model, const OptimizerState* optimizer) {
  Checkpoint c;
  c.config = model.config();
  for (const auto& p : model.parameters()) c.parameters.push_back({p.name, p.tensor.detach()});
  if (optimizer && !optimizer->empty()) c.optimizer = *optimizer;
  return c;
}

TreeGcnModel Checkpoint::to_model() const {
  std::vector<NamedTensor> copy;
  for (const auto& p : parameters) copy.push_back({p.name, p.tensor.detach()});
  return TreeGcnModel(config, std::move(copy));
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<Block> blocks;
  for (const auto& p : ckpt.parameters) blocks.push_back({p.name, p.tensor.shape(), p.tensor.data()});
  if (ckpt.optimizer) {
    const auto& opt = *ckpt.optimizer;
    if (opt.first_moment.size() != ckpt.parameters.size() || opt.second_moment.size() != ckpt.parameters.size()) {
      raise(ErrorKind::kContract, "optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
      blocks.push_back({"adam.m/" + ckpt.parameters[i].name, ckpt.parameters[i].tensor.shape(), opt.first_moment[i]});
    }
    for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
      blocks.push_back({"adam.v/" + ckpt.parameters[i].name, ckpt.parameters[i].tensor.shape(), opt.second_moment[i]});
    }
  }

  nlohmann::json manifest = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Block& b : blocks) {
    if (b.values.size() != shape_size(b.shape)) raise(ErrorKind::kContract, "block size mismatch for " + b.name);
    manifest.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}});
    offset += b.values.size();
  }
  nlohmann::json header = {{"config", ckpt.config.to_json()},
                           {"manifest", manifest},
                           {"metadata", ckpt.metadata},
                           {"optimizer", ckpt.optimizer ? nlohmann::json{{"step", ckpt.optimizer->step}}
                                                        : nlohmann::json(nullptr)}};
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out.reserve(out.size() + 8 * offset);
  for (const Block& b : blocks) {
    for (double v : b.values) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    raise(ErrorKind::kFormat, "checkpoint: bad magic");
  }
  const auto version = get_le(bytes, 4, 4);
  if (version != kCheckpointVersion) {
    raise(ErrorKind::kFormat, "checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) raise(ErrorKind::kFormat, "checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kFormat, std::string("checkpoint: bad header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfig::from_json(header.at("config"));
  } catch (const Error& e) {
    raise(ErrorKind::kFormat, std::string("checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kFormat, std::string("checkpoint: ") + e.what());
  }
  ckpt.metadata = header.value("metadata", nlohmann::json::object());

  const std::string_view payload = bytes.substr(16 + header_len);
  if (payload.size() % 8 != 0) raise(ErrorKind::kFormat, "checkpoint: truncated payload");
  const std::size_t total = payload.size() / 8;

  std::vector<NamedTensor> blocks;
  std::size_t expected_offset = 0;
  try {
    for (const auto& entry : header.at("manifest")) {
      std::string name = entry.at("name").get<std::string>();
      Shape shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = shape_size(shape);
      if (offset != expected_offset || offset + n > total) {
        raise(ErrorKind::kFormat, "checkpoint: manifest entry " + name + " out of bounds");
      }
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = std::bit_cast<double>(get_le(payload, 8 * (offset + i), 8));
      }
      blocks.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
      expected_offset += n;
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kFormat, std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (expected_offset != total) raise(ErrorKind::kFormat, "checkpoint: payload length does not match manifest");

  const std::size_t n_params = parameter_schema(ckpt.config).size();
  const bool has_optimizer = !header.at("optimizer").is_null();
  if (blocks.size() != (has_optimizer ? 3 * n_params : n_params)) {
    raise(ErrorKind::kFormat, "checkpoint: expected " + std::to_string(n_params) + " parameters");
  }
  ckpt.parameters.assign(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(n_params));
  try {
    // Validates names and shapes against the config's schema.
    TreeGcnModel(ckpt.config, ckpt.parameters);
  } catch (const Error& e) {
    raise(ErrorKind::kFormat, std::string("checkpoint: ") + e.what());
  }
  for (auto& p : ckpt.parameters) p.tensor.set_requires_grad(false);

  if (has_optimizer) {
    OptimizerState opt;
    opt.step = header.at("optimizer").at("step").get<std::uint64_t>();
    for (std::size_t i = 0; i < n_params; ++i) {
      const auto& m = blocks[n_params + i];
      const auto& v = blocks[2 * n_params + i];
      if (m.name != "adam.m/" + ckpt.parameters[i].name || v.name != "adam.v/" + ckpt.parameters[i].name ||
          m.tensor.shape() != ckpt.parameters[i].tensor.shape() || v.tensor.shape() != m.tensor.shape()) {
        raise(ErrorKind::kFormat, "checkpoint: optimizer block mismatch for " + ckpt.parameters[i].name);
      }
      opt.first_moment.emplace_back(m.tensor.data().begin(), m.tensor.data().end());
      opt.second_moment.emplace_back(v.tensor.data().begin(), v.tensor.data().end());
    }
    ckpt.optimizer = std::move(opt);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::kIo, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace treegcn
