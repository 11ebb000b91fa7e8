#pragma once

// Checkpoint file layout (all integers little-endian):
//   "TGED" | u32 format_version | u64 header_bytes | JSON header | f64 payload
// The header holds the model config, an optional optimizer block, free-form
// metadata and a manifest [{name, shape, offset}] with offsets counted in
// doubles from the start of the payload. Adam moments follow the parameters
// as "adam.m/<name>" and "adam.v/<name>".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "treegcn/model.hpp"
#include "treegcn/optimizer.hpp"

namespace treegcn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor> parameters;
  std::optional<OptimizerState> optimizer;
  nlohmann::json metadata = nlohmann::json::object();

  // Deep copy of the model's current parameters.
  static Checkpoint capture(const TreeGcnModel& model, const OptimizerState* optimizer = nullptr);
  TreeGcnModel to_model() const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace treegcn
