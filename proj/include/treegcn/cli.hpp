#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treegcn/error.hpp"
#include "treegcn/mesh_io.hpp"
#include "treegcn/model.hpp"
#include "treegcn/trainer.hpp"

namespace treegcn {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

int exit_code_for(ErrorKind kind);

// Clouds plus their ids, in a fixed order. Loaded from a directory (every
// .pcf/.xyz/.txt file, sorted by name), a manifest CSV (id,label,path with
// paths relative to the manifest) or a single cloud file.
struct CloudSet {
  std::vector<std::string> ids;
  std::vector<PointCloud> clouds;
};

CloudSet load_cloud_set(const std::filesystem::path& path);
// Writes id,label,path rows.
void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& ids,
                    const std::vector<std::string>& labels, const std::vector<std::string>& files);

// Training run description:
//   {
//     "model": {"preset": "toy"|"full", "embedding_dim": 64} or a full model config,
//     "train": {...},            // regime, learning_rate, batch_size, epochs, ...
//     "dataset": "clouds/manifest.csv",
//     "validation": "val/manifest.csv",   // optional
//     "output_dir": "runs/r4",
//     "seed": 0
//   }
// Relative paths resolve against the config file's directory. For presets the
// embedding size comes from the regime unless embedding_dim is given.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> validation;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

// Entry point for the `treegcn` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace treegcn
