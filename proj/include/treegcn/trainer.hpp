#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "treegcn/checkpoint.hpp"
#include "treegcn/mesh_io.hpp"
#include "treegcn/model.hpp"
#include "treegcn/optimizer.hpp"

namespace treegcn {

// Ablation regimes: embedding size crossed with rotation augmentation.
// kCustom leaves the embedding size free and takes augmentation from
// TrainConfig::rotation_augmentation.
enum class Regime { kR1, kR2, kR3, kR4, kCustom };

struct RegimeSpec {
  std::size_t embedding_dim;  // 0 for kCustom
  bool rotation_augmentation;
};

RegimeSpec regime_spec(Regime regime);
std::string_view to_string(Regime regime);
// Accepts "R1".."R4" and "custom" (case-insensitive).
Regime regime_from_string(std::string_view name);

enum class TrainMode { kAutoencode, kComplete };

std::string_view to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view name);

struct TrainConfig {
  Regime regime = Regime::kR4;
  // Only read when regime == kCustom.
  bool rotation_augmentation = false;
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kAutoencode;
  // Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  // One loss-history row every `log_every` steps.
  std::size_t log_every = 1;
  // When set, epoch_XXXX.tged, best.tged and last.tged are written here.
  std::optional<std::filesystem::path> checkpoint_dir;

  bool augment() const {
    return regime == Regime::kCustom ? rotation_augmentation : regime_spec(regime).rotation_augmentation;
  }
  // Throws kConfig; also checks the regime against the model's embedding size.
  void validate(const ModelConfig& model) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Rotation by `angle` radians about the y axis; y is copied unchanged.
std::array<double, 9> up_axis_rotation(double angle);
PointCloud rotate_about_up(const PointCloud& cloud, double angle);
// Uniform angle in [0, 2pi) drawn from `seed`.
PointCloud rotation_augment(const PointCloud& cloud, std::uint64_t seed);

struct HalfSpaceCrop {
  PointCloud cloud;       // resampled back to the input size
  Vec3 normal{};          // kept points satisfy dot(p, normal) >= 0
  std::size_t survivors;  // original points on the kept side
};

// Removes the minority side of a random plane through the origin (25-50% of
// the points), then tops the survivors back up to N by sampling them with
// replacement. Planes dropping less than 25% are redrawn; after 16 failed
// draws a kGeometry error is raised.
HalfSpaceCrop crop_half_space(const PointCloud& cloud, std::uint64_t seed);
PointCloud make_partial(const PointCloud& cloud, std::uint64_t seed);

struct TrainingPair {
  PointCloud input;
  PointCloud target;
};

// The (input, target) pair seen for dataset item `index` in `epoch`.
// Augmentation rotates input and target by the same angle; completion mode
// feeds a crop of the (rotated) target.
TrainingPair make_training_pair(const PointCloud& cloud, const TrainConfig& config, std::size_t epoch,
                                std::size_t index);

struct LossRecord {
  std::size_t epoch;
  std::size_t step;
  double chamfer;
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;  // lowest epoch-mean training loss
  std::vector<LossRecord> history;
  std::vector<double> epoch_means;
  // Mean chamfer(reconstruct(x), x) over the dataset with the final
  // parameters, unaugmented.
  double final_loss = 0.0;
  std::size_t steps = 0;
};

// Trains `model` in place. `resume` continues from a saved optimizer state.
TrainResult train(const std::vector<PointCloud>& dataset, TreeGcnModel& model, const TrainConfig& config,
                  const OptimizerState* resume = nullptr);

// Mean chamfer between each cloud and its reconstruction.
double mean_reconstruction_loss(const TreeGcnModel& model, const std::vector<PointCloud>& clouds);

// "epoch,step,chamfer" CSV.
std::string loss_history_csv(const std::vector<LossRecord>& history);

}  // namespace treegcn
