#include "treegcn/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "treegcn/error.hpp"
#include "treegcn/metrics.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

std::string norm_report(const TreeGcnModel& model) {
  std::ostringstream out;
  for (const auto& p : model.parameters()) {
    double s = 0.0;
    for (double v : p.tensor.data()) s += v * v;
    out << "\n  " << p.name << " |w|=" << std::sqrt(s);
  }
  return out.str();
}

}  // namespace

RegimeSpec regime_spec(Regime regime) {
  switch (regime) {
    case Regime::kR1: return {256, false};
    case Regime::kR2: return {512, false};
    case Regime::kR3: return {256, true};
    case Regime::kR4: return {512, true};
    case Regime::kCustom: return {0, false};
  }
  return {512, true};
}

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::kR1: return "R1";
    case Regime::kR2: return "R2";
    case Regime::kR3: return "R3";
    case Regime::kR4: return "R4";
    case Regime::kCustom: return "custom";
  }
  return "R4";
}

Regime regime_from_string(std::string_view name) {
  const std::string s = lower(name);
  if (s == "r1") return Regime::kR1;
  if (s == "r2") return Regime::kR2;
  if (s == "r3") return Regime::kR3;
  if (s == "r4") return Regime::kR4;
  if (s == "custom") return Regime::kCustom;
  raise(ErrorKind::kConfig, "unknown regime '" + std::string(name) + "' (expected R1..R4 or custom)");
}

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::kAutoencode ? "autoencode" : "complete";
}

TrainMode train_mode_from_string(std::string_view name) {
  const std::string s = lower(name);
  if (s == "autoencode") return TrainMode::kAutoencode;
  if (s == "complete") return TrainMode::kComplete;
  raise(ErrorKind::kConfig, "unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate(const ModelConfig& model) const {
  adam.validate();
  if (batch_size == 0) raise(ErrorKind::kConfig, "batch_size must be positive");
  if (epochs == 0) raise(ErrorKind::kConfig, "epochs must be positive");
  if (log_every == 0) raise(ErrorKind::kConfig, "log_every must be positive");
  if (regime != Regime::kCustom && rotation_augmentation) {
    raise(ErrorKind::kConfig, "rotation_augmentation is fixed by regime " + std::string(to_string(regime)) +
                                  "; use regime 'custom' to set it");
  }
  const RegimeSpec spec = regime_spec(regime);
  if (regime != Regime::kCustom && spec.embedding_dim != model.embedding_dim) {
    raise(ErrorKind::kConfig, "regime " + std::string(to_string(regime)) + " needs embedding_dim " +
                                  std::to_string(spec.embedding_dim) + ", model has " +
                                  std::to_string(model.embedding_dim));
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"regime", to_string(regime)},
                      {"rotation_augmentation", rotation_augmentation},
                      {"learning_rate", adam.learning_rate},
                      {"beta1", adam.beta1},
                      {"beta2", adam.beta2},
                      {"epsilon", adam.epsilon},
                      {"batch_size", batch_size},
                      {"epochs", epochs},
                      {"seed", seed},
                      {"mode", to_string(mode)},
                      {"max_steps", max_steps},
                      {"log_every", log_every}};
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const char* const kKeys[] = {"regime", "learning_rate", "beta1",     "beta2",    "epsilon",  "batch_size",
                                      "epochs", "seed",          "mode",      "max_steps", "log_every", "rotation_augmentation"};
  if (!j.is_object()) raise(ErrorKind::kConfig, "train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      raise(ErrorKind::kConfig, "train config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    if (j.contains("regime")) c.regime = regime_from_string(j.at("regime").get<std::string>());
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode").get<std::string>());
    c.max_steps = j.value("max_steps", c.max_steps);
    c.log_every = j.value("log_every", c.log_every);
    c.rotation_augmentation = j.value("rotation_augmentation", c.rotation_augmentation);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  return c;
}

// ---- Augmentation and cropping ---------------------------------------------------

std::array<double, 9> up_axis_rotation(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c};
}

PointCloud rotate_about_up(const PointCloud& cloud, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back({c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]});
  return out;
}

PointCloud rotation_augment(const PointCloud& cloud, std::uint64_t seed) {
  return rotate_about_up(cloud, Rng::stream(seed, "rotation").uniform(0.0, 2.0 * std::numbers::pi));
}

HalfSpaceCrop crop_half_space(const PointCloud& cloud, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (n == 0) raise(ErrorKind::kContract, "make_partial: empty cloud");
  Rng rng = Rng::stream(seed, "crop");
  constexpr int kMaxAttempts = 16;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vec3 normal{rng.normal(), rng.normal(), rng.normal()};
    const double length = std::sqrt(dot(normal, normal));
    if (!(length > 0.0)) continue;
    for (double& x : normal) x /= length;

    std::size_t nonnegative = 0;
    for (const Vec3& p : cloud.points) nonnegative += dot(p, normal) >= 0.0 ? 1 : 0;
    if (nonnegative * 2 < n) {
      for (double& x : normal) x = -x;
      nonnegative = 0;
      for (const Vec3& p : cloud.points) nonnegative += dot(p, normal) >= 0.0 ? 1 : 0;
    }
    const std::size_t dropped = n - nonnegative;
    // Keeps 50-75% of the points.
    if (dropped * 4 < n || nonnegative * 10 < n || dropped * 2 > n) continue;

    HalfSpaceCrop crop;
    crop.normal = normal;
    crop.survivors = nonnegative;
    crop.cloud.label = cloud.label;
    crop.cloud.points.reserve(n);
    for (const Vec3& p : cloud.points) {
      if (dot(p, normal) >= 0.0) crop.cloud.points.push_back(p);
    }
    while (crop.cloud.size() < n) crop.cloud.points.push_back(crop.cloud.points[rng.below(nonnegative)]);
    return crop;
  }
  raise(ErrorKind::kGeometry, "make_partial: no plane removed 25-50% of the points after 16 attempts");
}

PointCloud make_partial(const PointCloud& cloud, std::uint64_t seed) { return crop_half_space(cloud, seed).cloud; }

TrainingPair make_training_pair(const PointCloud& cloud, const TrainConfig& config, std::size_t epoch,
                                std::size_t index) {
  const std::uint64_t item = (static_cast<std::uint64_t>(epoch) << 32) ^ index;
  PointCloud target = cloud;
  if (config.augment()) {
    target = rotate_about_up(cloud, Rng::stream(config.seed, "augmentation", item).uniform(0.0, 2.0 * std::numbers::pi));
  }
  if (config.mode == TrainMode::kComplete) {
    PointCloud input = make_partial(target, Rng::stream(config.seed, "cropping", item).next_u64());
    return {std::move(input), std::move(target)};
  }
  return {target, target};
}

// ---- Training --------------------------------------------------------------------

double mean_reconstruction_loss(const TreeGcnModel& model, const std::vector<PointCloud>& clouds) {
  if (clouds.empty()) raise(ErrorKind::kContract, "mean_reconstruction_loss: no clouds");
  double total = 0.0;
  for (const PointCloud& c : clouds) total += chamfer(model.reconstruct(c), c);
  return total / static_cast<double>(clouds.size());
}

TrainResult train(const std::vector<PointCloud>& dataset, TreeGcnModel& model, const TrainConfig& config,
                  const OptimizerState* resume) {
  config.validate(model.config());
  if (dataset.empty()) raise(ErrorKind::kContract, "train: empty dataset");
  const std::size_t n_points = model.config().point_count();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].size() != n_points) {
      raise(ErrorKind::kShape, "train: cloud " + std::to_string(i) + " has " + std::to_string(dataset[i].size()) +
                                   " points, model expects " + std::to_string(n_points));
    }
  }
  if (config.checkpoint_dir) std::filesystem::create_directories(*config.checkpoint_dir);

  OptimizerState optimizer = resume ? *resume : OptimizerState{};
  std::vector<Tensor> params = model.parameter_tensors();
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  bool stop = false;

  for (std::size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng::stream(config.seed, "shuffle", epoch).shuffle(order);

    double epoch_total = 0.0;
    std::size_t epoch_items = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      double batch_total = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const TrainingPair pair = make_training_pair(dataset[order[b]], config, epoch, order[b]);
        Tape tape;
        const Tensor recon = model.decode(tape, model.encode(tape, pair.input.to_tensor()));
        const Tensor loss = chamfer_loss(tape, recon, pair.target.to_tensor());
        tape.backward(scale(tape, loss, weight));
        batch_total += loss.item();
      }
      const double batch_mean = batch_total * weight;
      if (!std::isfinite(batch_mean)) {
        raise(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(start / config.batch_size) + norm_report(model));
      }
      std::vector<std::vector<double>> grads;
      grads.reserve(params.size());
      for (const Tensor& p : params) {
        if (p.has_grad()) {
          grads.emplace_back(p.grad().begin(), p.grad().end());
        } else {
          grads.emplace_back(p.size(), 0.0);
        }
      }
      adam_step(params, grads, optimizer, config.adam);
      ++step;
      epoch_total += batch_total;
      epoch_items += end - start;
      if (step % config.log_every == 0) result.history.push_back({epoch, step, batch_mean});
      if (config.max_steps != 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
    }
    model.zero_grad();

    const double mean = epoch_total / static_cast<double>(epoch_items);
    result.epoch_means.push_back(mean);
    Checkpoint snapshot = Checkpoint::capture(model, &optimizer);
    snapshot.metadata = {{"epoch", epoch}, {"step", step}, {"epoch_mean_chamfer", mean}, {"train", config.to_json()}};
    if (mean < best) {
      best = mean;
      result.best = snapshot;
      if (config.checkpoint_dir) save_checkpoint(*config.checkpoint_dir / "best.tged", snapshot);
    }
    if (config.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.tged", epoch);
      save_checkpoint(*config.checkpoint_dir / name, snapshot);
    }
    result.last = std::move(snapshot);
  }

  result.steps = step;
  result.final_loss = mean_reconstruction_loss(model, dataset);
  result.last.metadata["final_loss"] = result.final_loss;
  if (config.checkpoint_dir) save_checkpoint(*config.checkpoint_dir / "last.tged", result.last);
  return result;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "epoch,step,chamfer\n";
  char line[96];
  for (const LossRecord& r : history) {
    const int len = std::snprintf(line, sizeof line, "%zu,%zu,%.12g\n", r.epoch, r.step, r.chamfer);
    out.append(line, static_cast<std::size_t>(len));
  }
  return out;
}

}  // namespace treegcn
