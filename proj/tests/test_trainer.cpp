#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "treegcn/error.hpp"
#include "treegcn/metrics.hpp"
#include "treegcn/trainer.hpp"

using namespace treegcn;

namespace {

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

TrainConfig custom_config(std::size_t epochs, std::size_t batch = 2) {
  TrainConfig c;
  c.regime = Regime::kCustom;
  c.epochs = epochs;
  c.batch_size = batch;
  return c;
}

std::vector<PointCloud> tiny_dataset(std::size_t count, std::uint64_t seed) {
  std::vector<PointCloud> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_synthetic_cloud(i % 2 ? ShapeClass::kBox : ShapeClass::kSphere, 16, seed + i));
  }
  return out;
}

}  // namespace

TEST_CASE("adam with zero gradients leaves parameters bit-identical") {
  Rng rng(1);
  std::vector<Tensor> params{testing::random_tensor(rng, {3, 4}), testing::random_tensor(rng, {5})};
  const std::vector<double> before0(params[0].data().begin(), params[0].data().end());
  const std::vector<double> before1(params[1].data().begin(), params[1].data().end());
  const std::vector<std::vector<double>> zeros{std::vector<double>(12, 0.0), std::vector<double>(5, 0.0)};
  OptimizerState state;
  for (int i = 0; i < 5; ++i) adam_step(params, zeros, state, AdamConfig{});
  CHECK(std::vector<double>(params[0].data().begin(), params[0].data().end()) == before0);
  CHECK(std::vector<double>(params[1].data().begin(), params[1].data().end()) == before1);
  CHECK(state.step == 5);
}

TEST_CASE("adam first step moves each element by about lr") {
  Rng rng(2);
  std::vector<Tensor> params{testing::random_tensor(rng, {10})};
  const std::vector<double> before(params[0].data().begin(), params[0].data().end());
  std::vector<std::vector<double>> grads{std::vector<double>(10)};
  for (double& g : grads[0]) g = rng.uniform(-5.0, 5.0);
  OptimizerState state;
  AdamConfig config;
  config.learning_rate = 1e-3;
  adam_step(params, grads, state, config);
  for (std::size_t i = 0; i < 10; ++i) {
    const double delta = params[0].data()[i] - before[i];
    CHECK(std::abs(delta) <= config.learning_rate);
    CHECK(std::abs(delta) == doctest::Approx(config.learning_rate).epsilon(1e-6));
    CHECK((delta < 0) == (grads[0][i] > 0));
  }
}

TEST_CASE("adam solves the 1D quadratic") {
  std::vector<Tensor> w{Tensor({1}, {1.0})};
  OptimizerState state;
  AdamConfig config;
  config.learning_rate = 0.1;
  for (int i = 0; i < 200; ++i) {
    const std::vector<std::vector<double>> g{{2.0 * w[0].item()}};
    adam_step(w, g, state, config);
  }
  CHECK(std::abs(w[0].item()) < 0.1);
}

TEST_CASE("adam contract and config errors") {
  std::vector<Tensor> w{Tensor({2}, {1.0, 2.0})};
  OptimizerState state;
  CHECK_THROWS_AS(adam_step(w, std::vector<std::vector<double>>{{1.0}}, state, AdamConfig{}), Error);
  CHECK_THROWS_AS(adam_step(w, std::vector<std::vector<double>>{}, state, AdamConfig{}), Error);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = AdamConfig{};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("regimes map to embedding size and augmentation") {
  CHECK(regime_spec(Regime::kR1).embedding_dim == 256);
  CHECK_FALSE(regime_spec(Regime::kR1).rotation_augmentation);
  CHECK(regime_spec(Regime::kR2).embedding_dim == 512);
  CHECK_FALSE(regime_spec(Regime::kR2).rotation_augmentation);
  CHECK(regime_spec(Regime::kR3).embedding_dim == 256);
  CHECK(regime_spec(Regime::kR3).rotation_augmentation);
  CHECK(regime_spec(Regime::kR4).embedding_dim == 512);
  CHECK(regime_spec(Regime::kR4).rotation_augmentation);
  for (Regime r : {Regime::kR1, Regime::kR2, Regime::kR3, Regime::kR4, Regime::kCustom}) {
    CHECK(regime_from_string(to_string(r)) == r);
  }
  CHECK(regime_from_string("r4") == Regime::kR4);
  CHECK_THROWS_AS(regime_from_string("R5"), Error);
}

TEST_CASE("train config validation and JSON") {
  TrainConfig c;
  c.regime = Regime::kR1;
  CHECK_NOTHROW(c.validate(ModelConfig::toy(256)));
  CHECK_THROWS_AS(c.validate(ModelConfig::toy(512)), Error);
  c.rotation_augmentation = true;
  CHECK_THROWS_AS(c.validate(ModelConfig::toy(256)), Error);
  c.regime = Regime::kCustom;
  CHECK_NOTHROW(c.validate(ModelConfig::toy(64)));
  CHECK(c.augment());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(ModelConfig::toy(64)), Error);

  TrainConfig d;
  d.regime = Regime::kR3;
  d.adam.learning_rate = 5e-4;
  d.epochs = 7;
  d.mode = TrainMode::kComplete;
  const TrainConfig back = TrainConfig::from_json(d.to_json());
  CHECK(back.regime == d.regime);
  CHECK(back.adam.learning_rate == d.adam.learning_rate);
  CHECK(back.epochs == 7);
  CHECK(back.mode == TrainMode::kComplete);
  nlohmann::json j = d.to_json();
  j["momentum"] = 0.9;
  CHECK_THROWS_AS(TrainConfig::from_json(j), Error);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"epochs", "ten"}}), Error);
}

TEST_CASE("rotation augmentation is a rigid motion about y") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = testing::random_cloud(rng, 30);
    const std::uint64_t seed = rng.next_u64();
    const PointCloud r = rotation_augment(c, seed);
    CHECK(rotation_augment(c, seed).points == r.points);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(r.points[i][1] == c.points[i][1]);
      for (std::size_t j = i + 1; j < c.size(); ++j) {
        CHECK(std::abs(dist2(r.points[i], r.points[j]) - dist2(c.points[i], c.points[j])) <= 1e-12);
      }
    }
    const auto m = up_axis_rotation(rng.uniform(0.0, 2.0 * std::numbers::pi));
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    CHECK(std::abs(det - 1.0) <= 1e-12);
  }
}

TEST_CASE("half-space crops") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const PointCloud full = make_synthetic_cloud(ShapeClass::kCone, 256, seed);
    const HalfSpaceCrop crop = crop_half_space(full, seed);
    CHECK(crop.cloud.size() == full.size());
    CHECK(crop.survivors * 4 <= 3 * full.size());
    CHECK(crop.survivors * 2 >= full.size());
    for (const Vec3& p : crop.cloud.points) {
      CHECK(p[0] * crop.normal[0] + p[1] * crop.normal[1] + p[2] * crop.normal[2] >= 0.0);
    }
    CHECK(make_partial(full, seed).points == crop.cloud.points);
    CHECK(chamfer(crop.cloud, full) > 0.0);
  }
  PointCloud tiny;
  tiny.points = {{1, 0, 0}};
  try {
    make_partial(tiny, 0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kGeometry);
  }
}

TEST_CASE("augmentation rotates input and target together") {
  TrainConfig c = custom_config(1);
  c.rotation_augmentation = true;
  const PointCloud cloud = make_synthetic_cloud(ShapeClass::kBox, 64, 4);
  const TrainingPair pair = make_training_pair(cloud, c, 0, 3);
  CHECK(pair.input.points == pair.target.points);
  CHECK(pair.input.points != cloud.points);
  CHECK(make_training_pair(cloud, c, 1, 3).input.points != pair.input.points);
  c.rotation_augmentation = false;
  CHECK(make_training_pair(cloud, c, 0, 3).input.points == cloud.points);
}

TEST_CASE("step-0 loss is unchanged by augmentation on a rotation-symmetric cloud") {
  // Points on the y axis are fixed by every rotation about y.
  PointCloud axis;
  for (std::size_t i = 0; i < 16; ++i) axis.points.push_back({0.0, -1.0 + 2.0 * static_cast<double>(i) / 15.0, 0.0});
  const TreeGcnModel model(testing::tiny_config(), 5);
  TrainConfig plain = custom_config(1);
  TrainConfig augmented = plain;
  augmented.rotation_augmentation = true;
  auto step0 = [&](const TrainConfig& c) {
    const TrainingPair pair = make_training_pair(axis, c, 0, 0);
    return chamfer(model.reconstruct(pair.input), pair.target);
  };
  CHECK(std::abs(step0(plain) - step0(augmented)) <= 1e-9);
}

TEST_CASE("completion inputs only see the kept half-space") {
  TrainConfig c = custom_config(1);
  c.mode = TrainMode::kComplete;
  const PointCloud cloud = make_synthetic_cloud(ShapeClass::kCylinder, 128, 6);
  for (std::size_t index = 0; index < 10; ++index) {
    const TrainingPair pair = make_training_pair(cloud, c, 2, index);
    CHECK(pair.target.points == cloud.points);
    const std::uint64_t item = (std::uint64_t{2} << 32) ^ index;
    const HalfSpaceCrop crop = crop_half_space(cloud, Rng::stream(c.seed, "cropping", item).next_u64());
    CHECK(pair.input.points == crop.cloud.points);
    for (const Vec3& p : pair.input.points) {
      CHECK(p[0] * crop.normal[0] + p[1] * crop.normal[1] + p[2] * crop.normal[2] >= 0.0);
    }
  }
}

TEST_CASE("training is deterministic and writes checkpoints") {
  const auto dir = testing::scratch_dir("train_ckpt");
  const auto data = tiny_dataset(6, 7);
  auto run = [&](const std::optional<std::filesystem::path>& ckpt_dir) {
    TreeGcnModel model(testing::tiny_config(), 8);
    TrainConfig c = custom_config(3);
    c.rotation_augmentation = true;
    c.checkpoint_dir = ckpt_dir;
    return train(data, model, c);
  };
  const TrainResult a = run(dir);
  const TrainResult b = run(std::nullopt);
  CHECK(serialize_checkpoint(a.last) == serialize_checkpoint(b.last));
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.steps == 9);
  CHECK(a.epoch_means.size() == 3);
  CHECK(a.history.size() == 9);
  for (const char* name : {"epoch_0000.tged", "epoch_0001.tged", "epoch_0002.tged", "best.tged", "last.tged"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  CHECK(load_checkpoint(dir / "last.tged").optimizer->step == 9);
  const std::string csv = loss_history_csv(a.history);
  CHECK(csv.rfind("epoch,step,chamfer\n0,1,", 0) == 0);
}

TEST_CASE("max_steps stops early and resume continues the optimizer") {
  const auto data = tiny_dataset(4, 9);
  TreeGcnModel model(testing::tiny_config(), 10);
  TrainConfig c = custom_config(10);
  c.max_steps = 3;
  const TrainResult r = train(data, model, c);
  CHECK(r.steps == 3);
  REQUIRE(r.last.optimizer.has_value());
  CHECK(r.last.optimizer->step == 3);
  TreeGcnModel resumed = r.last.to_model();
  const TrainResult more = train(data, resumed, c, &*r.last.optimizer);
  CHECK(more.last.optimizer->step == 6);
}

TEST_CASE("training rejects mismatched data and aborts on non-finite loss") {
  TreeGcnModel model(testing::tiny_config(), 11);
  CHECK_THROWS_AS(train({make_synthetic_cloud(ShapeClass::kBox, 32, 1)}, model, custom_config(1)), Error);
  CHECK_THROWS_AS(train({}, model, custom_config(1)), Error);
  for (auto& p : model.parameters()) {
    for (double& v : p.tensor.mutable_data()) v = 1e200;
  }
  try {
    train(tiny_dataset(2, 12), model, custom_config(1));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    const std::string msg = e.what();
    CHECK(msg.find("epoch 0") != std::string::npos);
    CHECK(msg.find("encoder.0.branch.weight") != std::string::npos);
  }
}

TEST_CASE("epoch means do not increase after warmup on the overfit task") {
  const PointCloud cloud = make_synthetic_cloud(ShapeClass::kSphere, 256, 7);
  TreeGcnModel model(ModelConfig::toy(64), 1);
  TrainConfig c = custom_config(300, 1);
  const TrainResult r = train({cloud}, model, c);
  const std::size_t warmup = r.epoch_means.size() / 10;
  for (std::size_t i = warmup + 1; i < r.epoch_means.size(); ++i) {
    CAPTURE(i);
    CHECK(r.epoch_means[i] <= r.epoch_means[i - 1]);
  }
}
