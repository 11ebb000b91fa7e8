#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "treegcn/error.hpp"
#include "treegcn/metrics.hpp"

using namespace treegcn;
using testing::brute_force_chamfer;
using testing::random_cloud;

namespace {

PointCloud make(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

PointCloud rotated(const PointCloud& c, double yaw, double pitch) {
  PointCloud out = c;
  const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
  for (auto& p : out.points) {
    const double x = cy * p[0] + sy * p[2], z = -sy * p[0] + cy * p[2];
    const double y = cp * p[1] - sp * z, z2 = sp * p[1] + cp * z;
    p = {x, y, z2};
  }
  return out;
}

GaussianStats diag(std::vector<double> mean, std::vector<double> var) {
  GaussianStats g;
  g.mean = mean;
  g.covariance.assign(mean.size() * mean.size(), 0.0);
  for (std::size_t i = 0; i < mean.size(); ++i) g.covariance[i * mean.size() + i] = var[i];
  return g;
}

}  // namespace

TEST_CASE("chamfer matches the brute-force oracle bit for bit") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const PointCloud a = random_cloud(rng, 1 + rng.below(64)), b = random_cloud(rng, 1 + rng.below(64));
    CHECK(chamfer(a, b) == brute_force_chamfer(a, b));
  }
}

TEST_CASE("chamfer hand values and zero self-distance") {
  const PointCloud a = make({{0, 0, 0}, {1, 0, 0}});
  const PointCloud b = make({{0, 0, 0}, {3, 0, 0}});
  // a->b: 0 + 1; b->a: 0 + 4.
  CHECK(chamfer(a, b) == 5.0);
  Rng rng(2);
  const PointCloud c = random_cloud(rng, 40);
  CHECK(chamfer(c, c) == 0.0);
  CHECK_THROWS_AS(chamfer(PointCloud{}, c), Error);
}

TEST_CASE("chamfer symmetry, permutation and rotation invariance") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud a = random_cloud(rng, 2 + rng.below(60)), b = random_cloud(rng, 2 + rng.below(60));
    const double d = chamfer(a, b);
    CHECK(d >= 0.0);
    CHECK(std::abs(chamfer(b, a) - d) <= 1e-12);
    PointCloud pa = a, pb = b;
    rng.shuffle(pa.points);
    rng.shuffle(pb.points);
    CHECK(std::abs(chamfer(pa, pb) - d) <= 1e-12);
    const double yaw = rng.uniform(0, 2 * std::numbers::pi), pitch = rng.uniform(0, 2 * std::numbers::pi);
    CHECK(std::abs(chamfer(rotated(a, yaw, pitch), rotated(b, yaw, pitch)) - d) <= 1e-9);
  }
}

TEST_CASE("chamfer_loss agrees with chamfer and passes finite differences") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud a = random_cloud(rng, 12), b = random_cloud(rng, 9);
    Tape tape;
    CHECK(chamfer_loss(tape, a.to_tensor(), b.to_tensor()).item() == chamfer(a, b));
    std::vector<Tensor> wrt{a.to_tensor(true), b.to_tensor(true)};
    // Random continuous clouds have no nearest-neighbour ties almost surely.
    const double err = finite_diff_check([&](Tape& t) { return chamfer_loss(t, wrt[0], wrt[1]); }, wrt, 1e-6);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("truncated chamfer worked examples") {
  const PointCloud a = make({{0, 0, 0}, {9, 0, 0}});
  const PointCloud b = make({{0, 0, 0}, {1, 0, 0}});
  // forward {0, 64}, backward {0, 1}.
  CHECK(truncated_chamfer(a, b, 2) == 0.0);
  CHECK(truncated_chamfer(a, b, 3) == 1.0);
  CHECK(truncated_chamfer(a, b, 1) == 0.0);
  CHECK(truncated_chamfer(a, b, 4) == 65.0);
  CHECK(truncated_chamfer(a, b, 4) == chamfer(a, b));
  const PointCloud c = make({{0, 0, 0}, {2, 0, 0}});
  const PointCloud d = make({{1, 0, 0}, {5, 0, 0}});
  // forward {1, 1}, backward {1, 9}.
  CHECK(truncated_chamfer(c, d, 3) == 3.0);
  CHECK(truncated_chamfer(c, d, 4) == 12.0);
  CHECK_THROWS_AS(truncated_chamfer(a, b, 0), Error);
  CHECK_THROWS_AS(truncated_chamfer(a, b, 5), Error);
  CHECK(kTruncatedChamferK == 2025);
}

TEST_CASE("truncated chamfer with the full pool equals chamfer exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud a = random_cloud(rng, 1 + rng.below(50)), b = random_cloud(rng, 1 + rng.below(50));
    CHECK(truncated_chamfer(a, b, a.size() + b.size()) == chamfer(a, b));
    const std::size_t k = 1 + rng.below(a.size() + b.size());
    CHECK(truncated_chamfer(a, b, k) <= chamfer(a, b));
  }
}

TEST_CASE("gaussian_stats examples") {
  const GaussianStats g = gaussian_stats({{0.0}, {2.0}});
  CHECK(g.mean == std::vector<double>{1.0});
  CHECK(g.covariance == std::vector<double>{2.0});
  const GaussianStats same = gaussian_stats({{1.0, 2.0}, {1.0, 2.0}});
  for (double v : same.covariance) CHECK(v == 0.0);
  CHECK_THROWS_AS(gaussian_stats({{1.0}}), Error);
  CHECK_THROWS_AS(gaussian_stats({{1.0}, {1.0, 2.0}}), Error);
  Rng rng(6);
  std::vector<std::vector<double>> rows(20, std::vector<double>(3));
  for (auto& r : rows) {
    for (double& v : r) v = rng.normal();
  }
  const GaussianStats base = gaussian_stats(rows);
  rng.shuffle(rows);
  const GaussianStats shuffled = gaussian_stats(rows);
  for (std::size_t i = 0; i < base.covariance.size(); ++i) {
    CHECK(std::abs(base.covariance[i] - shuffled.covariance[i]) <= 1e-12);
  }
}

TEST_CASE("frechet distance closed forms") {
  CHECK(std::abs(frechet_distance(diag({0.0}, {1.0}), diag({1.0}, {4.0})) - 2.0) <= 1e-10);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(6);
    std::vector<double> m1(d), m2(d), v1(d), v2(d);
    double expected = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      m1[i] = rng.normal();
      m2[i] = rng.normal();
      v1[i] = rng.uniform(0.01, 3.0);
      v2[i] = rng.uniform(0.01, 3.0);
      expected += (m1[i] - m2[i]) * (m1[i] - m2[i]);
      expected += (std::sqrt(v1[i]) - std::sqrt(v2[i])) * (std::sqrt(v1[i]) - std::sqrt(v2[i]));
    }
    CHECK(std::abs(frechet_distance(diag(m1, v1), diag(m2, v2)) - expected) <= 1e-9);
  }
}

TEST_CASE("frechet identity, symmetry and PSD guard") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> xs(30, std::vector<double>(4)), ys(30, std::vector<double>(4));
    for (auto& r : xs) {
      for (double& v : r) v = rng.normal();
    }
    for (auto& r : ys) {
      for (double& v : r) v = 2.0 * rng.normal() + 1.0;
    }
    const GaussianStats g1 = gaussian_stats(xs), g2 = gaussian_stats(ys);
    CHECK(frechet_distance(g1, g1) <= 1e-8);
    CHECK(std::abs(frechet_distance(g1, g2) - frechet_distance(g2, g1)) <= 1e-8);
  }
  GaussianStats bad = diag({0.0, 0.0}, {1.0, -1.0});
  try {
    frechet_distance(bad, diag({0.0, 0.0}, {1.0, 1.0}));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
  CHECK_THROWS_AS(frechet_distance(diag({0.0}, {1.0}), diag({0.0, 0.0}, {1.0, 1.0})), Error);
}

TEST_CASE("fpd with the default extractor") {
  std::vector<PointCloud> spheres, boxes;
  for (std::uint64_t s = 0; s < 12; ++s) {
    spheres.push_back(make_synthetic_cloud(ShapeClass::kSphere, 256, s));
    boxes.push_back(make_synthetic_cloud(ShapeClass::kBox, 256, 100 + s));
  }
  CHECK(fpd(spheres, spheres) <= 1e-8);
  CHECK(fpd(spheres, boxes) > 0.0);
  const auto f = coordinate_moments(spheres.front());
  CHECK(f.size() == 9);
  CHECK_THROWS_AS(fpd(std::vector<PointCloud>{}, boxes), Error);
}
