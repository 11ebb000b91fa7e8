#pragma once

// Shared generators and independent oracles for the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "treegcn/mesh_io.hpp"
#include "treegcn/model.hpp"
#include "treegcn/rng.hpp"
#include "treegcn/tensor.hpp"

namespace testing {

using namespace treegcn;

inline PointCloud random_cloud(Rng& rng, std::size_t n, double spread = 1.0) {
  PointCloud c;
  c.points.resize(n);
  for (auto& p : c.points) {
    for (double& v : p) v = rng.uniform(-spread, spread);
  }
  return c;
}

inline Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

// Values with |x| >= margin, so leaky_relu stays away from its kink.
inline Tensor away_from_zero(Rng& rng, Shape shape, double margin = 1e-2) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) {
    const double mag = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor(std::move(shape), std::move(values), true);
}

// Brute-force double loop; squared distance written as dx^2 + dy^2 + dz^2.
inline double brute_force_chamfer(const PointCloud& a, const PointCloud& b) {
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    double total = 0.0;
    for (const Vec3& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to.points) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best) best = d;
      }
      total += best;
    }
    return total;
  };
  const double forward = directed(a, b);
  const double backward = directed(b, a);
  return forward + backward;
}

// N = 16 configuration: encoder (4,4), decoder (4,4).
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.encoder_degrees = {4, 4};
  c.encoder_widths = {3, 8, 6};
  c.decoder_degrees = {4, 4};
  c.decoder_widths = {6, 8, 3};
  c.embedding_dim = 6;
  c.activation_slope = 0.2;
  c.loop_support = 2;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("treegcn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace testing
