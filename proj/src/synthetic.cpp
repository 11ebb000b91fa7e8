#include <cmath>
#include <numbers>

#include "treegcn/error.hpp"
#include "treegcn/mesh_io.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t add_vertex(Mesh& mesh, double x, double y, double z) {
  mesh.vertices.push_back({x, y, z});
  return mesh.vertices.size() - 1;
}

void add_quad(Mesh& mesh, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  mesh.triangles.push_back({a, b, c});
  mesh.triangles.push_back({a, c, d});
}

Mesh ellipsoid(double rx, double ry, double rz) {
  constexpr std::size_t kStacks = 16, kSlices = 32;
  Mesh mesh;
  const std::size_t south = add_vertex(mesh, 0.0, -ry, 0.0);
  for (std::size_t i = 1; i < kStacks; ++i) {
    const double phi = kPi * static_cast<double>(i) / kStacks - kPi / 2;
    for (std::size_t j = 0; j < kSlices; ++j) {
      const double theta = 2 * kPi * static_cast<double>(j) / kSlices;
      add_vertex(mesh, rx * std::cos(phi) * std::cos(theta), ry * std::sin(phi),
                 rz * std::cos(phi) * std::sin(theta));
    }
  }
  const std::size_t north = add_vertex(mesh, 0.0, ry, 0.0);
  auto ring = [](std::size_t i, std::size_t j) { return 1 + (i - 1) * kSlices + j % kSlices; };
  for (std::size_t j = 0; j < kSlices; ++j) {
    mesh.triangles.push_back({south, ring(1, j + 1), ring(1, j)});
    mesh.triangles.push_back({north, ring(kStacks - 1, j), ring(kStacks - 1, j + 1)});
    for (std::size_t i = 1; i + 1 < kStacks; ++i) {
      add_quad(mesh, ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
    }
  }
  return mesh;
}

Mesh box(double hx, double hy, double hz) {
  Mesh mesh;
  for (int i = 0; i < 8; ++i) {
    add_vertex(mesh, (i & 1) ? hx : -hx, (i & 2) ? hy : -hy, (i & 4) ? hz : -hz);
  }
  add_quad(mesh, 0, 2, 3, 1);
  add_quad(mesh, 4, 5, 7, 6);
  add_quad(mesh, 0, 1, 5, 4);
  add_quad(mesh, 2, 6, 7, 3);
  add_quad(mesh, 0, 4, 6, 2);
  add_quad(mesh, 1, 3, 7, 5);
  return mesh;
}

// Circular frustum along y; top_radius 0 gives a cone.
Mesh frustum(double bottom_radius, double top_radius, double height) {
  constexpr std::size_t kSlices = 32;
  Mesh mesh;
  const double y0 = -height / 2, y1 = height / 2;
  const std::size_t bottom_center = add_vertex(mesh, 0.0, y0, 0.0);
  const std::size_t top_center = add_vertex(mesh, 0.0, y1, 0.0);
  std::vector<std::size_t> bottom(kSlices), top(kSlices);
  for (std::size_t j = 0; j < kSlices; ++j) {
    const double theta = 2 * kPi * static_cast<double>(j) / kSlices;
    bottom[j] = add_vertex(mesh, bottom_radius * std::cos(theta), y0, bottom_radius * std::sin(theta));
    top[j] = add_vertex(mesh, top_radius * std::cos(theta), y1, top_radius * std::sin(theta));
  }
  for (std::size_t j = 0; j < kSlices; ++j) {
    const std::size_t k = (j + 1) % kSlices;
    mesh.triangles.push_back({bottom_center, bottom[j], bottom[k]});
    add_quad(mesh, bottom[j], top[j], top[k], bottom[k]);
    if (top_radius > 0.0) mesh.triangles.push_back({top_center, top[k], top[j]});
  }
  return mesh;
}

}  // namespace

std::string_view to_string(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::kSphere: return "sphere";
    case ShapeClass::kBox: return "box";
    case ShapeClass::kCylinder: return "cylinder";
    case ShapeClass::kCone: return "cone";
  }
  return "unknown";
}

ShapeClass shape_class_from_string(std::string_view name) {
  for (ShapeClass s : {ShapeClass::kSphere, ShapeClass::kBox, ShapeClass::kCylinder, ShapeClass::kCone}) {
    if (to_string(s) == name) return s;
  }
  raise(ErrorKind::kUsage, "unknown shape class '" + std::string(name) + "'");
}

Mesh make_synthetic_mesh(ShapeClass shape, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "synthetic-shape");
  Mesh mesh;
  switch (shape) {
    case ShapeClass::kSphere:
      mesh = ellipsoid(rng.uniform(0.85, 1.15), rng.uniform(0.85, 1.15), rng.uniform(0.85, 1.15));
      break;
    case ShapeClass::kBox:
      mesh = box(rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0));
      break;
    case ShapeClass::kCylinder: {
      const double radius = rng.uniform(0.3, 0.7);
      mesh = frustum(radius, radius, rng.uniform(0.8, 2.0));
      break;
    }
    case ShapeClass::kCone:
      mesh = frustum(rng.uniform(0.4, 0.9), 0.0, rng.uniform(0.8, 1.8));
      break;
  }
  const double yaw = rng.uniform(0.0, 2 * kPi);
  const double c = std::cos(yaw), s = std::sin(yaw);
  for (Vec3& v : mesh.vertices) {
    const double x = v[0], z = v[2];
    v[0] = c * x + s * z;
    v[2] = -s * x + c * z;
  }
  return mesh;
}

PointCloud make_synthetic_cloud(ShapeClass shape, std::size_t n, std::uint64_t seed) {
  const Mesh mesh = make_synthetic_mesh(shape, seed);
  PointCloud cloud = normalize(sample_surface(mesh, n, Rng::stream(seed, "synthetic-sampling").next_u64()));
  cloud.label = std::string(to_string(shape));
  return cloud;
}

}  // namespace treegcn
