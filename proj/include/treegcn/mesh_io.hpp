#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treegcn/tensor.hpp"

namespace treegcn {

using Vec3 = std::array<double, 3>;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;

  double triangle_area(std::size_t t) const;
  double total_area() const;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::string> label;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  // [N x 3] leaf tensor.
  Tensor to_tensor(bool requires_grad = false) const;
  static PointCloud from_tensor(const Tensor& t, std::optional<std::string> label = std::nullopt);
};

inline constexpr std::size_t kDefaultSampleCount = 2048;

// Polygons with more than three corners are fan-triangulated. Errors carry the
// 1-based line number.
Mesh parse_off(std::string_view text);
Mesh parse_obj(std::string_view text);
// Dispatches on the extension (.off / .obj, case-insensitive).
Mesh load_mesh(const std::filesystem::path& path);

// Area-weighted triangle choice, then barycentric weights
//   u = 1 - sqrt(r1), v = sqrt(r1) (1 - r2), w = sqrt(r1) r2
// which are uniform over the triangle. Deterministic in `seed`.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

// Centroid to the origin, then scale so the farthest point has norm 1.
PointCloud normalize(const PointCloud& cloud);

// Binary clouds ("PCF1", u32 count, float32 xyz) for the .pcf extension,
// otherwise ASCII "x y z" lines. ASCII output uses 17 significant digits so
// double values survive a round trip.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_cloud(const std::filesystem::path& path);

std::string encode_binary_cloud(const PointCloud& cloud);
PointCloud decode_binary_cloud(std::string_view bytes);
std::string encode_ascii_cloud(const PointCloud& cloud);
PointCloud decode_ascii_cloud(std::string_view text);

// ---- Synthetic shapes -----------------------------------------------------------

enum class ShapeClass { kSphere, kBox, kCylinder, kCone };

std::string_view to_string(ShapeClass shape);
ShapeClass shape_class_from_string(std::string_view name);

// Closed triangle mesh of the given class with proportions drawn from `seed`
// and a random rotation about the y (up) axis.
Mesh make_synthetic_mesh(ShapeClass shape, std::uint64_t seed);

// Sampled + normalized cloud of a synthetic shape, labelled with its class.
PointCloud make_synthetic_cloud(ShapeClass shape, std::size_t n, std::uint64_t seed);

}  // namespace treegcn
