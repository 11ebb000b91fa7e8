#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "treegcn/mesh_io.hpp"
#include "treegcn/tensor.hpp"

namespace treegcn {

// Truncation length used when comparing 2048-point clouds against
// 2025-point reconstructions.
inline constexpr std::size_t kTruncatedChamferK = 2025;

// Per-point squared distance to the nearest point of the other cloud, both
// directions. Ties resolve to the lowest index.
struct NearestNeighbors {
  std::vector<double> forward;  // a -> b, one per point of a
  std::vector<std::size_t> forward_index;
  std::vector<double> backward;  // b -> a, one per point of b
  std::vector<std::size_t> backward_index;
};

// `a` and `b` are flat xyz buffers.
NearestNeighbors nearest_neighbors(std::span<const double> a, std::span<const double> b);

// sum_{x in a} min_y |x - y|^2 + sum_{y in b} min_x |x - y|^2, unnormalised.
// Each directed sum runs in point order; the two sums are added last.
double chamfer(const PointCloud& a, const PointCloud& b);

// Differentiable chamfer on [N x 3] and [M x 3] tensors. Same value as chamfer().
Tensor chamfer_loss(Tape& tape, const Tensor& a, const Tensor& b);

// Sum of the k smallest entries of the pooled directed distance lists.
// Selected entries are summed in pool order (forward list, then backward
// list) so k == |a| + |b| reproduces chamfer() exactly.
double truncated_chamfer(const PointCloud& a, const PointCloud& b, std::size_t k);

struct GaussianStats {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major dim x dim

  std::size_t dim() const noexcept { return mean.size(); }
};

// Sample mean and unbiased covariance (divisor M - 1), symmetrised. Rows are
// feature vectors of equal length; needs at least two rows.
GaussianStats gaussian_stats(const std::vector<std::vector<double>>& features);

// |m1 - m2|^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}). The trace of the square root
// is taken from the eigenvalues of C1^{1/2} C2 C1^{1/2}; eigenvalues below
// -1e-8 raise kNumeric, the rest are clamped at zero.
double frechet_distance(const GaussianStats& g1, const GaussianStats& g2);

using FeatureExtractor = std::function<std::vector<double>(const PointCloud&)>;

// Default extractor: coordinate mean (3) followed by the upper triangle of the
// coordinate covariance (xx, xy, xz, yy, yz, zz).
std::vector<double> coordinate_moments(const PointCloud& cloud);

double fpd(std::span<const PointCloud> a, std::span<const PointCloud> b,
           const FeatureExtractor& extractor = coordinate_moments);

}  // namespace treegcn
