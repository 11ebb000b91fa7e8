#include "treegcn/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treegcn/error.hpp"

namespace treegcn {

namespace {

using Matrix = Eigen::MatrixXd;

void nearest_into(std::span<const double> from, std::span<const double> to, std::vector<double>& dist,
                  std::vector<std::size_t>& index) {
  const std::size_t n = from.size() / 3, m = to.size() / 3;
  dist.assign(n, 0.0);
  index.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    const double x = from[3 * i], y = from[3 * i + 1], z = from[3 * i + 2];
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = x - to[3 * j];
      const double dy = y - to[3 * j + 1];
      const double dz = z - to[3 * j + 2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    dist[i] = best;
    index[i] = best_j;
  }
}

std::vector<double> flatten(const PointCloud& cloud) {
  std::vector<double> flat;
  flat.reserve(3 * cloud.size());
  for (const Vec3& p : cloud.points) flat.insert(flat.end(), p.begin(), p.end());
  return flat;
}

double ordered_sum(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

Matrix to_matrix(const std::vector<double>& flat, std::size_t dim) {
  Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * dim + c];
  }
  return m;
}

Eigen::SelfAdjointEigenSolver<Matrix> psd_eigen(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()));
  if (solver.info() != Eigen::Success) raise(ErrorKind::kNumeric, std::string(what) + ": eigendecomposition failed");
  if (solver.eigenvalues().size() > 0 && solver.eigenvalues().minCoeff() < -1e-8) {
    raise(ErrorKind::kNumeric, std::string(what) + " is not positive semi-definite (eigenvalue " +
                                   std::to_string(solver.eigenvalues().minCoeff()) + ")");
  }
  return solver;
}

}  // namespace

NearestNeighbors nearest_neighbors(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) raise(ErrorKind::kContract, "chamfer: clouds must be non-empty");
  if (a.size() % 3 != 0 || b.size() % 3 != 0) raise(ErrorKind::kShape, "chamfer: buffers must hold xyz triples");
  NearestNeighbors nn;
  nearest_into(a, b, nn.forward, nn.forward_index);
  nearest_into(b, a, nn.backward, nn.backward_index);
  return nn;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  const auto nn = nearest_neighbors(flatten(a), flatten(b));
  return ordered_sum(nn.forward) + ordered_sum(nn.backward);
}

Tensor chamfer_loss(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != 3 || b.cols() != 3) {
    raise(ErrorKind::kShape, "chamfer_loss: expected [N x 3] and [M x 3], got " + shape_string(a.shape()) +
                                 " and " + shape_string(b.shape()));
  }
  auto nn = nearest_neighbors(a.data(), b.data());
  Tensor out = Tensor::scalar(ordered_sum(nn.forward) + ordered_sum(nn.backward));
  return tape.record({a, b}, out, [a, b, nn = std::move(nn)](std::span<const double> g) mutable {
    const auto x = a.data(), y = b.data();
    std::span<double> ga, gb;
    if (a.requires_grad()) ga = a.grad_mut();
    if (b.requires_grad()) gb = b.grad_mut();
    auto pair = [&](std::size_t i, std::size_t j) {
      for (std::size_t d = 0; d < 3; ++d) {
        const double diff = 2.0 * g[0] * (x[3 * i + d] - y[3 * j + d]);
        if (!ga.empty()) ga[3 * i + d] += diff;
        if (!gb.empty()) gb[3 * j + d] -= diff;
      }
    };
    for (std::size_t i = 0; i < nn.forward_index.size(); ++i) pair(i, nn.forward_index[i]);
    for (std::size_t j = 0; j < nn.backward_index.size(); ++j) pair(nn.backward_index[j], j);
  });
}

double truncated_chamfer(const PointCloud& a, const PointCloud& b, std::size_t k) {
  const auto nn = nearest_neighbors(flatten(a), flatten(b));
  const std::size_t pool = nn.forward.size() + nn.backward.size();
  if (k == 0 || k > pool) {
    raise(ErrorKind::kContract, "truncated_chamfer: k must lie in [1, " + std::to_string(pool) + "], got " +
                                    std::to_string(k));
  }
  auto value = [&](std::size_t i) {
    return i < nn.forward.size() ? nn.forward[i] : nn.backward[i - nn.forward.size()];
  };
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return value(l) < value(r); });
  std::vector<bool> keep(pool, false);
  for (std::size_t i = 0; i < k; ++i) keep[order[i]] = true;

  double forward = 0.0, backward = 0.0;
  for (std::size_t i = 0; i < nn.forward.size(); ++i) {
    if (keep[i]) forward += nn.forward[i];
  }
  for (std::size_t j = 0; j < nn.backward.size(); ++j) {
    if (keep[nn.forward.size() + j]) backward += nn.backward[j];
  }
  return forward + backward;
}

GaussianStats gaussian_stats(const std::vector<std::vector<double>>& features) {
  const std::size_t m = features.size();
  if (m < 2) raise(ErrorKind::kContract, "gaussian_stats: need at least 2 samples, got " + std::to_string(m));
  const std::size_t f = features.front().size();
  if (f == 0) raise(ErrorKind::kContract, "gaussian_stats: empty feature vectors");
  for (const auto& row : features) {
    if (row.size() != f) raise(ErrorKind::kShape, "gaussian_stats: ragged feature rows");
    for (double v : row) {
      if (!std::isfinite(v)) raise(ErrorKind::kNumeric, "gaussian_stats: non-finite feature");
    }
  }
  GaussianStats g;
  g.mean.assign(f, 0.0);
  for (const auto& row : features) {
    for (std::size_t i = 0; i < f; ++i) g.mean[i] += row[i];
  }
  for (double& v : g.mean) v /= static_cast<double>(m);

  g.covariance.assign(f * f, 0.0);
  for (const auto& row : features) {
    for (std::size_t r = 0; r < f; ++r) {
      const double dr = row[r] - g.mean[r];
      for (std::size_t c = r; c < f; ++c) g.covariance[r * f + c] += dr * (row[c] - g.mean[c]);
    }
  }
  for (std::size_t r = 0; r < f; ++r) {
    for (std::size_t c = r; c < f; ++c) {
      const double v = g.covariance[r * f + c] / static_cast<double>(m - 1);
      g.covariance[r * f + c] = v;
      g.covariance[c * f + r] = v;
    }
  }
  return g;
}

double frechet_distance(const GaussianStats& g1, const GaussianStats& g2) {
  const std::size_t f = g1.dim();
  if (f == 0 || g2.dim() != f || g1.covariance.size() != f * f || g2.covariance.size() != f * f) {
    raise(ErrorKind::kShape, "frechet_distance: Gaussian dimensions disagree");
  }
  const Matrix c1 = to_matrix(g1.covariance, f);
  const Matrix c2 = to_matrix(g2.covariance, f);
  for (const Matrix* c : {&c1, &c2}) {
    if (((*c) - c->transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      raise(ErrorKind::kNumeric, "frechet_distance: covariance is not symmetric");
    }
  }
  psd_eigen(c2, "second covariance");
  const auto e1 = psd_eigen(c1, "first covariance");
  const Eigen::VectorXd root = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_c1 = e1.eigenvectors() * root.asDiagonal() * e1.eigenvectors().transpose();
  const auto inner = psd_eigen(sqrt_c1 * c2 * sqrt_c1, "C1^1/2 C2 C1^1/2");
  const double trace_sqrt = inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = 0.0;
  for (std::size_t i = 0; i < f; ++i) {
    const double d = g1.mean[i] - g2.mean[i];
    mean_term += d * d;
  }
  return std::max(0.0, mean_term + c1.trace() + c2.trace() - 2.0 * trace_sqrt);
}

std::vector<double> coordinate_moments(const PointCloud& cloud) {
  if (cloud.size() < 2) raise(ErrorKind::kContract, "coordinate_moments: need at least 2 points");
  std::vector<std::vector<double>> rows;
  rows.reserve(cloud.size());
  for (const Vec3& p : cloud.points) rows.push_back({p[0], p[1], p[2]});
  const GaussianStats g = gaussian_stats(rows);
  std::vector<double> out = g.mean;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = r; c < 3; ++c) out.push_back(g.covariance[r * 3 + c]);
  }
  return out;
}

double fpd(std::span<const PointCloud> a, std::span<const PointCloud> b, const FeatureExtractor& extractor) {
  if (a.empty() || b.empty()) raise(ErrorKind::kContract, "fpd: both cloud sets must be non-empty");
  auto features = [&extractor](std::span<const PointCloud> clouds) {
    std::vector<std::vector<double>> rows;
    rows.reserve(clouds.size());
    for (const PointCloud& c : clouds) rows.push_back(extractor(c));
    return gaussian_stats(rows);
  };
  return frechet_distance(features(a), features(b));
}

}  // namespace treegcn
