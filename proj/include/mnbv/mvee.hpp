#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mnbv/common.hpp"

namespace mnbv {

/// {x : (x - center)^T shape (x - center) <= 1}
struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Mat3 shape = Mat3::Identity();

  double mahalanobis2(const Vec3& x) const { return (x - center).dot(shape * (x - center)); }
  double volume() const { return 4.0 / 3.0 * kPi / std::sqrt(shape.determinant()); }
};

struct MveeOptions {
  double tol = 1e-4;     // relative optimality gap
  double jitter = 1e-4;  // m, added as jitter^2 * I to the inverse shape
  int max_iters = 100000;
};

namespace detail {

/// Khachiyan barycentric ascent with Todd-Yildirim away steps on points
/// y_i in R^r. Returns the weights u.
inline std::vector<double> khachiyan_weights(const Eigen::MatrixXd& Y, double tol, int max_iters) {
  const Eigen::Index r = Y.rows();
  const std::size_t n = static_cast<std::size_t>(Y.cols());
  const double dim = static_cast<double>(r + 1);
  Eigen::MatrixXd Q(r + 1, Y.cols());
  Q.topRows(r) = Y;
  Q.row(r).setOnes();

  std::vector<double> u(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd m(static_cast<Eigen::Index>(n));
  for (int it = 0; it < max_iters; ++it) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(r + 1, r + 1);
    for (std::size_t i = 0; i < n; ++i) X.noalias() += u[i] * Q.col(i) * Q.col(i).transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(X);
    if (llt.info() != Eigen::Success) break;
    const Eigen::MatrixXd Z = llt.matrixL().solve(Q);
    m = Z.colwise().squaredNorm().transpose();

    std::size_t j_max = 0, j_min = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] > m[j_max]) j_max = i;
      if (u[i] > 0.0 && (j_min == n || m[i] < m[j_min])) j_min = i;
    }
    const double up = m[j_max] / dim - 1.0;
    const double down = 1.0 - m[j_min] / dim;
    if (up <= tol && down <= tol) break;

    if (up >= down) {
      const double beta = (m[j_max] - dim) / (dim * (m[j_max] - 1.0));
      for (auto& v : u) v *= 1.0 - beta;
      u[j_max] += beta;
    } else {
      if (m[j_min] - 1.0 < 1e-12) break;
      double beta = (dim - m[j_min]) / (dim * (m[j_min] - 1.0));
      const double cap = u[j_min] / (1.0 - u[j_min]);
      const bool drop = beta >= cap;
      if (drop) beta = cap;
      for (auto& v : u) v *= 1.0 + beta;
      u[j_min] = drop ? 0.0 : u[j_min] - beta;
    }
  }
  return u;
}

}  // namespace detail

/**
 * Minimum-volume enclosing ellipsoid.
 *
 * The iteration runs inside the affine hull of the points (dimension 0 to 3),
 * so coplanar or collinear voxel sets are handled without special cases. The
 * missing directions, and a small isotropic margin in all directions, come
 * from adding jitter^2 * I to the inverse shape. The result is rescaled so the
 * farthest point sits exactly on the boundary.
 */
inline Ellipsoid mvee(std::span<const Vec3> pts, const MveeOptions& opt = {}) {
  if (pts.empty()) throw InvalidArgument("mvee: no points");
  const std::size_t n = pts.size();

  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
  scatter /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int a = 0; a < 3; ++a)
    if (es.eigenvalues()[a] > 1e-12 * lmax + 1e-24) keep.push_back(a);
  const Eigen::Index r = static_cast<Eigen::Index>(keep.size());

  Ellipsoid e;
  Mat3 inv_shape = Mat3::Zero();
  if (r == 0) {
    e.center = mean;
  } else {
    Eigen::MatrixXd B(3, r);
    for (Eigen::Index a = 0; a < r; ++a) B.col(a) = es.eigenvectors().col(keep[static_cast<std::size_t>(a)]);
    Eigen::MatrixXd Y(r, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) Y.col(static_cast<Eigen::Index>(i)) = B.transpose() * (pts[i] - mean);

    const auto u = detail::khachiyan_weights(Y, opt.tol, opt.max_iters);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(r, r);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = Y.col(static_cast<Eigen::Index>(i));
      c += u[i] * y;
      S += u[i] * y * y.transpose();
    }
    S = static_cast<double>(r) * (S - c * c.transpose());
    e.center = mean + B * c;
    inv_shape = B * S * B.transpose();
  }

  inv_shape = 0.5 * (inv_shape + inv_shape.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> inv_es(inv_shape);
  const Vec3 lam = inv_es.eigenvalues().cwiseMax(0.0).array() + opt.jitter * opt.jitter;
  e.shape = inv_es.eigenvectors() * lam.cwiseInverse().asDiagonal() * inv_es.eigenvectors().transpose();

  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, e.mahalanobis2(p));
  if (worst > 1.0 || (r == 3 && worst > 1e-12)) e.shape /= worst;
  return e;
}

}  // namespace mnbv
