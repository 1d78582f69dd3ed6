#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mnbv/common.hpp"

namespace mnbv {

/// Square-root factor L with L*L^T = cov. Uses Cholesky (with a 1e-12 ridge)
/// and falls back to a clamped eigen decomposition for semidefinite input, so a
/// zero covariance yields an exactly zero factor.
template <int N>
Eigen::Matrix<double, N, N> covariance_factor(const Eigen::Matrix<double, N, N>& cov) {
  using M = Eigen::Matrix<double, N, N>;
  const M sym = 0.5 * (cov + cov.transpose());
  if (sym.isZero(0.0)) return M::Zero();
  Eigen::LLT<M> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LLT<M> ridged(sym + 1e-12 * M::Identity());
  if (ridged.info() == Eigen::Success) return ridged.matrixL();
  Eigen::SelfAdjointEigenSolver<M> es(sym);
  const Eigen::Matrix<double, N, 1> root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

template <int N>
Eigen::Matrix<double, N, 1> standard_normal(Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Matrix<double, N, 1> z;
  for (int i = 0; i < N; ++i) z[i] = nd(rng);
  return z;
}

template <int N>
Eigen::Matrix<double, N, 1> sample_gaussian(const Eigen::Matrix<double, N, 1>& mean,
                                            const Eigen::Matrix<double, N, N>& factor, Rng& rng) {
  return mean + factor * standard_normal<N>(rng);
}

}  // namespace mnbv
