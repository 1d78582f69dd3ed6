#pragma once

// Full-covariance Gaussian mixture EM with k-means++ seeding, used to split
// voxel sets into compact clusters.

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "mnbv/common.hpp"

namespace mnbv {

struct GmmOptions {
  int max_iters = 100;
  double tol = 1e-4;  // on the change of mean log-likelihood per point
  double ridge = 1e-6;
};

struct GmmComponent {
  double weight = 0.0;
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

namespace detail {

inline std::vector<Vec3> kmeans_pp_seeds(std::span<const Vec3> pts, int k, Rng& rng) {
  std::vector<Vec3> seeds;
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  seeds.push_back(pts[pick(rng)]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  while (static_cast<int>(seeds.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = std::min(d2[i], (pts[i] - seeds.back()).squaredNorm());
      total += d2[i];
    }
    if (total <= 0.0) break;  // fewer distinct points than k
    double r = uni(rng) * total;
    std::size_t chosen = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r -= d2[i];
      if (r < 0.0) {
        chosen = i;
        break;
      }
    }
    seeds.push_back(pts[chosen]);
  }
  return seeds;
}

}  // namespace detail

class GaussianMixture {
 public:
  /// Fits k components (k clamped to the number of points).
  static GaussianMixture fit(std::span<const Vec3> pts, int k, Rng& rng, const GmmOptions& opt = {}) {
    if (pts.empty()) throw InvalidArgument("gmm: no points");
    if (k < 1) throw InvalidArgument("gmm: k must be >= 1");
    k = std::min<int>(k, static_cast<int>(pts.size()));

    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double var = 0.0;
    for (const auto& p : pts) var += (p - centroid).squaredNorm();
    var = var / (3.0 * static_cast<double>(pts.size())) + opt.ridge;

    GaussianMixture g;
    g.ridge_ = opt.ridge;
    for (const Vec3& s : detail::kmeans_pp_seeds(pts, k, rng))
      g.comps_.push_back({1.0, s, var * Mat3::Identity()});
    for (auto& c : g.comps_) c.weight = 1.0 / static_cast<double>(g.comps_.size());

    const std::size_t n = pts.size();
    const std::size_t m = g.comps_.size();
    Eigen::MatrixXd resp(n, m);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_iters; ++it) {
      const double ll = g.e_step(pts, resp);
      g.m_step(pts, resp);
      if (std::abs(ll - prev_ll) < opt.tol) break;
      prev_ll = ll;
    }
    return g;
  }

  const std::vector<GmmComponent>& components() const { return comps_; }

  /// Index of the max-responsibility component for each point.
  std::vector<int> assign(std::span<const Vec3> pts) const {
    Eigen::MatrixXd resp(pts.size(), comps_.size());
    log_joint(pts, resp);
    std::vector<int> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Eigen::Index best;
      resp.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
    return out;
  }

 private:
  // resp(i, c) = log(w_c N(x_i | c)).
  void log_joint(std::span<const Vec3> pts, Eigen::MatrixXd& resp) const {
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      const auto& comp = comps_[c];
      Eigen::LLT<Mat3> llt(comp.covariance);
      const Mat3 L = llt.matrixL();
      const double log_det = 2.0 * L.diagonal().array().log().sum();
      const double base = std::log(std::max(comp.weight, 1e-300)) - 0.5 * (3.0 * std::log(2.0 * kPi) + log_det);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 z = L.triangularView<Eigen::Lower>().solve(pts[i] - comp.mean);
        resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = base - 0.5 * z.squaredNorm();
      }
    }
  }

  // Responsibilities in place; returns mean log-likelihood per point.
  double e_step(std::span<const Vec3> pts, Eigen::MatrixXd& resp) const {
    log_joint(pts, resp);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
      const double mx = resp.row(i).maxCoeff();
      const double lse = mx + std::log((resp.row(i).array() - mx).exp().sum());
      resp.row(i) = (resp.row(i).array() - lse).exp();
      ll += lse;
    }
    return ll / static_cast<double>(resp.rows());
  }

  void m_step(std::span<const Vec3> pts, const Eigen::MatrixXd& resp) {
    const double n = static_cast<double>(pts.size());
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      const auto col = resp.col(static_cast<Eigen::Index>(c));
      const double nk = col.sum();
      auto& comp = comps_[c];
      if (nk < 1e-12) {
        comp.weight = 0.0;  // starved component, dropped when assigning
        continue;
      }
      Vec3 mean = Vec3::Zero();
      for (std::size_t i = 0; i < pts.size(); ++i) mean += col[static_cast<Eigen::Index>(i)] * pts[i];
      mean /= nk;
      Mat3 cov = Mat3::Zero();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = pts[i] - mean;
        cov += col[static_cast<Eigen::Index>(i)] * d * d.transpose();
      }
      comp.weight = nk / n;
      comp.mean = mean;
      comp.covariance = cov / nk + ridge_ * Mat3::Identity();
    }
  }

  std::vector<GmmComponent> comps_;
  double ridge_ = 1e-6;
};

/// Partitions points by max-responsibility component; empty clusters dropped.
inline std::vector<std::vector<Vec3>> cluster(std::span<const Vec3> pts, int k, Rng& rng,
                                              const GmmOptions& opt = {}) {
  const GaussianMixture gmm = GaussianMixture::fit(pts, k, rng, opt);
  std::vector<std::vector<Vec3>> groups(gmm.components().size());
  const auto labels = gmm.assign(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) groups[static_cast<std::size_t>(labels[i])].push_back(pts[i]);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

}  // namespace mnbv
