#include <gtest/gtest.h>

#include <vector>

#include "mnbv/trajectory_belief.hpp"
#include "oracles.hpp"

using namespace mnbv;

TEST(BuildTransition, ZeroIntervalIsIdentity) {
  const auto tr = build_transition(0.0, 0.01);
  EXPECT_TRUE(tr.phi.isIdentity(0.0));
  EXPECT_TRUE(tr.q.isZero(0.0));
}

TEST(BuildTransition, UnitIntervalBlocks) {
  const auto tr = build_transition(1.0, 0.01);
  const Mat2 I = Mat2::Identity();
  EXPECT_TRUE(tr.q.topLeftCorner(2, 2).isApprox(0.01 / 3.0 * I, 1e-12));
  EXPECT_NEAR(tr.q(0, 0), 0.0033333, 1e-7);
  EXPECT_TRUE(tr.q.topRightCorner(2, 2).isApprox(0.005 * I, 1e-12));
  EXPECT_TRUE(tr.q.bottomLeftCorner(2, 2).isApprox(0.005 * I, 1e-12));
  EXPECT_TRUE(tr.q.bottomRightCorner(2, 2).isApprox(0.01 * I, 1e-12));
  EXPECT_DOUBLE_EQ(tr.q(0, 1), 0.0);
}

TEST(BuildTransition, TwoSecondInterval) {
  const auto tr = build_transition(2.0, 0.01);
  EXPECT_TRUE(tr.phi.topRightCorner(2, 2).isApprox(2.0 * Mat2::Identity()));
  EXPECT_TRUE(tr.q.bottomRightCorner(2, 2).isApprox(0.02 * Mat2::Identity(), 1e-12));
}

TEST(BuildTransition, NoiseIsSymmetricPsd) {
  for (double dt : {0.1, 0.5, 1.0, 3.0}) {
    const auto tr = build_transition(dt, 0.015);
    EXPECT_TRUE(tr.q.isApprox(tr.q.transpose()));
    Eigen::SelfAdjointEigenSolver<Mat4> es(tr.q);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-15);
  }
}

TEST(BuildTransition, NegativeIntervalThrows) {
  EXPECT_THROW(build_transition(-0.1, 0.01), InvalidArgument);
}

namespace {

SmootherConfig config_for(double q_c, double sigma, int L = 8) {
  SmootherConfig c;
  c.window_length = L;
  c.process_psd = q_c;
  c.measurement_variance = sigma * sigma;
  return c;
}

std::vector<PositionMeasurement> at_unit_spacing(std::initializer_list<Vec2> values) {
  std::vector<PositionMeasurement> w;
  double t = 0.0;
  for (const auto& v : values) w.push_back({v, t++});
  return w;
}

}  // namespace

TEST(Smooth, TwoPointsGiveVelocity) {
  const auto w = at_unit_spacing({Vec2(0, 0), Vec2(1, 0)});
  const Belief b = smooth(w, config_for(0.01, 1e-4));
  EXPECT_LT((b.velocity() - Vec2(1, 0)).norm(), 1e-2);
  EXPECT_DOUBLE_EQ(b.timestamp, 1.0);
}

TEST(Smooth, StationaryWindow) {
  const Vec2 p(2, 3);
  const auto w = at_unit_spacing({p, p, p, p, p});
  const Belief b = smooth(w, config_for(0.01, 1e-3));
  EXPECT_LT((b.position() - p).norm(), 1e-2);
  EXPECT_LT(b.velocity().norm(), 1e-2);
}

TEST(Smooth, RejectsShortWindow) {
  const auto w = at_unit_spacing({Vec2(0, 0)});
  EXPECT_THROW(smooth(w, config_for(0.01, 0.1)), InsufficientData);
  EXPECT_THROW(smooth(std::span<const PositionMeasurement>{}, config_for(0.01, 0.1)), InsufficientData);
}

TEST(Smooth, RejectsNonIncreasingTimestamps) {
  std::vector<PositionMeasurement> w{{Vec2(0, 0), 0.0}, {Vec2(1, 0), 1.0}, {Vec2(2, 0), 1.0}};
  EXPECT_THROW(smooth(w, config_for(0.01, 0.1)), InvalidArgument);
  w[2].timestamp = 0.5;
  EXPECT_THROW(smooth(w, config_for(0.01, 0.1)), InvalidArgument);
}

TEST(Smooth, RejectsWindowLongerThanLag) {
  const auto w = at_unit_spacing({Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)});
  EXPECT_THROW(smooth(w, config_for(0.01, 0.1, 2)), InvalidArgument);
}

TEST(Smooth, RejectsBadConfig) {
  const auto w = at_unit_spacing({Vec2(0, 0), Vec2(1, 0)});
  EXPECT_THROW(smooth(w, config_for(0.0, 0.1)), InvalidArgument);
  EXPECT_THROW(smooth(w, config_for(0.01, 0.0)), InvalidArgument);
  auto c = config_for(0.01, 0.1);
  c.anchor_variance = 0.0;
  EXPECT_THROW(smooth(w, c), InvalidArgument);
}

TEST(Smooth, MatchesKalmanRtsOracleOnRandomWindows) {
  Rng rng = make_rng(2024, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::random_smoother_case(rng);
    const Belief b = smooth(c.window, c.config);
    const auto kf = oracle::kalman_rts(c.window, c.config);
    EXPECT_LT((b.mean - kf.means.back()).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_LT((b.covariance - kf.covariances.back()).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}

TEST(Smooth, MatchesDenseNormalEquations) {
  Rng rng = make_rng(77, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = oracle::random_smoother_case(rng);
    const Belief b = smooth(c.window, c.config);
    const auto dense = oracle::dense_map_last_state(c.window, c.config);
    EXPECT_LT((b.mean - dense.mean).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((b.covariance - dense.covariance).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Smooth, OutputCovarianceIsSymmetricPsd) {
  Rng rng = make_rng(5, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = oracle::random_smoother_case(rng);
    const Belief b = smooth(c.window, c.config);
    EXPECT_LE((b.covariance - b.covariance.transpose()).cwiseAbs().maxCoeff(),
              1e-9 * b.covariance.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat4> es(b.covariance);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * b.covariance.trace());
  }
}

TEST(Smooth, TranslationEquivariance) {
  Rng rng = make_rng(11, 0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = oracle::random_smoother_case(rng);
    const Belief a = smooth(c.window, c.config);
    const Vec2 s(shift(rng), shift(rng));
    for (auto& m : c.window) m.value += s;
    const Belief b = smooth(c.window, c.config);
    EXPECT_LT((b.position() - a.position() - s).norm(), 1e-9);
    EXPECT_LT((b.velocity() - a.velocity()).norm(), 1e-9);
    EXPECT_LT((b.covariance - a.covariance).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Predict, ZeroIntervalLeavesBeliefUnchanged) {
  Belief b;
  b.mean << 1, 2, 3, 4;
  b.covariance = Mat4::Identity() * 0.3;
  b.timestamp = 5.0;
  const Belief p = predict(b, 0.0, 0.01);
  EXPECT_EQ(p.mean, b.mean);
  EXPECT_EQ(p.covariance, b.covariance);
  EXPECT_DOUBLE_EQ(p.timestamp, 5.0);
}

TEST(Predict, ConstantVelocityMean) {
  Belief b;
  b.mean << 0, 0, 1, 0;
  const Belief p = predict(b, 1.0, 0.01);
  EXPECT_TRUE(p.mean.isApprox(Vec4(1, 0, 1, 0)));
  EXPECT_DOUBLE_EQ(p.timestamp, 1.0);
}

TEST(Predict, CovarianceIdentityOnRandomBeliefs) {
  Rng rng = make_rng(3, 0);
  std::uniform_real_distribution<double> u(0.05, 3.0), q(0.001, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const Belief b = oracle::random_belief(rng);
    const double dt = u(rng), qc = q(rng);
    const Belief p = predict(b, dt, qc);
    const auto tr = build_transition(dt, qc);
    const Mat4 diff = p.covariance - tr.phi * b.covariance * tr.phi.transpose();
    EXPECT_LT((diff - tr.q).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (diff + diff.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Predict, UncorrelatedPositionUncertaintyNeverShrinks) {
  Rng rng = make_rng(4, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Belief b = oracle::random_belief(rng);
    b.covariance.topRightCorner(2, 2).setZero();
    b.covariance.bottomLeftCorner(2, 2).setZero();
    double prev = b.position_covariance().trace();
    for (int step = 0; step < 10; ++step) {
      b = predict(b, 0.7, 0.01);
      const double now = b.position_covariance().trace();
      EXPECT_GE(now, prev - 1e-12);
      prev = now;
    }
  }
}

TEST(Predict, NegativeIntervalThrows) { EXPECT_THROW(predict(Belief{}, -1.0, 0.01), InvalidArgument); }

TEST(NominalHeading, FollowsVelocity) {
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(1, 0), 0.3, 0.02), 0.0);
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(0, -1), 0.3, 0.02), -kPi / 2);
}

TEST(NominalHeading, RetainsPreviousWhenSlow) {
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(1e-6, 0), 0.7, 1e-3), 0.7);
  Belief b;
  b.mean << 0, 0, 1e-6, 0;
  EXPECT_DOUBLE_EQ(nominal_heading(b, 0.7, 1e-3), 0.7);
}

TEST(NominalHeading, AlwaysInHalfOpenRange) {
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(-1, 0), 0.0, 0.02), kPi);
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(-1, -0.0), 0.0, 0.02), kPi);
  EXPECT_DOUBLE_EQ(nominal_heading(Vec2(0, 0), -kPi, 0.02), kPi);
  Rng rng = make_rng(9, 0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> prev(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double h = nominal_heading(Vec2(n(rng), n(rng)) * (i % 2 ? 1.0 : 1e-4), prev(rng), 0.02);
    EXPECT_GT(h, -kPi);
    EXPECT_LE(h, kPi);
  }
}
