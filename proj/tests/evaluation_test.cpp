#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "planereg/errors.hpp"
#include "planereg/evaluation.hpp"
#include "support.hpp"

namespace planereg {
namespace {

Trajectory line(const std::vector<double>& xs, double t0 = 0.0) {
  Trajectory t;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    t.append({t0 + double(i), RigidTransform::fromTranslation({xs[i], 0, 0})});
  }
  return t;
}

Trajectory randomTrajectory(std::mt19937_64& rng, std::size_t n) {
  Trajectory t;
  RigidTransform pose;
  for (std::size_t i = 0; i < n; ++i) {
    pose = compose(pose, test::randomTransform(rng, 1.0, 0.3));
    t.append({0.1 * double(i), pose});
  }
  return t;
}

Trajectory transformed(const RigidTransform& g, const Trajectory& in) {
  Trajectory out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out.append({in[i].timestamp, compose(g, in[i].transform)});
  }
  return out;
}

TEST(ErrorStats, FromList) {
  const auto s = makeErrorStats({3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.min, 3.0);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_DOUBLE_EQ(s.rmse, std::sqrt(12.5));
  const auto empty = makeErrorStats({});
  EXPECT_EQ(empty.rmse, 0.0);
}

TEST(Associate, NearestWithinWindow) {
  Trajectory a, b;
  for (double t : {0.0, 1.0, 2.0}) a.append({t, {}});
  for (double t : {0.01, 1.5, 1.99, 2.005}) b.append({t, {}});
  const auto pairs = associate(a, b);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(pairs[1], (std::pair<std::size_t, std::size_t>{2, 3}));
}

TEST(Rpe, EqualTrajectoriesGiveZero) {
  std::mt19937_64 rng(51);
  const auto t = randomTrajectory(rng, 10);
  const auto s = computeRpe(t, t);
  EXPECT_EQ(s.per_pose.size(), 9u);
  EXPECT_LT(s.max, 1e-12);
}

TEST(Rpe, ConstantOffsetCancels) {
  const auto ref = line({0, 1, 2, 4});
  const auto est = line({5, 6, 7, 9});
  EXPECT_LT(computeRpe(est, ref).max, 1e-12);
}

TEST(Rpe, OneShortStep) {
  const auto s = computeRpe(line({0, 0.9, 1.9}), line({0, 1, 2}));
  ASSERT_EQ(s.per_pose.size(), 2u);
  EXPECT_NEAR(s.per_pose[0], 0.1, 1e-12);
  EXPECT_NEAR(s.per_pose[1], 0.0, 1e-12);
  EXPECT_NEAR(s.rmse, 0.1 / std::sqrt(2.0), 1e-12);
}

TEST(Rpe, DeltaSkipsPoses) {
  const auto s = computeRpe(line({0, 0.9, 1.9, 3}), line({0, 1, 2, 3}), 2);
  ASSERT_EQ(s.per_pose.size(), 2u);
  EXPECT_NEAR(s.per_pose[0], 0.1, 1e-12);
  EXPECT_NEAR(s.per_pose[1], 0.1, 1e-12);
}

TEST(Rpe, Errors) {
  const auto t = line({0, 1});
  EXPECT_THROW(computeRpe(t, t, 0), ParameterError);
  EXPECT_THROW(computeRpe(t, t, 2), InputError);
  EXPECT_THROW(computeRpe(t, line({0, 1}, 10.0)), InputError);
}

TEST(Ate, EqualTrajectoriesGiveZero) {
  std::mt19937_64 rng(52);
  const auto t = randomTrajectory(rng, 10);
  EXPECT_LT(computeAte(t, t).max, 1e-9);
}

TEST(Ate, RotatedAndShiftedIsAbsorbed) {
  std::mt19937_64 rng(53);
  const auto ref = randomTrajectory(rng, 12);
  const auto g = RigidTransform::fromAxisAngle(Vec3::UnitZ(), deg2rad(30.0), Vec3(3, -2, 1));
  EXPECT_LT(computeAte(transformed(g, ref), ref).max, 1e-9);
}

// Gauss-Newton on (rotation increment, translation), independent of the
// closed-form solution.
double iterativeAlignmentRmse(const std::vector<Point3>& src, const std::vector<Point3>& dst) {
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  for (const auto& p : dst) t += p;
  for (const auto& p : src) t -= p;
  t /= double(src.size());
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Vec3 q = r * src[i];
      const Vec3 e = dst[i] - (q + t);
      Eigen::Matrix<double, 3, 6> j;
      Mat3 skew;
      skew << 0, -q.z(), q.y(), q.z(), 0, -q.x(), -q.y(), q.x(), 0;
      j.leftCols<3>() = -skew;
      j.rightCols<3>() = Mat3::Identity();
      h += j.transpose() * j;
      g += j.transpose() * e;
    }
    const Eigen::Matrix<double, 6, 1> step = h.ldlt().solve(g);
    const Vec3 w = step.head<3>();
    if (w.norm() > 0) r = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() * r;
    t += step.tail<3>();
    if (step.norm() < 1e-15) break;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sum += (dst[i] - (r * src[i] + t)).squaredNorm();
  }
  return std::sqrt(sum / double(src.size()));
}

TEST(Ate, OneDisplacedPoseMatchesIterativeOracle) {
  std::mt19937_64 rng(54);
  const auto ref = randomTrajectory(rng, 10);
  Trajectory est;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    RigidTransform p = ref[i].transform;
    if (i == 4) p.translation += Vec3(0.3, 0, 0);
    est.append({ref[i].timestamp, p});
  }
  const auto s = computeAte(est, ref);
  const double oracle = iterativeAlignmentRmse(est.positions(), ref.positions());
  EXPECT_NEAR(s.rmse, oracle, 1e-9);
  EXPECT_GT(s.rmse, 0.0);
  EXPECT_LT(s.rmse, 0.3 * std::sqrt(1.0 / 10.0) + 1e-12);
  EXPECT_FALSE(s.degenerate);
}

TEST(Ate, CollinearTrajectoryIsFlagged) {
  const auto s = computeAte(line({0, 1, 2, 3}), line({0, 1, 2, 3}));
  EXPECT_TRUE(s.degenerate);
  EXPECT_LT(s.max, 1e-12);
}

TEST(Ate, TooFewPosesThrows) {
  const auto t = line({0, 1});
  EXPECT_THROW(computeAte(t, t), InputError);
}

TEST(ErrorStats, RmseSquaredIsMeanSquare) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = randomTrajectory(rng, 8);
    const auto est = randomTrajectory(rng, 8);
    for (const auto& s : {computeAte(est, ref), computeRpe(est, ref)}) {
      double mean = 0.0;
      for (double e : s.per_pose) mean += e * e;
      mean /= double(s.per_pose.size());
      EXPECT_NEAR(s.rmse * s.rmse, mean, 1e-12 * std::max(1.0, mean));
      EXPECT_LE(s.min, s.rmse + 1e-12);
      EXPECT_LE(s.rmse, s.max + 1e-12);
    }
  }
}

TEST(AlignPositions, RecoversRigidMotion) {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<Point3> src;
  for (int i = 0; i < 20; ++i) src.emplace_back(u(rng), u(rng), u(rng));
  const auto g = test::randomTransform(rng);
  std::vector<Point3> dst;
  for (const auto& p : src) dst.push_back(g(p));
  const auto a = alignPositions(src, dst);
  EXPECT_LT(rotationDistance(a.rotation, g.rotation), 1e-9);
  EXPECT_LT((a.translation - g.translation).norm(), 1e-9);
}

}  // namespace
}  // namespace planereg
