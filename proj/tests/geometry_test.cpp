#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "planereg/errors.hpp"
#include "planereg/geometry.hpp"
#include "support.hpp"

namespace planereg {
namespace {

using test::randomTransform;

constexpr double kPi = std::numbers::pi;

TEST(RigidTransform, PureTranslationMovesOrigin) {
  const auto t = RigidTransform::fromTranslation({1, 0, 0});
  EXPECT_TRUE(t(Point3::Zero()).isApprox(Point3(1, 0, 0)));
}

TEST(RigidTransform, QuarterTurnAboutZ) {
  const auto t = RigidTransform::fromAxisAngle(Vec3::UnitZ(), kPi / 2);
  // Hand-written rotation matrix for +90 deg about z.
  Mat3 r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((t.rotation - r).norm(), 1e-15);
  EXPECT_LT((t(Point3(1, 0, 0)) - Point3(0, 1, 0)).norm(), 1e-15);
}

TEST(RigidTransform, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto t = randomTransform(rng);
    const auto id = compose(t, invert(t));
    EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT(id.translation.norm(), 1e-9);
  }
}

TEST(RigidTransform, ComposeWithIdentity) {
  std::mt19937_64 rng(2);
  const auto t = randomTransform(rng);
  const auto c = compose(RigidTransform::identity(), t);
  EXPECT_EQ(c.rotation, t.rotation);
  EXPECT_EQ(c.translation, t.translation);
}

TEST(RigidTransform, TranslationsAdd) {
  const auto c = compose(RigidTransform::fromTranslation({1, 0, 0}),
                         RigidTransform::fromTranslation({0, 2, 0}));
  EXPECT_TRUE(c.translation.isApprox(Vec3(1, 2, 0)));
}

TEST(RigidTransform, ComposeIsAssociative) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = randomTransform(rng), b = randomTransform(rng), c = randomTransform(rng);
    const auto l = compose(compose(a, b), c);
    const auto r = compose(a, compose(b, c));
    EXPECT_LT((l.rotation - r.rotation).norm(), 1e-9);
    EXPECT_LT((l.translation - r.translation).norm(), 1e-9);
  }
}

TEST(RigidTransform, ComposeAppliesRightFirst) {
  std::mt19937_64 rng(4);
  const auto a = randomTransform(rng), b = randomTransform(rng);
  const Point3 p(0.3, -1.2, 2.0);
  EXPECT_LT((compose(a, b)(p) - a(b(p))).norm(), 1e-12);
}

TEST(RigidTransform, CompositionDropsRankAnnotation) {
  RigidTransform t;
  t.translation_rank = 1;
  t.null_directions = {Vec3::UnitX(), Vec3::UnitY()};
  EXPECT_EQ(compose(t, t).translation_rank, 3);
  EXPECT_TRUE(invert(t).null_directions.empty());
}

TEST(RigidTransform, MatrixAndQuaternionRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto t = randomTransform(rng);
    const auto m = RigidTransform::fromMatrix(t.matrix());
    EXPECT_LT((m.rotation - t.rotation).norm(), 1e-12);
    EXPECT_EQ(m.translation, t.translation);
    const auto q = RigidTransform::fromQuaternion(t.quaternion(), t.translation);
    EXPECT_LT((q.rotation - t.rotation).norm(), 1e-12);
  }
}

TEST(RigidTransform, FromMatrixReorthonormalizes) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 1) = 1e-3;
  const auto t = RigidTransform::fromMatrix(m);
  EXPECT_LT((t.rotation.transpose() * t.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-12);
}

TEST(RigidTransform, AngleMatchesTraceFormula) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto t = randomTransform(rng);
    EXPECT_NEAR(t.angle(), test::geodesic(Mat3::Identity(), t.rotation), 1e-7);
  }
}

TEST(RotationDistance, MatchesTraceFormulaAndIsAccurateNearZero) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Mat3 a = test::randomRotation(rng), b = test::randomRotation(rng);
    EXPECT_NEAR(rotationDistance(a, b), test::geodesic(a, b), 1e-7);
  }
  // The acos form loses precision here; the library must not.
  const Mat3 r = Eigen::AngleAxisd(1e-9, Vec3::UnitY()).toRotationMatrix();
  EXPECT_NEAR(rotationDistance(Mat3::Identity(), r), 1e-9, 1e-15);
}

TEST(NearestRotation, ProjectsPerturbedMatrix) {
  std::mt19937_64 rng(8);
  const Mat3 r = test::randomRotation(rng);
  const Mat3 noisy = r + 1e-4 * Mat3::Random();
  const Mat3 p = nearestRotation(noisy);
  EXPECT_NEAR(p.determinant(), 1.0, 1e-12);
  EXPECT_LT(rotationDistance(p, r), 1e-3);
}

TEST(ApplyTransform, IdentityKeepsCloud) {
  PointCloud c;
  c.points = {{1, 2, 3}, {-4, 5, 6}};
  const auto out = applyTransform(RigidTransform::identity(), c);
  EXPECT_EQ(out.points, c.points);
}

TEST(ApplyTransform, InverseRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud c;
    for (int i = 0; i < 200; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
    const auto t = randomTransform(rng, 100.0);
    const auto back = applyTransform(invert(t), applyTransform(t, c));
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((back.points[i] - c.points[i]).cwiseAbs().maxCoeff(), 1e-7);
    }
  }
}

TEST(ApplyTransform, MovesViewpointAndKeepsColors) {
  PointCloud c;
  c.points = {{0, 0, 0}};
  c.colors = std::vector<Rgb>{{1, 2, 3}};
  const auto out = applyTransform(RigidTransform::fromTranslation({0, 0, 2}), c);
  EXPECT_TRUE(out.viewpoint.isApprox(Point3(0, 0, 2)));
  ASSERT_TRUE(out.colors);
  EXPECT_EQ((*out.colors)[0], (Rgb{1, 2, 3}));
}

TEST(PointCloud, ValidateRejectsBadInput) {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 1, 1}};
  c.colors = std::vector<Rgb>(1);
  EXPECT_THROW(c.validate(), InputError);
  c.colors.reset();
  c.points[1].x() = std::nan("");
  EXPECT_THROW(c.validate(), InputError);
}

TEST(TransformPlane, IdentityKeepsPlane) {
  const auto s = test::segmentOf(test::gridRect(2, 1.0, 0, 0, 1, 1, 0.5), {0, 0, 5});
  const auto t = transformPlane(RigidTransform::identity(), s);
  EXPECT_TRUE(t.normal.isApprox(s.normal));
  EXPECT_DOUBLE_EQ(t.distance, s.distance);
}

TEST(TransformPlane, OffsetAlongNormal) {
  PlanarSegment s = test::plane({0, 0, 1}, 0.0);
  const auto t = transformPlane(RigidTransform::fromTranslation({0, 0, 2}), s);
  EXPECT_NEAR(t.distance, 2.0, 1e-15);
}

TEST(TransformPlane, QuarterTurnKeepsInliersOnPlane) {
  // n = (1,0,0), d = 1, rotated 90 deg about z.
  const auto s = test::segmentOf(test::gridRect(0, 1.0, -1, -1, 1, 1, 0.5), {5, 0, 0});
  const auto r = RigidTransform::fromAxisAngle(Vec3::UnitZ(), kPi / 2);
  const auto t = transformPlane(r, s);
  EXPECT_LT((t.normal - Vec3(0, 1, 0)).norm(), 1e-12);
  EXPECT_NEAR(t.distance, 1.0, 1e-12);
  for (const auto& p : s.points) EXPECT_NEAR(t.signedDistance(r(p)), 0.0, 1e-12);
}

TEST(TransformPlane, CommutesWithRefitting) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto base = test::randomTransform(rng);
    std::vector<Point3> pts;
    for (int i = 0; i < 100; ++i) pts.push_back(base(Point3(u(rng), u(rng), 0.0)));
    const auto seg = test::segmentOf(pts, base(Point3(0, 0, 2)));
    const auto t = test::randomTransform(rng);
    const auto moved = transformPlane(t, seg);
    std::vector<Point3> moved_pts;
    for (const auto& p : pts) moved_pts.push_back(t(p));
    const PlaneFit fit = fitPlane(moved_pts);
    const double sign = fit.normal.dot(moved.normal) < 0 ? -1.0 : 1.0;
    EXPECT_LT((sign * fit.normal - moved.normal).norm(), 1e-6);
    EXPECT_NEAR(sign * fit.distance, moved.distance, 1e-6);
    EXPECT_LT((moved.centroid - fit.centroid).norm(), 1e-9);
  }
}

TEST(FitPlane, ExactPlaneHasZeroCurvature) {
  const auto pts = test::gridRect(1, -2.0, 0, 0, 3, 2, 0.5);
  const PlaneFit f = fitPlane(pts);
  EXPECT_NEAR(std::abs(f.normal.y()), 1.0, 1e-12);
  EXPECT_NEAR(f.normal.dot(pts[0]), f.distance, 1e-12);
  EXPECT_NEAR(f.curvature, 0.0, 1e-12);
}

TEST(OrientTowards, FlipsAwayNormal) {
  Vec3 n(0, 0, 1);
  double d = 1.0;
  orientTowards(n, d, Point3::Zero());  // origin is below z = 1
  EXPECT_EQ(n, Vec3(0, 0, -1));
  EXPECT_EQ(d, -1.0);
  orientTowards(n, d, Point3::Zero());
  EXPECT_EQ(n, Vec3(0, 0, -1));
}

TEST(Box3, EmptyAndExtend) {
  Box3 b;
  EXPECT_TRUE(b.empty());
  b.extend({1, 2, 3});
  b.extend({-1, 0, 5});
  EXPECT_FALSE(b.empty());
  EXPECT_EQ(b.min, Point3(-1, 0, 3));
  EXPECT_EQ(b.max, Point3(1, 2, 5));
  EXPECT_TRUE(b.grown(1.0).contains({-2, -1, 2}));
  EXPECT_FALSE(b.contains({0, 0, 0}));
}

TEST(Trajectory, RejectsNonIncreasingOrNonFiniteTimestamps) {
  Trajectory t;
  t.append({1.0, {}});
  EXPECT_THROW(t.append({1.0, {}}), InputError);
  EXPECT_THROW(t.append({0.5, {}}), InputError);
  EXPECT_THROW(t.append({std::nan(""), {}}), InputError);
  t.append({2.0, RigidTransform::fromTranslation({1, 2, 3})});
  ASSERT_EQ(t.positions().size(), 2u);
  EXPECT_EQ(t.positions()[1], Point3(1, 2, 3));
}

}  // namespace
}  // namespace planereg
