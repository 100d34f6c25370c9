#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "planereg/geometry.hpp"
#include "planereg/registration.hpp"
#include "planereg/segmentation.hpp"

namespace planereg::test {

inline Vec3 randomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Mat3 randomRotation(std::mt19937_64& rng, double max_angle = std::numbers::pi) {
  std::uniform_real_distribution<double> u(-max_angle, max_angle);
  return Eigen::AngleAxisd(u(rng), randomUnit(rng)).toRotationMatrix();
}

inline RigidTransform randomTransform(std::mt19937_64& rng, double max_shift = 5.0,
                                      double max_angle = std::numbers::pi) {
  std::uniform_real_distribution<double> u(-max_shift, max_shift);
  RigidTransform t;
  t.rotation = randomRotation(rng, max_angle);
  t.translation = Vec3(u(rng), u(rng), u(rng));
  return t;
}

// Geodesic distance computed from the trace, independent of the library's
// quaternion-based version.
inline double geodesic(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

// Cloud sampling an axis-aligned rectangle on a regular grid.
inline std::vector<Point3> gridRect(int axis, double offset, double lo1, double lo2,
                                    double hi1, double hi2, double step) {
  const int a = axis == 0 ? 1 : 0;
  const int b = axis == 2 ? 1 : 2;
  std::vector<Point3> out;
  for (double u = lo1; u <= hi1 + 1e-9; u += step) {
    for (double v = lo2; v <= hi2 + 1e-9; v += step) {
      Point3 p;
      p(axis) = offset;
      p(a) = u;
      p(b) = v;
      out.push_back(p);
    }
  }
  return out;
}

// Segment built straight from a point set, oriented towards `viewpoint`.
inline PlanarSegment segmentOf(std::vector<Point3> points, const Point3& viewpoint) {
  PointCloud cloud;
  cloud.points = std::move(points);
  cloud.viewpoint = viewpoint;
  std::vector<std::size_t> all(cloud.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return makeSegment(cloud, std::move(all));
}

// The six faces of the box [-hx,hx] x [-hy,hy] x [0,h] seen from `eye`.
inline std::vector<PlanarSegment> roomSegments(double hx = 4.0, double hy = 3.0,
                                               double h = 3.0,
                                               const Point3& eye = {0.3, -0.2, 1.4},
                                               double step = 0.25) {
  return {
      segmentOf(gridRect(2, 0.0, -hx, -hy, hx, hy, step), eye),
      segmentOf(gridRect(2, h, -hx, -hy, hx, hy, step), eye),
      segmentOf(gridRect(0, -hx, -hy, 0.0, hy, h, step), eye),
      segmentOf(gridRect(0, hx, -hy, 0.0, hy, h, step), eye),
      segmentOf(gridRect(1, -hy, -hx, 0.0, hx, h, step), eye),
      segmentOf(gridRect(1, hy, -hx, 0.0, hx, h, step), eye),
  };
}

inline std::vector<PlanarSegment> transformAll(const RigidTransform& t,
                                               const std::vector<PlanarSegment>& s) {
  std::vector<PlanarSegment> out;
  for (const auto& seg : s) out.push_back(transformPlane(t, seg));
  return out;
}

inline CorrespondenceSet identityPairs(std::size_t n) {
  CorrespondenceSet c;
  for (std::size_t i = 0; i < n; ++i) c.pairs.push_back({i, i});
  return c;
}

// Bare segment with only orientation (for rotation/translation solvers).
inline PlanarSegment plane(const Vec3& normal, double distance) {
  PlanarSegment s;
  s.normal = normal.normalized();
  s.distance = distance;
  return s;
}

}  // namespace planereg::test
