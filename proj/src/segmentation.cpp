#include "planereg/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "planereg/errors.hpp"
#include "planereg/kdtree.hpp"

namespace planereg {
namespace {

struct LocalShape {
  Vec3 normal = Vec3::UnitZ();
  double curvature = std::numeric_limits<double>::infinity();
};

std::vector<LocalShape> estimateLocalShapes(const KdTree& tree,
                                            std::size_t k) {
  const auto& pts = tree.points();
  std::vector<LocalShape> shapes(pts.size());
  std::vector<Point3> hood;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto nn = tree.knn(pts[i], k);
    if (nn.size() < 3) continue;
    hood.clear();
    for (const auto& n : nn) hood.push_back(pts[n.index]);
    const PlaneFit fit = fitPlane(hood);
    shapes[i].normal = fit.normal;
    shapes[i].curvature = fit.curvature;
  }
  return shapes;
}

std::vector<Point3> gather(const PointCloud& cloud,
                           std::span<const std::size_t> indices) {
  std::vector<Point3> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(cloud.points[i]);
  return out;
}

// Refits until every member lies within the threshold of the least-squares
// plane of the members. Returns false if fewer than 3 members survive.
bool pruneToThreshold(const PointCloud& cloud, std::vector<std::size_t>& members,
                      double threshold) {
  constexpr int kMaxRounds = 50;
  for (int round = 0; round < kMaxRounds; ++round) {
    if (members.size() < 3) return false;
    const PlaneFit fit = fitPlane(gather(cloud, members));
    const auto before = members.size();
    std::erase_if(members, [&](std::size_t i) {
      return std::abs(fit.normal.dot(cloud.points[i]) - fit.distance) > threshold;
    });
    if (members.size() == before) return true;
  }
  return false;
}

}  // namespace

std::vector<Eigen::Vector2d> convexHull(std::vector<Eigen::Vector2d> points) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;

  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (auto it = points.rbegin() + 1; it != points.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0.0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  return hull;
}

double polygonArea(std::span<const Eigen::Vector2d> polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % polygon.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(twice);
}

double planarHullArea(std::span<const Point3> points, const Vec3& normal) {
  if (points.size() < 3) return 0.0;
  const Vec3 n = normal.normalized();
  const Vec3 u = n.unitOrthogonal();
  const Vec3 v = n.cross(u);
  // Projection relative to the first point keeps magnitudes small.
  const Point3& origin = points.front();
  std::vector<Eigen::Vector2d> projected;
  projected.reserve(points.size());
  for (const auto& p : points) {
    const Vec3 q = p - origin;
    projected.emplace_back(q.dot(u), q.dot(v));
  }
  const auto hull = convexHull(std::move(projected));
  return polygonArea(hull);
}

double segmentArea(const PlanarSegment& segment, const PointCloud& cloud) {
  if (segment.inliers.size() < 3) return 0.0;
  return planarHullArea(gather(cloud, segment.inliers), segment.normal);
}

PlanarSegment makeSegment(const PointCloud& cloud,
                          std::vector<std::size_t> inliers) {
  PlanarSegment seg;
  seg.points = gather(cloud, inliers);
  const PlaneFit fit = fitPlane(seg.points);
  seg.normal = fit.normal;
  seg.distance = fit.distance;
  orientTowards(seg.normal, seg.distance, cloud.viewpoint);
  seg.centroid = fit.centroid;
  const Box3 box = boundingBox(seg.points);
  seg.extent_min = box.min;
  seg.extent_max = box.max;
  seg.inliers = std::move(inliers);
  seg.area = planarHullArea(seg.points, seg.normal);
  return seg;
}

std::vector<PlanarSegment> segmentPlanes(const PointCloud& cloud,
                                         const SegmentationParams& params) {
  params.validate();
  if (cloud.empty()) throw InputError("cannot segment an empty point cloud");

  const KdTree tree(cloud.points);
  const auto shapes = estimateLocalShapes(tree, params.normal_neighbors);

  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shapes[a].curvature < shapes[b].curvature;
  });

  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> owner(cloud.size(), kUnassigned);
  std::vector<char> tried_as_seed(cloud.size(), 0);
  // region_stamp[i] == current region id means i is in the growing region.
  std::vector<std::size_t> region_stamp(cloud.size(), kUnassigned);
  const double cos_angle = std::cos(params.angle_threshold);

  std::vector<PlanarSegment> segments;
  std::size_t region_id = 0;
  std::vector<std::size_t> members;
  std::deque<std::size_t> frontier;

  for (const std::size_t seed : order) {
    if (owner[seed] != kUnassigned || tried_as_seed[seed]) continue;
    if (!std::isfinite(shapes[seed].curvature)) continue;
    tried_as_seed[seed] = 1;
    ++region_id;

    Vec3 plane_normal = shapes[seed].normal;
    double plane_distance = plane_normal.dot(cloud.points[seed]);
    members.assign(1, seed);
    region_stamp[seed] = region_id;
    frontier.assign(1, seed);
    std::size_t since_refit = 0;

    while (!frontier.empty()) {
      const std::size_t current = frontier.front();
      frontier.pop_front();
      for (const auto& nb : tree.radius(cloud.points[current],
                                        params.neighbor_radius)) {
        const std::size_t j = nb.index;
        if (owner[j] != kUnassigned || region_stamp[j] == region_id) continue;
        if (std::abs(shapes[j].normal.dot(plane_normal)) < cos_angle) continue;
        if (std::abs(plane_normal.dot(cloud.points[j]) - plane_distance) >
            params.distance_threshold) {
          continue;
        }
        region_stamp[j] = region_id;
        members.push_back(j);
        frontier.push_back(j);
        if (++since_refit >= params.refit_interval) {
          since_refit = 0;
          const PlaneFit fit = fitPlane(gather(cloud, members));
          plane_normal = fit.normal;
          plane_distance = fit.distance;
        }
      }
    }

    if (members.size() < params.min_inliers) {
      for (auto m : members) tried_as_seed[m] = 1;
      continue;
    }
    std::vector<std::size_t> inliers = members;
    if (!pruneToThreshold(cloud, inliers, params.distance_threshold) ||
        inliers.size() < params.min_inliers) {
      for (auto m : members) tried_as_seed[m] = 1;
      continue;
    }
    std::sort(inliers.begin(), inliers.end());
    PlanarSegment seg = makeSegment(cloud, std::move(inliers));
    if (seg.area < params.min_area) {
      for (auto m : members) tried_as_seed[m] = 1;
      continue;
    }
    for (auto i : seg.inliers) owner[i] = segments.size();
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace planereg
