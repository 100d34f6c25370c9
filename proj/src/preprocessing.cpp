#include "planereg/preprocessing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "planereg/errors.hpp"
#include "planereg/kdtree.hpp"

namespace planereg {
namespace {

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::size_t h = static_cast<std::size_t>(k[0]) * 73856093u;
    h ^= static_cast<std::size_t>(k[1]) * 19349663u;
    h ^= static_cast<std::size_t>(k[2]) * 83492791u;
    return h;
  }
};

struct VoxelAccumulator {
  Point3 sum = Point3::Zero();
  Eigen::Vector3d color_sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
};

std::uint8_t roundChannel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Index of the GPS pose nearest in time to t (GPS timestamps are sorted).
std::size_t nearestByTime(const Trajectory& gps, double t) {
  const auto& poses = gps.poses();
  auto it = std::lower_bound(
      poses.begin(), poses.end(), t,
      [](const Pose& p, double value) { return p.timestamp < value; });
  if (it == poses.begin()) return 0;
  if (it == poses.end()) return poses.size() - 1;
  const auto hi = static_cast<std::size_t>(it - poses.begin());
  return (t - poses[hi - 1].timestamp) <= (poses[hi].timestamp - t) ? hi - 1 : hi;
}

}  // namespace

PointCloud voxelFilter(const PointCloud& cloud, double leaf) {
  if (!(std::isfinite(leaf) && leaf > 0.0)) {
    throw ParameterError("voxel leaf must be positive");
  }
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slots;
  std::vector<VoxelAccumulator> voxels;
  slots.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                       static_cast<std::int64_t>(std::floor(p.z() / leaf))};
    auto [it, inserted] = slots.try_emplace(key, voxels.size());
    if (inserted) voxels.emplace_back();
    auto& acc = voxels[it->second];
    acc.sum += p;
    if (cloud.colors) {
      const Rgb& c = (*cloud.colors)[i];
      acc.color_sum += Eigen::Vector3d(c.r, c.g, c.b);
    }
    ++acc.count;
  }

  PointCloud out;
  out.source = cloud.source;
  out.viewpoint = cloud.viewpoint;
  out.points.reserve(voxels.size());
  if (cloud.colors) out.colors.emplace().reserve(voxels.size());
  for (const auto& v : voxels) {
    const double n = static_cast<double>(v.count);
    out.points.push_back(v.sum / n);
    if (out.colors) {
      const Eigen::Vector3d c = v.color_sum / n;
      out.colors->push_back({roundChannel(c.x()), roundChannel(c.y()),
                             roundChannel(c.z())});
    }
  }
  return out;
}

PointCloud outlierFilter(const PointCloud& cloud, std::size_t k, double mult) {
  if (k < 1) throw ParameterError("outlier filter needs k >= 1");
  if (!(std::isfinite(mult) && mult > 0.0)) {
    throw ParameterError("outlier stddev multiplier must be positive");
  }
  if (cloud.size() <= k) {
    throw ParameterError("outlier filter needs more than k=" +
                         std::to_string(k) + " points, got " +
                         std::to_string(cloud.size()));
  }

  const KdTree tree(cloud.points);
  std::vector<double> mean_dist(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto nn = tree.knn(cloud.points[i], k + 1);
    // Drop the query point itself; with duplicates it may not come first.
    auto self = std::find_if(nn.begin(), nn.end(),
                             [i](const auto& n) { return n.index == i; });
    if (self != nn.end()) {
      nn.erase(self);
    } else {
      nn.pop_back();
    }
    double sum = 0.0;
    for (const auto& n : nn) sum += std::sqrt(n.squared_distance);
    mean_dist[i] = sum / static_cast<double>(nn.size());
  }

  double mean = 0.0;
  for (double d : mean_dist) mean += d;
  mean /= static_cast<double>(mean_dist.size());
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  const double stddev = std::sqrt(var / static_cast<double>(mean_dist.size()));
  // Slack keeps rounding noise from splitting a homogeneous statistic.
  const double threshold = mean + mult * stddev + 1e-9 * std::max(1.0, mean);

  PointCloud out;
  out.source = cloud.source;
  out.viewpoint = cloud.viewpoint;
  if (cloud.colors) out.colors.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mean_dist[i] > threshold) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.colors) out.colors->push_back((*cloud.colors)[i]);
  }
  return out;
}

PointCloud preprocess(const PointCloud& cloud, const FilterParams& params) {
  params.validate();
  const double leaf = cloud.source == SourceTag::kVision
                          ? params.vision_voxel_leaf
                          : params.voxel_leaf;
  PointCloud out = voxelFilter(cloud, leaf);
  if (out.size() > params.outlier_neighbors) {
    out = outlierFilter(out, params.outlier_neighbors,
                        params.outlier_stddev_mult);
  }
  return out;
}

double estimateScale(const Trajectory& vision, const Trajectory& gps) {
  if (vision.size() < 2 || gps.size() < 2) {
    throw InputError("scale estimation needs at least 2 poses per trajectory");
  }
  const bool overlap_in_time =
      vision.poses().front().timestamp <= gps.poses().back().timestamp &&
      gps.poses().front().timestamp <= vision.poses().back().timestamp;

  std::vector<Point3> assigned;
  assigned.reserve(vision.size());
  for (std::size_t i = 0; i < vision.size(); ++i) {
    std::size_t j;
    if (overlap_in_time) {
      j = nearestByTime(gps, vision[i].timestamp);
    } else {
      const double u = static_cast<double>(i) /
                       static_cast<double>(vision.size() - 1);
      j = static_cast<std::size_t>(
          std::lround(u * static_cast<double>(gps.size() - 1)));
    }
    assigned.push_back(gps[j].transform.translation);
  }

  double vision_sum = 0.0;
  double gps_sum = 0.0;
  for (std::size_t i = 1; i < vision.size(); ++i) {
    vision_sum += (vision[i].transform.translation -
                   vision[i - 1].transform.translation)
                      .norm();
    gps_sum += (assigned[i] - assigned[i - 1]).norm();
  }
  const double steps = static_cast<double>(vision.size() - 1);
  const double vision_mean = vision_sum / steps;
  if (!(vision_mean > 0.0)) {
    throw ScaleError("vision trajectory has zero mean step length");
  }
  return (gps_sum / steps) / vision_mean;
}

PointCloud scaleCloud(const PointCloud& cloud, double s) {
  if (!(std::isfinite(s) && s > 0.0)) {
    throw ParameterError("scale factor must be positive");
  }
  PointCloud out = cloud;
  for (auto& p : out.points) p *= s;
  out.viewpoint *= s;
  return out;
}

Trajectory scaleTrajectory(const Trajectory& trajectory, double s) {
  if (!(std::isfinite(s) && s > 0.0)) {
    throw ParameterError("scale factor must be positive");
  }
  Trajectory out;
  for (Pose p : trajectory) {
    p.transform.translation *= s;
    out.append(p);
  }
  return out;
}

}  // namespace planereg
