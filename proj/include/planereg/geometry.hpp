#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace planereg {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class SourceTag { kLaser, kVision };

/// Unordered bag of 3D points with optional per-point color.
///
/// `viewpoint` is the sensor origin in the cloud's own frame. Plane normals
/// extracted from the cloud are oriented towards it so that planes matched
/// across clouds carry comparable signs.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<Rgb>> colors;
  SourceTag source = SourceTag::kLaser;
  Point3 viewpoint = Point3::Zero();

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool hasColors() const { return colors.has_value(); }

  // Throws InputError if colors are present but not one per point, or a
  // coordinate is not finite.
  void validate() const;
};

/// Axis-aligned bounding box. An empty box has min > max.
struct Box3 {
  Point3 min = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 max = Point3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (min.array() > max.array()).any(); }
  void extend(const Point3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool contains(const Point3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Box3 grown(double margin) const {
    Box3 out;
    out.min = min - Vec3::Constant(margin);
    out.max = max + Vec3::Constant(margin);
    return out;
  }
  Point3 center() const { return 0.5 * (min + max); }
  Vec3 size() const { return max - min; }
};

Box3 boundingBox(std::span<const Point3> points);

/// Rigid motion p -> R p + t.
///
/// Transforms estimated from plane correspondences carry the rank of the
/// translation constraint and the unobserved translation directions.
/// Composition and inversion drop those annotations (rank resets to 3).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int translation_rank = 3;
  std::vector<Vec3> null_directions;

  static RigidTransform identity() { return {}; }
  static RigidTransform fromTranslation(const Vec3& t);
  static RigidTransform fromAxisAngle(const Vec3& axis, double angle,
                                      const Vec3& t = Vec3::Zero());
  static RigidTransform fromQuaternion(const Eigen::Quaterniond& q,
                                       const Vec3& t);
  // Rotation is re-orthonormalized from the upper-left 3x3 block.
  static RigidTransform fromMatrix(const Eigen::Matrix4d& m);

  Point3 operator()(const Point3& p) const { return rotation * p + translation; }

  Eigen::Quaterniond quaternion() const;
  Eigen::Matrix4d matrix() const;
  // Rotation angle in radians, in [0, pi].
  double angle() const;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

// Geodesic distance between two rotations in radians.
double rotationDistance(const Mat3& a, const Mat3& b);

// Projects an arbitrary 3x3 matrix onto SO(3).
Mat3 nearestRotation(const Mat3& m);

struct Pose {
  double timestamp = 0.0;
  RigidTransform transform;  // map-from-body
};

/// Time-ordered pose sequence with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Pose> poses);

  // Throws InputError on a non-finite or non-increasing timestamp.
  void append(const Pose& pose);

  const std::vector<Pose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const Pose& operator[](std::size_t i) const { return poses_[i]; }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

  std::vector<Point3> positions() const;

 private:
  std::vector<Pose> poses_;
};

/// Plane n.p = d with its supporting points.
///
/// `points` holds a copy of the inlier coordinates so the segment can be
/// transformed without its owning cloud; `inliers` indexes that cloud.
struct PlanarSegment {
  Vec3 normal = Vec3::UnitZ();
  double distance = 0.0;
  std::vector<std::size_t> inliers;
  std::vector<Point3> points;
  double area = 0.0;
  Point3 extent_min = Point3::Zero();
  Point3 extent_max = Point3::Zero();
  Point3 centroid = Point3::Zero();

  double signedDistance(const Point3& p) const { return normal.dot(p) - distance; }
};

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double distance = 0.0;
  Point3 centroid = Point3::Zero();
  // Smallest covariance eigenvalue over the eigenvalue sum.
  double curvature = 0.0;
};

// Total least-squares plane through the points (PCA). Requires >= 3 points;
// the normal sign is unspecified.
PlaneFit fitPlane(std::span<const Point3> points);

// Flips the plane so that the viewpoint lies on its positive side.
void orientTowards(Vec3& normal, double& distance, const Point3& viewpoint);

PointCloud applyTransform(const RigidTransform& t, const PointCloud& cloud);
PlanarSegment transformPlane(const RigidTransform& t, const PlanarSegment& s);

}  // namespace planereg
