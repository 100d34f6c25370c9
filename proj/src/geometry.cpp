#include "planereg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "planereg/errors.hpp"

namespace planereg {

void PointCloud::validate() const {
  if (colors && colors->size() != points.size()) {
    throw InputError("point cloud has " + std::to_string(points.size()) +
                     " points but " + std::to_string(colors->size()) +
                     " colors");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw InputError("point " + std::to_string(i) + " is not finite");
    }
  }
}

Box3 boundingBox(std::span<const Point3> points) {
  Box3 box;
  for (const auto& p : points) box.extend(p);
  return box;
}

RigidTransform RigidTransform::fromTranslation(const Vec3& t) {
  RigidTransform out;
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::fromAxisAngle(const Vec3& axis, double angle,
                                             const Vec3& t) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::fromQuaternion(const Eigen::Quaterniond& q,
                                              const Vec3& t) {
  RigidTransform out;
  out.rotation = q.normalized().toRotationMatrix();
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::fromMatrix(const Eigen::Matrix4d& m) {
  RigidTransform out;
  out.rotation = nearestRotation(m.topLeftCorner<3, 3>());
  out.translation = m.topRightCorner<3, 1>();
  return out;
}

Eigen::Quaterniond RigidTransform::quaternion() const {
  return Eigen::Quaterniond(rotation).normalized();
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

double RigidTransform::angle() const {
  return rotationDistance(Mat3::Identity(), rotation);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

double rotationDistance(const Mat3& a, const Mat3& b) {
  const Eigen::Quaterniond q(a.transpose() * b);
  const double w = std::abs(q.w());
  return 2.0 * std::atan2(q.vec().norm(), w);
}

Mat3 nearestRotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Trajectory::Trajectory(std::vector<Pose> poses) {
  poses_.reserve(poses.size());
  for (const auto& p : poses) append(p);
}

void Trajectory::append(const Pose& pose) {
  if (!std::isfinite(pose.timestamp)) {
    throw InputError("trajectory timestamp is not finite");
  }
  if (!poses_.empty() && pose.timestamp <= poses_.back().timestamp) {
    throw InputError("trajectory timestamps must be strictly increasing");
  }
  poses_.push_back(pose);
}

std::vector<Point3> Trajectory::positions() const {
  std::vector<Point3> out;
  out.reserve(poses_.size());
  for (const auto& p : poses_) out.push_back(p.transform.translation);
  return out;
}

PlaneFit fitPlane(std::span<const Point3> points) {
  if (points.size() < 3) {
    throw InputError("plane fit needs at least 3 points");
  }
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 q = p - centroid;
    cov.noalias() += q * q.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  PlaneFit fit;
  fit.normal = solver.eigenvectors().col(0).normalized();
  fit.centroid = centroid;
  fit.distance = fit.normal.dot(centroid);
  const double total = solver.eigenvalues().sum();
  fit.curvature = total > 0.0 ? std::max(0.0, solver.eigenvalues()(0)) / total : 0.0;
  return fit;
}

void orientTowards(Vec3& normal, double& distance, const Point3& viewpoint) {
  if (normal.dot(viewpoint) - distance < 0.0) {
    normal = -normal;
    distance = -distance;
  }
}

PointCloud applyTransform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t(p));
  out.colors = cloud.colors;
  out.source = cloud.source;
  out.viewpoint = t(cloud.viewpoint);
  return out;
}

PlanarSegment transformPlane(const RigidTransform& t, const PlanarSegment& s) {
  PlanarSegment out;
  out.normal = (t.rotation * s.normal).normalized();
  out.distance = s.distance + out.normal.dot(t.translation);
  out.inliers = s.inliers;
  out.area = s.area;
  out.centroid = t(s.centroid);
  out.points.reserve(s.points.size());
  Box3 box;
  for (const auto& p : s.points) {
    out.points.push_back(t(p));
    box.extend(out.points.back());
  }
  if (box.empty()) {
    // No support points: carry the box corners through the transform.
    for (int corner = 0; corner < 8; ++corner) {
      const Point3 p((corner & 1) ? s.extent_max.x() : s.extent_min.x(),
                     (corner & 2) ? s.extent_max.y() : s.extent_min.y(),
                     (corner & 4) ? s.extent_max.z() : s.extent_min.z());
      box.extend(t(p));
    }
  }
  out.extent_min = box.min;
  out.extent_max = box.max;
  return out;
}

}  // namespace planereg
