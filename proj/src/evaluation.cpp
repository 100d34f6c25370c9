#include "planereg/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "planereg/errors.hpp"

namespace planereg {

ErrorStats makeErrorStats(std::vector<double> errors) {
  ErrorStats stats;
  stats.per_pose = std::move(errors);
  if (stats.per_pose.empty()) return stats;
  double sq = 0.0;
  for (double e : stats.per_pose) sq += e * e;
  stats.rmse = std::sqrt(sq / static_cast<double>(stats.per_pose.size()));
  const auto [lo, hi] =
      std::minmax_element(stats.per_pose.begin(), stats.per_pose.end());
  stats.min = *lo;
  stats.max = *hi;
  return stats;
}

std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& est, const Trajectory& ref, double max_dt) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t next_ref = 0;
  for (std::size_t i = 0; i < est.size() && next_ref < ref.size(); ++i) {
    const double t = est[i].timestamp;
    std::size_t best = ref.size();
    double best_dt = max_dt;
    for (std::size_t j = next_ref; j < ref.size(); ++j) {
      const double dt = ref[j].timestamp - t;
      if (dt > max_dt) break;
      if (std::abs(dt) <= best_dt) {
        best_dt = std::abs(dt);
        best = j;
      }
    }
    if (best == ref.size()) continue;
    out.emplace_back(i, best);
    next_ref = best + 1;
  }
  return out;
}

ErrorStats computeRpe(const Trajectory& est, const Trajectory& ref,
                      std::size_t delta) {
  if (delta == 0) throw ParameterError("RPE delta must be at least 1");
  const auto pairs = associate(est, ref);
  if (pairs.size() < delta + 1) {
    throw InputError("RPE needs at least " + std::to_string(delta + 1) +
                     " associated poses, got " + std::to_string(pairs.size()));
  }
  std::vector<double> errors;
  errors.reserve(pairs.size() - delta);
  for (std::size_t i = 0; i + delta < pairs.size(); ++i) {
    const auto& [ea, ra] = pairs[i];
    const auto& [eb, rb] = pairs[i + delta];
    const RigidTransform rel_ref =
        compose(invert(ref[ra].transform), ref[rb].transform);
    const RigidTransform rel_est =
        compose(invert(est[ea].transform), est[eb].transform);
    errors.push_back(compose(invert(rel_ref), rel_est).translation.norm());
  }
  return makeErrorStats(std::move(errors));
}

RigidTransform alignPositions(std::span<const Point3> src,
                              std::span<const Point3> dst, bool* degenerate) {
  if (src.size() != dst.size() || src.empty()) {
    throw InputError("alignment needs equally sized, non-empty point sets");
  }
  const double n = static_cast<double>(src.size());
  Point3 src_mean = Point3::Zero();
  Point3 dst_mean = Point3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= n;
  dst_mean /= n;

  Mat3 cross = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - src_mean;
    cross.noalias() += (dst[i] - dst_mean) * a.transpose();
    spread.noalias() += a * a.transpose();
  }

  Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const auto& s = spread_svd.singularValues();
  const bool collinear = s(0) <= 0.0 || s(1) <= 1e-12 * s(0);
  if (degenerate) *degenerate = collinear;

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 rotation = Mat3::Identity();
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0) {
    rotation.setIdentity();
  } else if (collinear || sv(1) <= 1e-12 * sv(0)) {
    rotation = Eigen::Quaterniond::FromTwoVectors(
                   Vec3(svd.matrixV().col(0)), Vec3(svd.matrixU().col(0)))
                   .toRotationMatrix();
  } else {
    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
      d(2, 2) = -1.0;
    }
    rotation = svd.matrixU() * d * svd.matrixV().transpose();
  }
  RigidTransform out;
  out.rotation = rotation;
  out.translation = dst_mean - rotation * src_mean;
  return out;
}

ErrorStats computeAte(const Trajectory& est, const Trajectory& ref) {
  const auto pairs = associate(est, ref);
  if (pairs.size() < 3) {
    throw InputError("ATE needs at least 3 associated poses, got " +
                     std::to_string(pairs.size()));
  }
  std::vector<Point3> src;
  std::vector<Point3> dst;
  for (const auto& [e, r] : pairs) {
    src.push_back(est[e].transform.translation);
    dst.push_back(ref[r].transform.translation);
  }
  bool degenerate = false;
  const RigidTransform align = alignPositions(src, dst, &degenerate);
  std::vector<double> errors;
  errors.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    errors.push_back((dst[i] - align(src[i])).norm());
  }
  ErrorStats stats = makeErrorStats(std::move(errors));
  stats.degenerate = degenerate;
  return stats;
}

}  // namespace planereg
