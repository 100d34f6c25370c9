#include "planereg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "planereg/errors.hpp"
#include "planereg/kdtree.hpp"
#include "planereg/segmentation.hpp"

namespace planereg {
namespace {

// Below this ratio of the second to the first singular value of the normal
// correlation matrix all matched normals are treated as parallel.
constexpr double kParallelNormalsRatio = 1e-6;

double clampedAngle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

struct Candidate {
  std::size_t source;
  std::size_t target;
  double score;
  double source_area;
};

}  // namespace

void CorrespondenceSet::validate(std::size_t num_source,
                                 std::size_t num_target) const {
  std::vector<char> seen_src(num_source, 0);
  std::vector<char> seen_tgt(num_target, 0);
  for (const auto& c : pairs) {
    if (c.source >= num_source || c.target >= num_target) {
      throw InputError("correspondence index out of range");
    }
    if (seen_src[c.source]++ || seen_tgt[c.target]++) {
      throw InputError("correspondence set is not one-to-one");
    }
  }
}

bool checkOverlap(const PlanarSegment& source, const PlanarSegment& target,
                  const RigidTransform& transform, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("overlap epsilon must be positive");
  const PlanarSegment moved = transformPlane(transform, source);
  Eigen::Index skip = 0;
  target.normal.cwiseAbs().maxCoeff(&skip);
  for (Eigen::Index axis = 0; axis < 3; ++axis) {
    if (axis == skip) continue;
    const bool ok = target.extent_min(axis) < moved.extent_max(axis) + epsilon &&
                    moved.extent_min(axis) < target.extent_max(axis) + epsilon;
    if (!ok) return false;
  }
  return true;
}

Mat3 estimateRotation(std::span<const PlanarSegment> source,
                      std::span<const PlanarSegment> target,
                      const CorrespondenceSet& correspondences) {
  if (correspondences.empty()) {
    throw InputError("rotation estimation needs at least one correspondence");
  }
  correspondences.validate(source.size(), target.size());

  Mat3 correlation = Mat3::Zero();
  for (const auto& c : correspondences.pairs) {
    correlation.noalias() +=
        target[c.target].normal * source[c.source].normal.transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(correlation,
                             Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(0) <= 0.0) return Mat3::Identity();
  if (sv(1) <= kParallelNormalsRatio * sv(0)) {
    // Only one direction is observed: the objective is flat around it, take
    // the smallest rotation that maps the dominant source direction onto the
    // dominant target direction.
    const Vec3 from = svd.matrixV().col(0);
    const Vec3 to = svd.matrixU().col(0);
    return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
  }
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double rotationObjective(const Mat3& rotation,
                         std::span<const PlanarSegment> source,
                         std::span<const PlanarSegment> target,
                         const CorrespondenceSet& correspondences) {
  double f = 0.0;
  for (const auto& c : correspondences.pairs) {
    f += (rotation * source[c.source].normal - target[c.target].normal)
             .squaredNorm();
  }
  return 0.5 * f;
}

TranslationEstimate solveTranslation(const Eigen::MatrixX3d& normals,
                                     const Eigen::VectorXd& offsets,
                                     double rank_tol,
                                     const std::optional<Vec3>& odometry) {
  if (normals.rows() == 0) {
    throw InputError("translation estimation needs at least one plane pair");
  }
  if (normals.rows() != offsets.rows()) {
    throw InputError("normal matrix and offset vector sizes differ");
  }
  if (!(rank_tol > 0.0)) throw ParameterError("rank_tol must be positive");

  const Eigen::MatrixXd n = normals;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(n, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();

  TranslationEstimate est;
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > rank_tol * sigma_max && sigma(i) > 0.0) ++rank;
  }
  est.rank = rank;
  for (int i = 0; i < rank; ++i) {
    est.translation += (u.col(i).dot(offsets) / sigma(i)) * v.col(i);
  }
  for (int i = rank; i < 3; ++i) {
    const Vec3 dir = v.col(i);
    est.null_directions.push_back(dir);
    if (odometry) est.translation += odometry->dot(dir) * dir;
  }
  est.residual = (normals * est.translation - offsets).norm();
  return est;
}

TranslationEstimate estimateTranslation(std::span<const PlanarSegment> source,
                                        std::span<const PlanarSegment> target,
                                        const CorrespondenceSet& correspondences,
                                        const Mat3& rotation, double rank_tol,
                                        const std::optional<Vec3>& odometry) {
  if (correspondences.empty()) {
    throw InputError("translation estimation needs at least one correspondence");
  }
  correspondences.validate(source.size(), target.size());
  (void)rotation;  // distances are invariant under rotation about the origin
  const auto rows = static_cast<Eigen::Index>(correspondences.size());
  Eigen::MatrixX3d normals(rows, 3);
  Eigen::VectorXd offsets(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& c = correspondences.pairs[static_cast<std::size_t>(i)];
    normals.row(i) = target[c.target].normal.transpose();
    offsets(i) = target[c.target].distance - source[c.source].distance;
  }
  return solveTranslation(normals, offsets, rank_tol, odometry);
}

RigidTransform estimateTransform(std::span<const PlanarSegment> source,
                                 std::span<const PlanarSegment> target,
                                 const CorrespondenceSet& correspondences,
                                 double rank_tol,
                                 const std::optional<Vec3>& odometry) {
  RigidTransform out;
  out.rotation = estimateRotation(source, target, correspondences);
  const auto t = estimateTranslation(source, target, correspondences,
                                     out.rotation, rank_tol, odometry);
  out.translation = t.translation;
  out.translation_rank = t.rank;
  out.null_directions = t.null_directions;
  return out;
}

CorrespondenceSet matchPlanes(std::span<const PlanarSegment> source,
                              std::span<const PlanarSegment> target,
                              const MatchParams& params,
                              const RigidTransform& hint) {
  params.validate();
  std::vector<PlanarSegment> moved;
  moved.reserve(source.size());
  for (const auto& s : source) moved.push_back(transformPlane(hint, s));

  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double angle = clampedAngle(moved[i].normal, target[j].normal);
      if (angle > params.angle_tol) continue;
      const double delta = std::abs(moved[i].distance - target[j].distance);
      if (delta > params.distance_tol) continue;
      const double big = std::max(moved[i].area, target[j].area);
      const double ratio =
          big > 0.0 ? std::min(moved[i].area, target[j].area) / big : 1.0;
      if (ratio < params.area_ratio_tol) continue;
      const double score = 0.5 * (1.0 - angle / params.angle_tol) +
                           0.3 * (1.0 - delta / params.distance_tol) +
                           0.2 * ratio;
      candidates.push_back({i, j, score, source[i].area});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.source_area != b.source_area) return a.source_area > b.source_area;
              if (a.source != b.source) return a.source < b.source;
              return a.target < b.target;
            });

  std::vector<char> used_src(source.size(), 0);
  std::vector<char> used_tgt(target.size(), 0);
  std::vector<Candidate> chosen;
  for (const auto& c : candidates) {
    if (used_src[c.source] || used_tgt[c.target]) continue;
    used_src[c.source] = used_tgt[c.target] = 1;
    chosen.push_back(c);
  }

  auto toSet = [](const std::vector<Candidate>& cs) {
    CorrespondenceSet set;
    set.pairs.reserve(cs.size());
    for (const auto& c : cs) set.pairs.push_back({c.source, c.target});
    return set;
  };

  // Overlap verification under the transform of the tentative set.
  while (!chosen.empty()) {
    const RigidTransform tentative = estimateTransform(
        source, target, toSet(chosen), params.rank_tol, hint.translation);
    std::ptrdiff_t worst = -1;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (checkOverlap(source[chosen[k].source], target[chosen[k].target],
                       tentative, params.overlap_epsilon)) {
        continue;
      }
      // chosen is sorted by decreasing score; keep the last offender.
      worst = static_cast<std::ptrdiff_t>(k);
    }
    if (worst < 0) break;
    chosen.erase(chosen.begin() + worst);
  }

  CorrespondenceSet out = toSet(chosen);
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const auto& a, const auto& b) { return a.source < b.source; });
  return out;
}

RegistrationResult registerSegments(std::span<const PlanarSegment> source,
                                    std::span<const PlanarSegment> target,
                                    const MatchParams& params,
                                    const RigidTransform& hint,
                                    const std::optional<Vec3>& odometry) {
  RegistrationResult result;
  result.source_planes = source.size();
  result.target_planes = target.size();
  result.correspondences = matchPlanes(source, target, params, hint);
  if (result.correspondences.empty()) return result;

  const Mat3 rotation =
      estimateRotation(source, target, result.correspondences);
  const TranslationEstimate t =
      estimateTranslation(source, target, result.correspondences, rotation,
                          params.rank_tol, odometry);
  result.transform.rotation = rotation;
  result.transform.translation = t.translation;
  result.transform.translation_rank = t.rank;
  result.transform.null_directions = t.null_directions;
  result.rotation_residual =
      rotationObjective(rotation, source, target, result.correspondences);
  result.translation_residual = t.residual;
  result.success = true;
  return result;
}

RegistrationResult registerClouds(const PointCloud& source,
                                  const PointCloud& target,
                                  const SegmentationParams& seg_params,
                                  const MatchParams& match_params,
                                  const RigidTransform& hint,
                                  const std::optional<Vec3>& odometry) {
  if (source.empty() || target.empty()) {
    throw InputError("registration needs two non-empty clouds");
  }
  const auto src = segmentPlanes(source, seg_params);
  const auto tgt = segmentPlanes(target, seg_params);
  return registerSegments(src, tgt, match_params, hint, odometry);
}

namespace {

struct Pairing {
  Eigen::Matrix3Xd source;
  Eigen::Matrix3Xd target;
  double mean_residual = std::numeric_limits<double>::infinity();
};

Pairing pairPoints(const std::vector<Point3>& source, const KdTree& tree,
                   const RigidTransform& t, double max_dist) {
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto nn = tree.knn(t(source[i]), 1);
    if (nn.empty()) continue;
    const double dist = std::sqrt(nn.front().squared_distance);
    if (dist > max_dist) continue;
    idx.emplace_back(i, nn.front().index);
    sum += dist;
  }
  Pairing p;
  p.source.resize(3, static_cast<Eigen::Index>(idx.size()));
  p.target.resize(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    p.source.col(static_cast<Eigen::Index>(k)) = t(source[idx[k].first]);
    p.target.col(static_cast<Eigen::Index>(k)) = tree.points()[idx[k].second];
  }
  if (!idx.empty()) p.mean_residual = sum / static_cast<double>(idx.size());
  return p;
}

}  // namespace

IcpResult icpRefine(const PointCloud& source, const PointCloud& target,
                    const RigidTransform& initial, const IcpParams& params) {
  params.validate();
  if (source.empty() || target.empty()) {
    throw InputError("ICP needs two non-empty clouds");
  }
  constexpr double kConvergence = 1e-6;
  const KdTree tree(target.points);

  IcpResult result;
  result.transform = initial;
  Pairing pairing = pairPoints(source.points, tree, initial,
                               params.max_correspondence_distance);
  if (pairing.source.cols() == 0) {
    result.no_correspondences = true;
    return result;
  }
  result.mean_residual = pairing.mean_residual;

  RigidTransform current = initial;
  current.translation_rank = 3;
  current.null_directions.clear();
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    if (pairing.source.cols() < 3) break;
    const Eigen::Matrix4d step = Eigen::umeyama(pairing.source, pairing.target, false);
    const RigidTransform delta = RigidTransform::fromMatrix(step);
    current = compose(delta, current);
    result.iterations = iter + 1;

    pairing = pairPoints(source.points, tree, current,
                         params.max_correspondence_distance);
    if (pairing.mean_residual < result.mean_residual) {
      result.mean_residual = pairing.mean_residual;
      result.transform = current;
    }
    const double change = delta.translation.norm() + delta.angle();
    if (change < kConvergence) {
      result.converged = true;
      break;
    }
    if (pairing.source.cols() == 0) break;
  }
  return result;
}

}  // namespace planereg
