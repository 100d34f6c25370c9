#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planereg/geometry.hpp"
#include "planereg/params.hpp"

namespace planereg {

struct Correspondence {
  std::size_t source = 0;  // index into the source (data) segments
  std::size_t target = 0;  // index into the target (model) segments

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// One-to-one pairing of source segments to target segments.
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  // Throws InputError on out-of-range or repeated indices.
  void validate(std::size_t num_source, std::size_t num_target) const;
};

/// Overlap test of a source plane against a target plane.
///
/// `transform` is applied to the source plane first. The planes overlap iff
/// target.min < source.max + eps and source.min < target.max + eps on every
/// axis except the one dominating the target normal.
bool checkOverlap(const PlanarSegment& source, const PlanarSegment& target,
                  const RigidTransform& transform, double epsilon);

/// Greedy one-to-one plane matching.
///
/// Source planes are moved by `hint`; a pair is a candidate if its normal
/// angle, distance difference and area ratio are within `params`. Candidates
/// are taken by decreasing similarity score. The transform estimated from
/// the tentative set must make every retained pair overlap; the lowest
/// scored offending pair is dropped until that holds.
CorrespondenceSet matchPlanes(std::span<const PlanarSegment> source,
                              std::span<const PlanarSegment> target,
                              const MatchParams& params,
                              const RigidTransform& hint);

/// Rotation minimising 0.5 * sum |R n_src - n_tgt|^2 (closed form via SVD of
/// the normal correlation matrix, with determinant correction). When all
/// normals are parallel the smallest rotation aligning their mean
/// directions is returned. Throws InputError on an empty set.
Mat3 estimateRotation(std::span<const PlanarSegment> source,
                      std::span<const PlanarSegment> target,
                      const CorrespondenceSet& correspondences);

double rotationObjective(const Mat3& rotation,
                         std::span<const PlanarSegment> source,
                         std::span<const PlanarSegment> target,
                         const CorrespondenceSet& correspondences);

struct TranslationEstimate {
  Vec3 translation = Vec3::Zero();
  int rank = 0;
  // Right singular vectors beyond the rank: directions the planes leave
  // unconstrained.
  std::vector<Vec3> null_directions;
  // |N t - d|
  double residual = 0.0;
};

/// Rank-aware solve of N t = d.
///
/// With the SVD N = U S V^T and rank r = #{s_i > rank_tol * s_max}:
///   t = sum_{i<=r} (u_i . d) / s_i * v_i  +  sum_{i>r} (t_e . v_i) v_i,
/// the second sum only when `odometry` (t_e) is given.
TranslationEstimate solveTranslation(const Eigen::MatrixX3d& normals,
                                     const Eigen::VectorXd& offsets,
                                     double rank_tol,
                                     const std::optional<Vec3>& odometry = {});

/// Builds N (rows: target normals) and d (target minus source distance) from
/// the correspondences and solves for the translation. Rotating a plane about
/// the origin leaves its distance unchanged, so the source distances enter
/// as-is once `rotation` has been estimated.
TranslationEstimate estimateTranslation(std::span<const PlanarSegment> source,
                                        std::span<const PlanarSegment> target,
                                        const CorrespondenceSet& correspondences,
                                        const Mat3& rotation, double rank_tol,
                                        const std::optional<Vec3>& odometry = {});

// Rotation then translation from a correspondence set.
RigidTransform estimateTransform(std::span<const PlanarSegment> source,
                                 std::span<const PlanarSegment> target,
                                 const CorrespondenceSet& correspondences,
                                 double rank_tol,
                                 const std::optional<Vec3>& odometry = {});

struct RegistrationResult {
  // Maps the source frame into the target frame.
  RigidTransform transform;
  CorrespondenceSet correspondences;
  double rotation_residual = 0.0;
  double translation_residual = 0.0;
  bool success = false;
  std::size_t source_planes = 0;
  std::size_t target_planes = 0;
};

/// Plane-based registration of already segmented clouds.
RegistrationResult registerSegments(std::span<const PlanarSegment> source,
                                    std::span<const PlanarSegment> target,
                                    const MatchParams& params,
                                    const RigidTransform& hint,
                                    const std::optional<Vec3>& odometry = {});

/// Segments both clouds and registers source onto target. A failed
/// registration (no correspondences) has success == false, an empty set
/// and the identity transform. Throws InputError on an empty cloud.
RegistrationResult registerClouds(const PointCloud& source,
                                  const PointCloud& target,
                                  const SegmentationParams& seg_params,
                                  const MatchParams& match_params,
                                  const RigidTransform& hint,
                                  const std::optional<Vec3>& odometry = {});

struct IcpResult {
  RigidTransform transform;
  double mean_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // No source point had a target neighbor within the correspondence
  // distance; `transform` is the initial guess.
  bool no_correspondences = false;
};

/// Point-to-point ICP starting from `initial`. Returns the iterate with the
/// lowest mean pairing residual, which is never worse than the initial one.
IcpResult icpRefine(const PointCloud& source, const PointCloud& target,
                    const RigidTransform& initial, const IcpParams& params);

}  // namespace planereg
