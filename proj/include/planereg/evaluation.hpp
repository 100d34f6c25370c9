#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "planereg/geometry.hpp"

namespace planereg {

struct ErrorStats {
  double rmse = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> per_pose;
  // Set by computeAte when the estimated positions are collinear (or
  // coincident) and the alignment rotation is not unique.
  bool degenerate = false;
};

ErrorStats makeErrorStats(std::vector<double> errors);

inline constexpr double kAssociationWindow = 0.02;  // seconds

// Pairs (est index, ref index) by nearest timestamp within `max_dt`; both
// sides are used at most once and pairs stay in time order.
std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& est, const Trajectory& ref,
    double max_dt = kAssociationWindow);

/// Relative pose error over `delta` pose steps (translation part):
///   e_i = | trans( (ref_i^-1 ref_{i+delta})^-1 (est_i^-1 est_{i+delta}) ) |
/// Throws ParameterError if delta == 0, InputError with fewer than delta+1
/// associated pairs.
ErrorStats computeRpe(const Trajectory& est, const Trajectory& ref,
                      std::size_t delta = 1);

/// Absolute trajectory error after closed-form rigid alignment of the
/// estimated positions onto the reference positions. Throws InputError with
/// fewer than 3 associated pairs.
ErrorStats computeAte(const Trajectory& est, const Trajectory& ref);

// Rigid transform minimising sum |dst_i - (R src_i + t)|^2. When src is
// collinear the smallest rotation aligning the principal directions is used
// and *degenerate (if given) is set.
RigidTransform alignPositions(std::span<const Point3> src,
                              std::span<const Point3> dst,
                              bool* degenerate = nullptr);

}  // namespace planereg
