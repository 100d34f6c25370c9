#include "planereg/params.hpp"

#include <cmath>
#include <string>

#include "planereg/errors.hpp"

namespace planereg {
namespace {

void requirePositive(const char* key, double value) {
  if (!(std::isfinite(value) && value > 0.0)) {
    throw ConfigError(key, "must be positive, got " + std::to_string(value));
  }
}

void requireAtLeast(const char* key, std::size_t value, std::size_t min) {
  if (value < min) {
    throw ConfigError(key, "must be >= " + std::to_string(min));
  }
}

}  // namespace

void FilterParams::validate() const {
  requirePositive("voxel_leaf", voxel_leaf);
  requirePositive("vision_voxel_leaf", vision_voxel_leaf);
  requireAtLeast("outlier_neighbors", outlier_neighbors, 1);
  requirePositive("outlier_stddev_mult", outlier_stddev_mult);
}

void SegmentationParams::validate() const {
  requirePositive("neighbor_radius", neighbor_radius);
  requirePositive("distance_threshold", distance_threshold);
  requirePositive("angle_threshold", angle_threshold);
  requireAtLeast("min_inliers", min_inliers, 3);
  requirePositive("min_area", min_area);
  requireAtLeast("normal_neighbors", normal_neighbors, 3);
  requireAtLeast("refit_interval", refit_interval, 1);
}

void MatchParams::validate() const {
  requirePositive("angle_tol", angle_tol);
  requirePositive("distance_tol", distance_tol);
  requirePositive("area_ratio_tol", area_ratio_tol);
  if (area_ratio_tol > 1.0) {
    throw ConfigError("area_ratio_tol", "must lie in (0, 1]");
  }
  requirePositive("overlap_epsilon", overlap_epsilon);
  requirePositive("rank_tol", rank_tol);
}

void IcpParams::validate() const {
  requireAtLeast("icp_max_iterations", max_iterations, 1);
  requirePositive("icp_max_correspondence_distance",
                  max_correspondence_distance);
}

void CellSearchParams::validate() const {
  requirePositive("cell_tolerance", cell_tolerance);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha", "must lie in (0, 1)");
  }
  if (!(beta > 1.0 && std::isfinite(beta))) {
    throw ConfigError("beta", "must be > 1");
  }
  requirePositive("same_pose_distance", same_pose_distance);
}

void MetascanParams::validate() const {
  requireAtLeast("min_overlapping_surfaces", min_overlapping_surfaces, 1);
  requirePositive("min_pose_change_angle", min_pose_change_angle);
  requirePositive("min_pose_change_translation", min_pose_change_translation);
}

void LocalizationParams::validate() const {
  if (!(std::isfinite(section_tolerance) && section_tolerance >= 0.0)) {
    throw ConfigError("section_tolerance", "must be >= 0");
  }
  requirePositive("max_correction_angle", max_correction_angle);
  requirePositive("max_correction_fraction", max_correction_fraction);
}

}  // namespace planereg
