#pragma once

#include <cstddef>
#include <numbers>

namespace planereg {

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// All validate() members throw ConfigError naming the offending key.

struct FilterParams {
  double voxel_leaf = 0.1;          // laser clouds [m]
  double vision_voxel_leaf = 0.05;  // vision clouds [m]
  std::size_t outlier_neighbors = 16;
  double outlier_stddev_mult = 3.0;

  void validate() const;
};

struct SegmentationParams {
  double neighbor_radius = 0.3;
  double distance_threshold = 0.05;
  double angle_threshold = deg2rad(10.0);
  std::size_t min_inliers = 100;
  double min_area = 0.5;
  // Neighborhood size of the PCA normal / curvature estimate.
  std::size_t normal_neighbors = 16;
  // The growing plane is refit after this many additions.
  std::size_t refit_interval = 50;

  void validate() const;
};

struct MatchParams {
  double angle_tol = deg2rad(10.0);
  double distance_tol = 1.0;
  double area_ratio_tol = 0.2;
  double overlap_epsilon = 0.5;
  // Singular values below rank_tol * sigma_max count as zero.
  double rank_tol = 1e-3;

  void validate() const;
};

struct IcpParams {
  std::size_t max_iterations = 50;
  double max_correspondence_distance = 0.5;

  void validate() const;
};

struct CellSearchParams {
  double cell_tolerance = 5.0;
  double alpha = 0.3;
  double beta = 1.5;
  // Cells whose registrations land within this distance of the winner are
  // the same hypothesis seen through overlapping tiles.
  double same_pose_distance = 1.0;

  void validate() const;
};

struct MetascanParams {
  std::size_t min_overlapping_surfaces = 3;
  double min_pose_change_angle = deg2rad(0.5);
  double min_pose_change_translation = 0.05;

  void validate() const;
};

struct LocalizationParams {
  // Growth of the map section around the scan's bounding box [m].
  double section_tolerance = 3.0;
  // Global corrections beyond these bounds are treated as false matches.
  double max_correction_angle = deg2rad(30.0);
  double max_correction_fraction = 0.5;

  void validate() const;
};

}  // namespace planereg
