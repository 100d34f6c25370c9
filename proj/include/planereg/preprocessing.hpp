#pragma once

#include <cstddef>

#include "planereg/geometry.hpp"
#include "planereg/params.hpp"

namespace planereg {

/// Replaces the points of every occupied voxel by their centroid (colors are
/// averaged). Output order follows the first occurrence of each voxel.
/// Throws ParameterError if leaf <= 0.
PointCloud voxelFilter(const PointCloud& cloud, double leaf);

/// Statistical outlier removal: drops points whose mean distance to their k
/// nearest neighbors exceeds mean + mult * stddev of that statistic over the
/// whole cloud. Throws ParameterError unless the cloud has more than k
/// points, k >= 1 and mult > 0.
PointCloud outlierFilter(const PointCloud& cloud, std::size_t k, double mult);

/// Voxel downsampling followed by outlier removal, with the leaf chosen by
/// the cloud's source tag. Clouds too small for outlier removal skip it.
PointCloud preprocess(const PointCloud& cloud, const FilterParams& params);

/// Monocular scale from a metric GPS track.
///
/// Each vision pose is assigned the nearest GPS position (by timestamp when
/// the two tracks overlap in time, otherwise by index-proportional
/// resampling). The scale is the mean step length along the assigned GPS
/// positions divided by the mean vision step length. Throws InputError for
/// tracks shorter than 2 poses and ScaleError if the vision track does not
/// move.
double estimateScale(const Trajectory& vision, const Trajectory& gps);

/// Multiplies every coordinate (and the viewpoint) by s. Throws
/// ParameterError if s <= 0.
PointCloud scaleCloud(const PointCloud& cloud, double s);

// Scales the positions of a trajectory; rotations and timestamps are kept.
Trajectory scaleTrajectory(const Trajectory& trajectory, double s);

}  // namespace planereg
