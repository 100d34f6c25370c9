#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "planereg/geometry.hpp"
#include "planereg/params.hpp"

namespace planereg {

/// Region-growing plane extraction on an unorganized cloud.
///
/// Seeds are taken in order of increasing local curvature (PCA over the
/// `normal_neighbors` nearest points). A region grows through neighbors
/// within `neighbor_radius` whose local normal deviates from the region
/// plane by at most `angle_threshold` and whose residual is within
/// `distance_threshold`; the plane is refit every `refit_interval`
/// additions. Accepted segments are least-squares fits of their inliers,
/// every inlier lies within `distance_threshold` of the final plane, and
/// normals point towards the cloud's viewpoint.
///
/// Deterministic for a given cloud and parameter set. Throws InputError on
/// an empty cloud.
std::vector<PlanarSegment> segmentPlanes(const PointCloud& cloud,
                                         const SegmentationParams& params);

// Area of the 2D convex hull of the inliers projected onto the segment
// plane. Zero for fewer than 3 inliers or collinear inliers.
double segmentArea(const PlanarSegment& segment, const PointCloud& cloud);

// Same, on explicit points (projected onto the plane with the given normal).
double planarHullArea(std::span<const Point3> points, const Vec3& normal);

// Counter-clockwise convex hull (Andrew's monotone chain), collinear points
// dropped.
std::vector<Eigen::Vector2d> convexHull(std::vector<Eigen::Vector2d> points);

// Shoelace area of a simple polygon.
double polygonArea(std::span<const Eigen::Vector2d> polygon);

// Builds a segment (fit, orientation, extent, area) from inlier indices.
PlanarSegment makeSegment(const PointCloud& cloud,
                          std::vector<std::size_t> inliers);

}  // namespace planereg
