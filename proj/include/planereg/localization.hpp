#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "planereg/config.hpp"
#include "planereg/geometry.hpp"
#include "planereg/registration.hpp"

namespace planereg {

/// Prior map built from vision data (already scaled to meters).
struct GlobalMap {
  PointCloud cloud;

  // Throws InputError unless the cloud is tagged as vision data.
  explicit GlobalMap(PointCloud vision_cloud);
};

enum class TrackingMode {
  kGlobal,    // poses are corrected against the global map
  kRelative,  // map alignment failed; metascan optimization anchored at master
};

struct ScanRecord {
  PointCloud cloud;                     // body frame
  std::vector<PlanarSegment> segments;  // body frame
  Pose pose;                            // map-from-body
  // Registered motion from this scan into the previous one.
  RigidTransform relative;
  int translation_rank = 3;
  bool low_confidence = false;
  bool globally_optimized = false;
  bool isolated = false;
};

struct TrackerState {
  std::vector<ScanRecord> history;
  Pose current_pose;
  TrackingMode mode = TrackingMode::kGlobal;
  // Set iff mode == kRelative.
  std::optional<std::size_t> master_index;
};

struct TrackerOptions {
  Config config;
  // Run the metascan optimization when global alignment is impossible.
  bool relative_optimization = true;
};

/// Seeds the tracker with its first scan. Without `initial_pose` the pose is
/// found by initialPoseSearch (requires a map). With a map the pose is then
/// refined by globalOptimize. Throws InitializationError if no pose can be
/// determined.
TrackerState initialize(const PointCloud& first_scan, double timestamp,
                        const std::optional<RigidTransform>& initial_pose,
                        const GlobalMap* map, const TrackerOptions& options);

/// One tracking update: segment the scan, register it against the previous
/// scan (odometry fills unobserved translation directions), accumulate the
/// relative motion, then try global optimization against the map. When that
/// is impossible the tracker switches to relative mode and runs the
/// metascan optimization. A failed registration without odometry keeps the
/// previous pose and marks the scan low-confidence.
void trackStep(TrackerState& state, const PointCloud& scan, double timestamp,
               const std::optional<Vec3>& odometry, const GlobalMap* map,
               const TrackerOptions& options);

/// Map points inside the scan's bounding box (placed in the map by `pose`)
/// grown by `tolerance` on every side. Throws ParameterError if tolerance < 0.
PointCloud extractSection(const GlobalMap& map, const RigidTransform& pose,
                          const Box3& scan_extent, double tolerance);

/// Corrects `pose` by registering the scan segments against the segmented
/// map section around it. Returns nullopt if the section is empty, nothing
/// matches, or the correction exceeds the configured bounds.
std::optional<RigidTransform> globalOptimize(
    const RigidTransform& pose, const PointCloud& scan,
    std::span<const PlanarSegment> scan_segments, const GlobalMap& map,
    const Config& config);

struct MetascanReport {
  std::size_t iterations = 0;
  std::size_t registrations = 0;
  bool terminated = true;  // worklist emptied within the iteration bound
  std::vector<std::size_t> updated;
  std::vector<std::size_t> isolated;
};

/// Simultaneous matching over the scans of the relative phase.
///
/// Worklist seeded with `new_index`. A popped scan that is neither the
/// master nor older than it is registered against the merge of its
/// neighbors (scans sharing at least `min_overlapping_surfaces` overlapping
/// planes under the current poses); if its pose moves by more than the
/// configured minimum, its neighbors are queued again. The master and all
/// earlier scans are never modified. Throws InputError outside relative mode.
MetascanReport metascanOptimize(TrackerState& state, std::size_t new_index,
                                const Config& config);

// Indices of the scans sharing at least `min_overlapping_surfaces`
// overlapping planes with scan `index` under the current poses.
std::vector<std::size_t> findNeighbors(const TrackerState& state,
                                       std::size_t index, const Config& config);

/// Sum over scan pairs and matched planes (world frame) of the squared
/// centroid-to-plane distances, a measure of map consistency.
double planeConsistencyResidual(const TrackerState& state,
                                const MatchParams& params);

// |matched| / max(|planes_a|, |planes_b|), 0 when both are empty.
double inlierRatio(std::size_t matches, std::size_t planes_a,
                   std::size_t planes_b);

enum class SearchOutcome { kFound, kAmbiguous, kNotFound };

struct CellScore {
  Box3 cell;
  std::size_t cell_planes = 0;
  std::size_t matches = 0;
  double ratio = 0.0;
  RigidTransform pose;
  bool registered = false;
};

struct InitialPoseResult {
  SearchOutcome outcome = SearchOutcome::kNotFound;
  RigidTransform pose;
  double best_ratio = 0.0;
  double runner_up_ratio = 0.0;
  std::size_t scan_planes = 0;
  std::vector<CellScore> cells;
};

/// Structural initial pose search.
///
/// The map is tiled (x/y, 50 % overlap) into cells the size of the scan's
/// footprint plus `cell_tolerance`. Each cell is segmented and registered
/// with the scan, scored by inlierRatio. The best cell is accepted if
/// r1 > alpha and r1 > beta * r2, where r2 is the best ratio among cells
/// whose pose differs from the winner's by more than `same_pose_distance`.
/// Assumes the scan heading is roughly aligned with the map. Throws
/// InputError if the scan yields no plane.
InitialPoseResult initialPoseSearch(const GlobalMap& map, const PointCloud& scan,
                                    const Config& config);

Trajectory trajectoryOf(const TrackerState& state);

/// Map points plus all scans moved into the map frame. Laser points take the
/// color of their nearest map point; `provenance` (if given) receives one
/// tag per output point.
PointCloud fuseClouds(const TrackerState& state, const GlobalMap& map,
                      std::vector<SourceTag>* provenance = nullptr);

}  // namespace planereg
