#include "planereg/localization.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "planereg/errors.hpp"
#include "planereg/kdtree.hpp"
#include "planereg/preprocessing.hpp"
#include "planereg/segmentation.hpp"

namespace planereg {
namespace {

RigidTransform plain(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation;
  out.translation = t.translation;
  return out;
}

Box3 transformedBox(const RigidTransform& pose, const Box3& box) {
  Box3 out;
  for (int corner = 0; corner < 8; ++corner) {
    const Point3 p((corner & 1) ? box.max.x() : box.min.x(),
                   (corner & 2) ? box.max.y() : box.min.y(),
                   (corner & 4) ? box.max.z() : box.min.z());
    out.extend(pose(p));
  }
  return out;
}

std::vector<PlanarSegment> toWorld(const ScanRecord& rec) {
  std::vector<PlanarSegment> out;
  out.reserve(rec.segments.size());
  for (const auto& s : rec.segments) out.push_back(transformPlane(rec.pose.transform, s));
  return out;
}

bool similarPlanes(const PlanarSegment& a, const PlanarSegment& b,
                   const MatchParams& params) {
  if (a.normal.dot(b.normal) < std::cos(params.angle_tol)) return false;
  return std::abs(a.distance - b.distance) <= params.distance_tol;
}

std::size_t countOverlapping(std::span<const PlanarSegment> a,
                             std::span<const PlanarSegment> b,
                             const MatchParams& params) {
  std::size_t count = 0;
  for (const auto& sa : a) {
    for (const auto& sb : b) {
      if (similarPlanes(sa, sb, params) &&
          checkOverlap(sa, sb, RigidTransform::identity(), params.overlap_epsilon)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

// Pairs of Omega that coincide under `t`: parallel, offsets within
// `offset_tol`, and overlapping by a real length on both in-plane axes, not
// merely within a gap tolerance. Used to score cells, where the matching
// itself runs with a relaxed distance tolerance.
std::size_t coincidentPairs(std::span<const PlanarSegment> source,
                            std::span<const PlanarSegment> target,
                            const CorrespondenceSet& pairs,
                            const RigidTransform& t, const MatchParams& params,
                            double offset_tol) {
  MatchParams strict = params;
  strict.distance_tol = offset_tol;
  std::size_t count = 0;
  for (const auto& c : pairs.pairs) {
    const PlanarSegment moved = transformPlane(t, source[c.source]);
    const PlanarSegment& fixed = target[c.target];
    if (!similarPlanes(moved, fixed, strict)) continue;
    int skip = 0;
    fixed.normal.cwiseAbs().maxCoeff(&skip);
    bool overlapping = true;
    for (int axis = 0; axis < 3 && overlapping; ++axis) {
      if (axis == skip) continue;
      const double lo = std::max(moved.extent_min(axis), fixed.extent_min(axis));
      const double hi = std::min(moved.extent_max(axis), fixed.extent_max(axis));
      const double shorter =
          std::min(moved.extent_max(axis) - moved.extent_min(axis),
                   fixed.extent_max(axis) - fixed.extent_min(axis));
      overlapping = hi - lo >= std::min(params.overlap_epsilon, 0.5 * shorter);
    }
    if (overlapping) ++count;
  }
  return count;
}

// Cell start coordinates covering [lo, hi] with cells of `size` at half-cell
// stride, centered on the interval.
std::vector<double> tileStarts(double lo, double hi, double size) {
  const double extent = hi - lo;
  const double stride = 0.5 * size;
  std::size_t n = 1;
  if (extent > size) {
    n = static_cast<std::size_t>(std::ceil((extent - size) / stride - 1e-9)) + 1;
  }
  const double span = size + static_cast<double>(n - 1) * stride;
  const double start = lo - 0.5 * (span - extent);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = start + static_cast<double>(k) * stride;
  return out;
}

}  // namespace

GlobalMap::GlobalMap(PointCloud vision_cloud) : cloud(std::move(vision_cloud)) {
  if (cloud.source != SourceTag::kVision) {
    throw InputError("the global map must be a vision-derived cloud");
  }
  cloud.validate();
}

PointCloud extractSection(const GlobalMap& map, const RigidTransform& pose,
                          const Box3& scan_extent, double tolerance) {
  if (!(tolerance >= 0.0)) throw ParameterError("section tolerance must be >= 0");
  PointCloud out;
  out.source = SourceTag::kVision;
  out.viewpoint = pose.translation;
  if (scan_extent.empty()) return out;
  const Box3 window = transformedBox(pose, scan_extent).grown(tolerance);
  const auto& src = map.cloud;
  if (src.colors) out.colors.emplace();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!window.contains(src.points[i])) continue;
    out.points.push_back(src.points[i]);
    if (src.colors) out.colors->push_back((*src.colors)[i]);
  }
  return out;
}

std::optional<RigidTransform> globalOptimize(
    const RigidTransform& pose, const PointCloud& scan,
    std::span<const PlanarSegment> scan_segments, const GlobalMap& map,
    const Config& config) {
  if (scan.empty() || scan_segments.empty()) return std::nullopt;
  PointCloud section = extractSection(map, pose, boundingBox(scan.points),
                                      config.localization.section_tolerance);
  if (section.size() < config.segmentation.min_inliers) return std::nullopt;
  section.viewpoint = pose(scan.viewpoint);
  const auto map_segments = segmentPlanes(section, config.segmentation);
  if (map_segments.empty()) return std::nullopt;

  std::vector<PlanarSegment> placed;
  placed.reserve(scan_segments.size());
  for (const auto& s : scan_segments) placed.push_back(transformPlane(pose, s));

  // Zero odometry: directions the planes leave open keep the current estimate.
  const RegistrationResult reg =
      registerSegments(placed, map_segments, config.match,
                       RigidTransform::identity(), Vec3::Zero());
  if (!reg.success) return std::nullopt;

  const double section_size = boundingBox(section.points).size().maxCoeff();
  const RigidTransform& correction = reg.transform;
  if (correction.angle() > config.localization.max_correction_angle ||
      correction.translation.norm() >
          config.localization.max_correction_fraction * section_size) {
    return std::nullopt;
  }
  return compose(correction, pose);
}

std::vector<std::size_t> findNeighbors(const TrackerState& state,
                                       std::size_t index, const Config& config) {
  const auto mine = toWorld(state.history.at(index));
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < state.history.size(); ++j) {
    if (j == index) continue;
    const auto theirs = toWorld(state.history[j]);
    if (countOverlapping(mine, theirs, config.match) >=
        config.metascan.min_overlapping_surfaces) {
      out.push_back(j);
    }
  }
  return out;
}

MetascanReport metascanOptimize(TrackerState& state, std::size_t new_index,
                                const Config& config) {
  if (state.mode != TrackingMode::kRelative || !state.master_index) {
    throw InputError("metascan optimization requires relative mode with a master");
  }
  if (new_index >= state.history.size()) {
    throw InputError("metascan start index out of range");
  }
  const std::size_t master = *state.master_index;
  const std::size_t bound = 10 * state.history.size();

  MetascanReport report;
  std::deque<std::size_t> worklist{new_index};
  std::vector<char> queued(state.history.size(), 0);
  queued[new_index] = 1;

  while (!worklist.empty()) {
    if (report.iterations >= bound) {
      report.terminated = false;
      break;
    }
    const std::size_t current = worklist.front();
    worklist.pop_front();
    queued[current] = 0;
    ++report.iterations;
    // The master fixes the frame; scans before it were anchored globally.
    if (current <= master) continue;

    ScanRecord& rec = state.history[current];
    const auto neighbors = findNeighbors(state, current, config);
    if (neighbors.empty()) {
      rec.isolated = true;
      report.isolated.push_back(current);
      continue;
    }
    rec.isolated = false;

    PointCloud merged;
    merged.source = SourceTag::kLaser;
    for (auto j : neighbors) {
      const auto moved = applyTransform(state.history[j].pose.transform,
                                        state.history[j].cloud);
      merged.points.insert(merged.points.end(), moved.points.begin(),
                           moved.points.end());
    }
    merged = voxelFilter(merged, config.filter.voxel_leaf);
    merged.viewpoint = rec.pose.transform(rec.cloud.viewpoint);
    const auto targets = segmentPlanes(merged, config.segmentation);

    const RigidTransform before = rec.pose.transform;
    const RegistrationResult reg =
        registerSegments(rec.segments, targets, config.match, before,
                         before.translation);
    ++report.registrations;
    if (!reg.success) continue;

    rec.pose.transform = plain(reg.transform);
    report.updated.push_back(current);
    const RigidTransform change = compose(invert(before), rec.pose.transform);
    if (change.angle() > config.metascan.min_pose_change_angle ||
        change.translation.norm() > config.metascan.min_pose_change_translation) {
      for (auto j : neighbors) {
        if (j > master && !queued[j]) {
          worklist.push_back(j);
          queued[j] = 1;
        }
      }
    }
  }
  if (!state.history.empty()) state.current_pose = state.history.back().pose;
  return report;
}

double planeConsistencyResidual(const TrackerState& state,
                                const MatchParams& params) {
  std::vector<std::vector<PlanarSegment>> world;
  world.reserve(state.history.size());
  for (const auto& rec : state.history) world.push_back(toWorld(rec));

  double total = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    for (std::size_t j = 0; j < world.size(); ++j) {
      if (i == j) continue;
      for (const auto& a : world[i]) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : world[j]) {
          if (!similarPlanes(a, b, params) ||
              !checkOverlap(a, b, RigidTransform::identity(), params.overlap_epsilon)) {
            continue;
          }
          best = std::min(best, std::abs(b.signedDistance(a.centroid)));
        }
        if (std::isfinite(best)) total += best * best;
      }
    }
  }
  return total;
}

TrackerState initialize(const PointCloud& first_scan, double timestamp,
                        const std::optional<RigidTransform>& initial_pose,
                        const GlobalMap* map, const TrackerOptions& options) {
  const Config& config = options.config;
  config.validate();
  if (first_scan.empty()) throw InputError("first scan is empty");

  ScanRecord rec;
  rec.cloud = first_scan;
  rec.segments = segmentPlanes(first_scan, config.segmentation);

  RigidTransform pose;
  if (initial_pose) {
    pose = plain(*initial_pose);
  } else {
    if (!map) throw InitializationError("no initial pose and no map to search");
    const InitialPoseResult found = initialPoseSearch(*map, first_scan, config);
    if (found.outcome == SearchOutcome::kAmbiguous) {
      throw InitializationError("initial pose is ambiguous; collect more scans");
    }
    if (found.outcome == SearchOutcome::kNotFound) {
      throw InitializationError("initial pose not found in the map");
    }
    pose = plain(found.pose);
  }

  TrackerState state;
  bool anchored = false;
  if (map) {
    if (auto corrected = globalOptimize(pose, first_scan, rec.segments, *map, config)) {
      pose = *corrected;
      anchored = true;
    }
  }
  rec.globally_optimized = anchored;
  rec.pose = {timestamp, pose};
  state.history.push_back(std::move(rec));
  state.current_pose = state.history.back().pose;
  if (!anchored) {
    state.mode = TrackingMode::kRelative;
    state.master_index = 0;
  }
  return state;
}

void trackStep(TrackerState& state, const PointCloud& scan, double timestamp,
               const std::optional<Vec3>& odometry, const GlobalMap* map,
               const TrackerOptions& options) {
  if (state.history.empty()) throw InputError("tracker is not initialized");
  if (scan.empty()) throw InputError("scan is empty");
  if (!(timestamp > state.history.back().pose.timestamp)) {
    throw InputError("scan timestamps must be strictly increasing");
  }
  const Config& config = options.config;
  const ScanRecord& previous = state.history.back();

  ScanRecord rec;
  rec.cloud = scan;
  rec.segments = segmentPlanes(scan, config.segmentation);

  const RigidTransform hint =
      odometry ? RigidTransform::fromTranslation(*odometry) : RigidTransform::identity();
  const RegistrationResult reg =
      registerSegments(rec.segments, previous.segments, config.match, hint, odometry);
  if (reg.success) {
    rec.relative = reg.transform;
    rec.translation_rank = reg.transform.translation_rank;
    rec.low_confidence = rec.translation_rank < 3 && !odometry;
  } else {
    rec.relative = hint;
    rec.translation_rank = 0;
    rec.low_confidence = true;
  }
  const RigidTransform estimate = compose(state.current_pose.transform, rec.relative);
  rec.pose = {timestamp, estimate};

  std::optional<RigidTransform> corrected;
  if (map) corrected = globalOptimize(estimate, scan, rec.segments, *map, config);

  if (corrected) {
    if (state.mode == TrackingMode::kRelative && state.master_index) {
      // Re-anchor the relative phase with the new global correction.
      const RigidTransform correction = compose(*corrected, invert(estimate));
      for (std::size_t i = *state.master_index; i < state.history.size(); ++i) {
        auto& p = state.history[i].pose.transform;
        p = compose(correction, p);
      }
    }
    state.mode = TrackingMode::kGlobal;
    state.master_index.reset();
    rec.pose.transform = *corrected;
    rec.globally_optimized = true;
    state.history.push_back(std::move(rec));
  } else {
    state.history.push_back(std::move(rec));
    if (state.mode == TrackingMode::kGlobal) {
      state.mode = TrackingMode::kRelative;
      state.master_index = state.history.size() - 1;
    }
    if (options.relative_optimization) {
      metascanOptimize(state, state.history.size() - 1, config);
    }
  }
  state.current_pose = state.history.back().pose;
}

double inlierRatio(std::size_t matches, std::size_t planes_a,
                   std::size_t planes_b) {
  const std::size_t larger = std::max(planes_a, planes_b);
  if (larger == 0) return 0.0;
  return static_cast<double>(std::min(matches, larger)) /
         static_cast<double>(larger);
}

InitialPoseResult initialPoseSearch(const GlobalMap& map, const PointCloud& scan,
                                    const Config& config) {
  config.validate();
  if (scan.empty()) throw InputError("scan is empty");
  const auto scan_segments = segmentPlanes(scan, config.segmentation);
  if (scan_segments.empty()) throw InputError("scan contains no planar segment");

  InitialPoseResult result;
  result.scan_planes = scan_segments.size();
  if (map.cloud.empty()) return result;

  const Box3 scan_box = boundingBox(scan.points);
  const Box3 map_box = boundingBox(map.cloud.points);
  const double tol = config.cell_search.cell_tolerance;
  const double size_x = scan_box.size().x() + tol;
  const double size_y = scan_box.size().y() + tol;
  const double sensor_height = scan.viewpoint.z() - scan_box.min.z();

  // A converged pose puts true pairs within the segments' inlier band.
  const double offset_tol = 2.0 * config.segmentation.distance_threshold;
  MatchParams relaxed = config.match;
  relaxed.distance_tol =
      std::max(relaxed.distance_tol, 0.5 * std::hypot(size_x, size_y));

  for (double x0 : tileStarts(map_box.min.x(), map_box.max.x(), size_x)) {
    for (double y0 : tileStarts(map_box.min.y(), map_box.max.y(), size_y)) {
      CellScore score;
      score.cell.min = Point3(x0, y0, map_box.min.z());
      score.cell.max = Point3(x0 + size_x, y0 + size_y, map_box.max.z());

      PointCloud section;
      section.source = SourceTag::kVision;
      for (const auto& p : map.cloud.points) {
        if (p.x() >= score.cell.min.x() && p.x() <= score.cell.max.x() &&
            p.y() >= score.cell.min.y() && p.y() <= score.cell.max.y()) {
          section.points.push_back(p);
        }
      }
      if (section.size() >= config.segmentation.min_inliers) {
        const Point3 center = score.cell.center();
        section.viewpoint = Point3(center.x(), center.y(),
                                   map_box.min.z() + sensor_height);
        const auto cell_segments = segmentPlanes(section, config.segmentation);
        score.cell_planes = cell_segments.size();
        if (!cell_segments.empty()) {
          const Vec3 shift = section.viewpoint - scan.viewpoint;
          const RegistrationResult reg = registerSegments(
              scan_segments, cell_segments, relaxed,
              RigidTransform::fromTranslation(shift), shift);
          score.pose = plain(reg.transform);
          if (reg.success) {
            score.matches = coincidentPairs(scan_segments, cell_segments,
                                            reg.correspondences, score.pose,
                                            config.match, offset_tol);
          }
          score.registered = score.matches > 0;
          score.ratio =
              inlierRatio(score.matches, scan_segments.size(), cell_segments.size());
        }
      }
      result.cells.push_back(std::move(score));
    }
  }

  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    if (!result.cells[i].registered) continue;
    if (!winner || result.cells[i].ratio > result.cells[*winner].ratio) winner = i;
  }
  if (!winner) return result;

  const CellScore& best = result.cells[*winner];
  double runner_up = 0.0;
  for (const auto& c : result.cells) {
    if (!c.registered) continue;
    const bool same_pose =
        (c.pose.translation - best.pose.translation).norm() <=
            config.cell_search.same_pose_distance &&
        rotationDistance(c.pose.rotation, best.pose.rotation) <= config.match.angle_tol;
    if (!same_pose) runner_up = std::max(runner_up, c.ratio);
  }
  result.best_ratio = best.ratio;
  result.runner_up_ratio = runner_up;
  result.pose = best.pose;
  const bool unique = best.ratio > config.cell_search.alpha &&
                      best.ratio > config.cell_search.beta * runner_up;
  result.outcome = unique ? SearchOutcome::kFound : SearchOutcome::kAmbiguous;
  return result;
}

Trajectory trajectoryOf(const TrackerState& state) {
  Trajectory out;
  for (const auto& rec : state.history) out.append(rec.pose);
  return out;
}

PointCloud fuseClouds(const TrackerState& state, const GlobalMap& map,
                      std::vector<SourceTag>* provenance) {
  constexpr Rgb kUncolored{128, 128, 128};
  PointCloud out;
  out.source = SourceTag::kVision;
  out.colors.emplace();
  if (provenance) provenance->clear();
  for (std::size_t i = 0; i < map.cloud.size(); ++i) {
    out.points.push_back(map.cloud.points[i]);
    out.colors->push_back(map.cloud.colors ? (*map.cloud.colors)[i] : kUncolored);
    if (provenance) provenance->push_back(SourceTag::kVision);
  }
  std::optional<KdTree> tree;
  if (!map.cloud.empty()) tree.emplace(map.cloud.points);
  for (const auto& rec : state.history) {
    for (const auto& p : rec.cloud.points) {
      const Point3 q = rec.pose.transform(p);
      Rgb color = kUncolored;
      if (tree && map.cloud.colors) {
        const auto nn = tree->knn(q, 1);
        if (!nn.empty()) color = (*map.cloud.colors)[nn.front().index];
      }
      out.points.push_back(q);
      out.colors->push_back(color);
      if (provenance) provenance->push_back(SourceTag::kLaser);
    }
  }
  return out;
}

}  // namespace planereg
