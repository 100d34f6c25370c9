#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "planereg/geometry.hpp"

namespace planereg {

/// Axis-aligned rectangle: the plane `coordinate[normal_axis] == offset`,
/// bounded by [lo, hi] on the two remaining axes (in increasing axis order).
struct SceneRect {
  int normal_axis = 2;
  double offset = 0.0;
  Eigen::Vector2d lo = Eigen::Vector2d::Zero();
  Eigen::Vector2d hi = Eigen::Vector2d::Ones();
  double density = 100.0;  // points per square meter

  double area() const { return (hi - lo).prod(); }
};

/// Axis-aligned box; all six faces are sampled.
struct SceneBox {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Ones();
  double density = 100.0;

  std::vector<SceneRect> faces() const;
};

enum class SensorModel {
  // Line of sight only, density falling off with distance, noise along the
  // ray.
  kLaserLike,
  // Per-surface texture-dependent density, noise proportional to depth. No
  // occlusion: stands for a reconstruction fused from many views.
  kVisionLike,
};

struct SceneSpec {
  std::vector<SceneBox> boxes;
  std::vector<SceneRect> rects;
  double noise_sigma = 0.0;  // meters (vision-like: at the mean depth)
  SensorModel sensor = SensorModel::kLaserLike;

  // Throws ConfigError on a non-positive density, negative sigma or an
  // empty rectangle.
  void validate() const;
  std::vector<SceneRect> surfaces() const;
};

struct SensorSetup {
  RigidTransform pose;  // world-from-sensor
  double max_range = std::numeric_limits<double>::infinity();
  // Laser-like: full density up to this range, (ref/r)^2 beyond.
  double dropout_reference = 4.0;
};

/// Samples the scene as seen from `sensor`. Points are expressed in the
/// sensor frame, the cloud viewpoint is the sensor origin. Deterministic for
/// a given seed.
PointCloud sampleScene(const SceneSpec& spec, const SensorSetup& sensor,
                       std::uint64_t seed);

/// Vision-like reconstruction of the whole scene in the world frame, sampled
/// from the center of the scene's bounding box (the scene's sensor model is
/// overridden).
PointCloud sampleVisionMap(SceneSpec spec, std::uint64_t seed);

// Bounding box of all scene surfaces.
Box3 sceneBounds(const SceneSpec& spec);

// Built-in scenes used by the CLI generator and the tests.
SceneSpec roomScene(double density = 100.0);      // closed 8 x 6 x 3 m room
SceneSpec twoRoomScene(double density = 100.0);   // 20 x 8 m, partition + door
SceneSpec corridorScene(double density = 100.0);  // walls along x, no ends
SceneSpec planeScene(double density = 100.0);     // single 4 x 4 m floor patch
// 40 x 40 m ground with one room (or two identical rooms) and clutter.
SceneSpec campusScene(bool twin_rooms, double density = 150.0);

// Scene by name: room, two-room, corridor, plane, campus, twin-campus.
// Throws ConfigError for an unknown name.
SceneSpec sceneByName(const std::string& name, double density);

/// Reads a scene description: lines `box minx miny minz maxx maxy maxz
/// density` and `rect axis offset lo1 lo2 hi1 hi2 density`, plus optional
/// `noise <sigma>` and `sensor laser|vision`.
SceneSpec readSceneSpec(std::istream& in);

}  // namespace planereg
