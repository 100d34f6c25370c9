#include "planereg/synth.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <random>
#include <sstream>

#include "planereg/errors.hpp"

namespace planereg {
namespace {

// Other two axes of a rectangle, in increasing order.
std::pair<int, int> inPlaneAxes(int normal_axis) {
  switch (normal_axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

Point3 rectPoint(const SceneRect& r, double u, double v) {
  const auto [a, b] = inPlaneAxes(r.normal_axis);
  Point3 p;
  p(r.normal_axis) = r.offset;
  p(a) = u;
  p(b) = v;
  return p;
}

// True if the segment origin -> p crosses a surface strictly before p.
bool occluded(const Point3& origin, const Point3& p,
              const std::vector<SceneRect>& surfaces, std::size_t own) {
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (i == own) continue;
    const SceneRect& r = surfaces[i];
    const int axis = r.normal_axis;
    const double from = origin(axis) - r.offset;
    const double to = p(axis) - r.offset;
    if (from * to >= 0.0) continue;  // same side, or p lies in this plane
    const double s = from / (from - to);
    const Point3 hit = origin + s * (p - origin);
    const auto [a, b] = inPlaneAxes(axis);
    if (hit(a) >= r.lo(0) && hit(a) <= r.hi(0) && hit(b) >= r.lo(1) &&
        hit(b) <= r.hi(1)) {
      return true;
    }
  }
  return false;
}

SceneRect rect(int axis, double offset, double lo1, double lo2, double hi1,
               double hi2, double density) {
  return {axis, offset, {lo1, lo2}, {hi1, hi2}, density};
}

}  // namespace

std::vector<SceneRect> SceneBox::faces() const {
  std::vector<SceneRect> out;
  for (int axis = 0; axis < 3; ++axis) {
    const auto [a, b] = inPlaneAxes(axis);
    for (double offset : {min(axis), max(axis)}) {
      out.push_back(rect(axis, offset, min(a), min(b), max(a), max(b), density));
    }
  }
  return out;
}

void SceneSpec::validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise", "sigma must be >= 0");
  }
  for (const auto& r : surfaces()) {
    if (!(r.density > 0.0) || !std::isfinite(r.density)) {
      throw ConfigError("density", "must be positive");
    }
    if (r.normal_axis < 0 || r.normal_axis > 2) {
      throw ConfigError("rect", "normal axis must be 0, 1 or 2");
    }
    if (!((r.hi - r.lo).array() > 0.0).all()) {
      throw ConfigError("rect", "rectangle has no extent");
    }
  }
}

std::vector<SceneRect> SceneSpec::surfaces() const {
  std::vector<SceneRect> out = rects;
  for (const auto& b : boxes) {
    const auto f = b.faces();
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

PointCloud sampleScene(const SceneSpec& spec, const SensorSetup& sensor,
                       std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Point3 origin = sensor.pose.translation;
  const RigidTransform to_sensor = invert(sensor.pose);
  const bool laser = spec.sensor == SensorModel::kLaserLike;

  const auto surfaces = spec.surfaces();
  std::vector<Point3> world;
  for (std::size_t si = 0; si < surfaces.size(); ++si) {
    const SceneRect& surface = surfaces[si];
    const auto count =
        static_cast<std::size_t>(std::llround(surface.area() * surface.density));
    const double texture = 0.35 + 0.65 * unit(rng);
    const double phase_u = 2.0 * std::numbers::pi * unit(rng);
    const double phase_v = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t k = 0; k < count; ++k) {
      const double u = surface.lo(0) + (surface.hi(0) - surface.lo(0)) * unit(rng);
      const double v = surface.lo(1) + (surface.hi(1) - surface.lo(1)) * unit(rng);
      const double keep = unit(rng);
      const Point3 p = rectPoint(surface, u, v);
      const double range = (p - origin).norm();
      if (range > sensor.max_range) continue;
      double keep_prob = 1.0;
      if (laser) {
        if (range > sensor.dropout_reference) {
          keep_prob = std::pow(sensor.dropout_reference / range, 2.0);
        }
      } else {
        const double pattern = std::cos(2.0 * std::numbers::pi * u / 1.7 + phase_u) *
                               std::cos(2.0 * std::numbers::pi * v / 2.3 + phase_v);
        keep_prob = texture * (0.65 + 0.35 * pattern);
      }
      if (keep >= keep_prob) continue;
      if (laser && occluded(origin, p, surfaces, si)) continue;
      world.push_back(p);
    }
  }

  if (spec.noise_sigma > 0.0 && !world.empty()) {
    double mean_depth = 0.0;
    for (const auto& p : world) mean_depth += (p - origin).norm();
    mean_depth /= static_cast<double>(world.size());
    for (auto& p : world) {
      const Vec3 ray = p - origin;
      const double depth = ray.norm();
      if (depth <= 0.0) continue;
      const double n = gauss(rng);
      if (laser) {
        p += spec.noise_sigma * n * ray / depth;
      } else if (mean_depth > 0.0) {
        p = origin + ray * (1.0 + spec.noise_sigma / mean_depth * n);
      }
    }
  }

  PointCloud cloud;
  cloud.source = laser ? SourceTag::kLaser : SourceTag::kVision;
  cloud.points.reserve(world.size());
  for (const auto& p : world) cloud.points.push_back(to_sensor(p));
  cloud.viewpoint = Point3::Zero();
  return cloud;
}

Box3 sceneBounds(const SceneSpec& spec) {
  Box3 box;
  for (const auto& r : spec.surfaces()) {
    const int a = r.normal_axis == 0 ? 1 : 0;
    const int b = r.normal_axis == 2 ? 1 : 2;
    for (double u : {r.lo(0), r.hi(0)}) {
      for (double v : {r.lo(1), r.hi(1)}) {
        Point3 p;
        p(r.normal_axis) = r.offset;
        p(a) = u;
        p(b) = v;
        box.extend(p);
      }
    }
  }
  return box;
}

PointCloud sampleVisionMap(SceneSpec spec, std::uint64_t seed) {
  spec.sensor = SensorModel::kVisionLike;
  SensorSetup camera;
  camera.pose = RigidTransform::fromTranslation(sceneBounds(spec).center());
  return applyTransform(camera.pose, sampleScene(spec, camera, seed));
}

SceneSpec roomScene(double density) {
  SceneSpec s;
  s.boxes.push_back({{-4.0, -3.0, 0.0}, {4.0, 3.0, 3.0}, density});
  return s;
}

SceneSpec twoRoomScene(double density) {
  SceneSpec s;
  s.boxes.push_back({{0.0, 0.0, 0.0}, {20.0, 8.0, 3.0}, density});
  // Partition at x = 10 with a door between y = 3.5 and y = 5.
  s.rects.push_back(rect(0, 10.0, 0.0, 0.0, 3.5, 3.0, density));
  s.rects.push_back(rect(0, 10.0, 5.0, 0.0, 8.0, 3.0, density));
  s.rects.push_back(rect(0, 10.0, 3.5, 2.2, 5.0, 3.0, density));
  s.boxes.push_back({{3.0, 5.5, 0.0}, {4.0, 6.5, 3.0}, density});
  s.boxes.push_back({{14.0, 1.0, 0.0}, {16.5, 1.8, 1.2}, density});
  return s;
}

SceneSpec corridorScene(double density) {
  SceneSpec s;
  s.rects.push_back(rect(1, -1.5, -15.0, 0.0, 15.0, 3.0, density));
  s.rects.push_back(rect(1, 1.5, -15.0, 0.0, 15.0, 3.0, density));
  s.rects.push_back(rect(2, 0.0, -15.0, -1.5, 15.0, 1.5, density));
  s.rects.push_back(rect(2, 3.0, -15.0, -1.5, 15.0, 1.5, density));
  return s;
}

SceneSpec planeScene(double density) {
  SceneSpec s;
  s.rects.push_back(rect(2, 0.0, -2.0, -2.0, 2.0, 2.0, density));
  return s;
}

SceneSpec campusScene(bool twin_rooms, double density) {
  SceneSpec s;
  s.rects.push_back(rect(2, 0.0, 0.0, 0.0, 40.0, 40.0, density));
  // Rooms: walls and ceiling; the floor is the ground.
  auto addRoom = [&](double x0, double y0) {
    const double x1 = x0 + 8.0;
    const double y1 = y0 + 6.0;
    s.rects.push_back(rect(0, x0, y0, 0.0, y1, 3.0, density));
    s.rects.push_back(rect(0, x1, y0, 0.0, y1, 3.0, density));
    s.rects.push_back(rect(1, y0, x0, 0.0, x1, 3.0, density));
    s.rects.push_back(rect(1, y1, x0, 0.0, x1, 3.0, density));
    s.rects.push_back(rect(2, 3.0, x0, y0, x1, y1, density));
  };
  addRoom(24.0, 8.0);
  if (twin_rooms) {
    addRoom(6.0, 26.0);
  } else {
    // Clutter that does not look like a room.
    s.rects.push_back(rect(0, 8.0, 25.0, 0.0, 35.0, 1.5, density));
    s.boxes.push_back({{30.0, 28.0, 0.0}, {36.0, 30.5, 2.6}, density});
  }
  return s;
}

SceneSpec sceneByName(const std::string& name, double density) {
  if (name == "room") return roomScene(density);
  if (name == "two-room") return twoRoomScene(density);
  if (name == "corridor") return corridorScene(density);
  if (name == "plane") return planeScene(density);
  if (name == "campus") return campusScene(false, density);
  if (name == "twin-campus") return campusScene(true, density);
  throw ConfigError("scene", "unknown scene '" + name + "'");
}

SceneSpec readSceneSpec(std::istream& in) {
  SceneSpec spec;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::string kind;
    if (!(line >> kind)) continue;
    auto fail = [&](const std::string& what) {
      throw ParseError("scene: " + what, lineno);
    };
    if (kind == "box") {
      SceneBox b;
      if (!(line >> b.min.x() >> b.min.y() >> b.min.z() >> b.max.x() >>
            b.max.y() >> b.max.z() >> b.density)) {
        fail("expected 'box minx miny minz maxx maxy maxz density'");
      }
      spec.boxes.push_back(b);
    } else if (kind == "rect") {
      SceneRect r;
      if (!(line >> r.normal_axis >> r.offset >> r.lo.x() >> r.lo.y() >>
            r.hi.x() >> r.hi.y() >> r.density)) {
        fail("expected 'rect axis offset lo1 lo2 hi1 hi2 density'");
      }
      spec.rects.push_back(r);
    } else if (kind == "noise") {
      if (!(line >> spec.noise_sigma)) fail("expected 'noise <sigma>'");
    } else if (kind == "sensor") {
      std::string model;
      line >> model;
      if (model == "laser") {
        spec.sensor = SensorModel::kLaserLike;
      } else if (model == "vision") {
        spec.sensor = SensorModel::kVisionLike;
      } else {
        fail("sensor must be 'laser' or 'vision'");
      }
    } else {
      fail("unknown primitive '" + kind + "'");
    }
    std::string extra;
    if (line >> extra) fail("trailing token '" + extra + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace planereg
