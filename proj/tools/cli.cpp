#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "planereg/config.hpp"
#include "planereg/errors.hpp"
#include "planereg/evaluation.hpp"
#include "planereg/io.hpp"
#include "planereg/localization.hpp"
#include "planereg/preprocessing.hpp"
#include "planereg/registration.hpp"
#include "planereg/segmentation.hpp"
#include "planereg/synth.hpp"

namespace planereg::cli {
namespace {

namespace fs = std::filesystem;

// Bad flag values detected after parsing; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Stages {
 public:
  Stages(bool verbose, std::ostream& err) : verbose_(verbose), err_(err) {}

  template <typename F>
  auto run(const char* name, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      report(name, start);
    } else {
      auto result = f();
      report(name, start);
      return result;
    }
  }

 private:
  void report(const char* name, std::chrono::steady_clock::time_point start) {
    if (!verbose_) return;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    char line[96];
    std::snprintf(line, sizeof(line), "stage=%s seconds=%.6f", name, dt.count());
    err_ << line << '\n';
  }

  bool verbose_;
  std::ostream& err_;
};

struct Context {
  Config config;
  Stages stages;
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Printed statistics: round-off below 1e-12 shows as 0.
std::string statNumber(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

Vec3 parseVec3(const std::string& text, const char* flag) {
  std::vector<double> v;
  try {
    v = parseNumberList(text);
  } catch (const Error&) {
    throw UsageError(std::string(flag) + " expects tx,ty,tz");
  }
  if (v.size() != 3) throw UsageError(std::string(flag) + " expects tx,ty,tz");
  return {v[0], v[1], v[2]};
}

PointCloud readInput(const std::string& path, std::istream& in, SourceTag tag) {
  PointCloud cloud = (path.empty() || path == "-") ? readCloud(in) : loadCloud(path);
  cloud.source = tag;
  return cloud;
}

PointCloud prepared(Context& ctx, PointCloud cloud, bool raw) {
  if (raw) return cloud;
  return ctx.stages.run("preprocessing",
                        [&] { return preprocess(cloud, ctx.config.filter); });
}

std::ofstream openOutput(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw WriteError("cannot open '" + path.string() + "' for writing");
  return out;
}

void closeOutput(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

// Runs `write` against the file at `path`, or `fallback` if path is empty.
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  auto file = openOutput(path);
  write(file);
  closeOutput(file, path);
}

// Parameters used for a run, as comment lines.
void writeMetadata(std::ostream& out, const Config& config) {
  std::ostringstream text;
  writeConfig(text, config);
  std::istringstream lines(text.str());
  for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
}

std::vector<double> scanTimes(const std::string& times,
                              const std::optional<Trajectory>& odometry,
                              std::size_t count) {
  std::vector<double> out;
  if (!times.empty()) {
    out = parseNumberList(times);
    if (out.size() != count) throw UsageError("--times needs one value per scan");
  } else if (odometry) {
    if (odometry->size() < count) {
      throw InputError("odometry file has fewer poses than there are scans");
    }
    for (std::size_t i = 0; i < count; ++i) out.push_back((*odometry)[i].timestamp);
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<double>(i));
  }
  return out;
}

// Motion from scan i-1 to scan i in the body frame of scan i-1.
std::optional<Vec3> odometryStep(const std::optional<Trajectory>& odometry,
                                 std::size_t i) {
  if (!odometry || i == 0) return std::nullopt;
  const auto& prev = (*odometry)[i - 1].transform;
  const auto& cur = (*odometry)[i].transform;
  return prev.rotation.transpose() * (cur.translation - prev.translation);
}

struct TrackArgs {
  std::vector<std::string> scans;
  std::string odometry;
  std::string times;
  std::string initial_pose;
  std::string output;
  bool raw = false;
};

void addTrackOptions(CLI::App* cmd, TrackArgs& a) {
  cmd->add_option("--scans", a.scans, "Laser scans in acquisition order")
      ->required()
      ->expected(1, -1);
  cmd->add_option("--odom", a.odometry, "Odometry trajectory, one pose per scan");
  cmd->add_option("--times", a.times, "Scan timestamps t0,t1,...");
  cmd->add_option("--initial-pose", a.initial_pose, "Transform file for the first scan");
  cmd->add_option("-o,--output", a.output, "Trajectory file (default: stdout)");
  cmd->add_flag("--raw", a.raw, "Skip voxel and outlier filtering");
}

int trackSequence(Context& ctx, const TrackArgs& a, const GlobalMap* map,
                  bool relative_optimization, const std::string& merged) {
  std::optional<Trajectory> odometry;
  if (!a.odometry.empty()) odometry = loadTrajectory(a.odometry);
  const auto times = scanTimes(a.times, odometry, a.scans.size());

  std::vector<PointCloud> scans;
  for (const auto& path : a.scans) {
    scans.push_back(prepared(ctx, readInput(path, ctx.in, SourceTag::kLaser), a.raw));
  }

  TrackerOptions options{ctx.config, relative_optimization};
  std::optional<RigidTransform> first_pose;
  if (!a.initial_pose.empty()) {
    first_pose = loadTransform(a.initial_pose);
  } else if (map) {
    const auto found = ctx.stages.run(
        "initial_pose", [&] { return initialPoseSearch(*map, scans[0], ctx.config); });
    if (found.outcome == SearchOutcome::kNotFound) {
      ctx.err << "NOT_FOUND: no map cell registers with the first scan\n";
      return kExitNotFound;
    }
    if (found.outcome == SearchOutcome::kAmbiguous) {
      ctx.err << "AMBIGUOUS: ratio=" << statNumber(found.best_ratio)
              << " runner_up=" << statNumber(found.runner_up_ratio)
              << "; collect more scans\n";
      return kExitAmbiguous;
    }
    first_pose = found.pose;
  } else {
    first_pose = RigidTransform::identity();
  }

  TrackerState state = ctx.stages.run("tracking", [&] {
    return initialize(scans[0], times[0], first_pose, map, options);
  });
  for (std::size_t i = 1; i < scans.size(); ++i) {
    ctx.stages.run("tracking", [&] {
      trackStep(state, scans[i], times[i], odometryStep(odometry, i), map, options);
    });
  }

  emit(a.output, ctx.out, [&](std::ostream& o) {
    writeMetadata(o, ctx.config);
    writeTrajectory(o, trajectoryOf(state));
  });
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const auto& rec = state.history[i];
    if (rec.low_confidence) {
      ctx.err << "warning: scan " << i << " has translation rank "
              << rec.translation_rank << "; pose is low-confidence\n";
    }
  }
  if (map && !merged.empty()) {
    ctx.stages.run("export", [&] {
      std::vector<SourceTag> provenance;
      const PointCloud fused = fuseClouds(state, *map, &provenance);
      saveTaggedPly(fused, provenance, merged);
    });
  }
  return kExitOk;
}

GlobalMap loadMap(Context& ctx, const std::string& path, bool raw) {
  return GlobalMap(prepared(ctx, readInput(path, ctx.in, SourceTag::kVision), raw));
}

SensorSetup sensorAt(const std::string& pose, double yaw_deg) {
  SensorSetup s;
  const Vec3 t = pose.empty() ? Vec3::Zero() : parseVec3(pose, "--pose");
  s.pose = RigidTransform::fromAxisAngle(Vec3::UnitZ(), deg2rad(yaw_deg), t);
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err) {
  CLI::App app{"Plane-based registration and localization of point clouds", "planereg"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  bool verbose = false;
  app.add_option("--config", config_path, "Parameter file (key = value, [sections])");
  app.add_flag("--verbose", verbose, "Print stage timings to stderr");

  // segment
  std::string seg_input;
  std::string seg_output;
  bool seg_raw = false;
  bool seg_vision = false;
  auto* segment = app.add_subcommand("segment", "Extract planar segments");
  segment->add_option("input", seg_input, "Cloud file (default: stdin)");
  segment->add_option("-o,--output", seg_output, "Segment file (default: stdout)");
  segment->add_flag("--raw", seg_raw, "Skip voxel and outlier filtering");
  segment->add_flag("--vision", seg_vision, "Treat the input as vision-derived");

  // register
  std::string reg_source, reg_target, reg_hint, reg_odom, reg_output;
  bool reg_icp = false;
  bool reg_raw = false;
  bool reg_vision_target = false;
  auto* reg = app.add_subcommand("register", "Register a source cloud onto a target");
  reg->add_option("--source", reg_source, "Source (data) cloud")->required();
  reg->add_option("--target", reg_target, "Target (model) cloud")->required();
  reg->add_option("--hint", reg_hint, "Initial transform file");
  reg->add_option("--odom", reg_odom, "Odometry translation tx,ty,tz");
  reg->add_flag("--icp", reg_icp, "Refine with point-to-point ICP");
  reg->add_flag("--raw", reg_raw, "Skip voxel and outlier filtering");
  reg->add_flag("--vision-target", reg_vision_target, "Target is vision-derived");
  reg->add_option("-o,--output", reg_output, "Transform file (default: stdout)");

  // track
  TrackArgs track_args;
  auto* track = app.add_subcommand("track", "Relative pose tracking over a scan sequence");
  addTrackOptions(track, track_args);

  // localize
  TrackArgs loc_args;
  std::string loc_map, loc_merged;
  bool loc_no_relative = false;
  auto* localize = app.add_subcommand("localize", "Track against a prior vision map");
  localize->add_option("--map", loc_map, "Global map (vision-derived, metric)")->required();
  addTrackOptions(localize, loc_args);
  localize->add_option("--merged", loc_merged, "Fused map export (PLY, with source tag)");
  localize->add_flag("--no-relative-opt", loc_no_relative,
                     "Disable metascan optimization in relative mode");

  // init-pose
  std::string ip_map, ip_scan, ip_output;
  bool ip_raw = false;
  auto* init_pose = app.add_subcommand("init-pose", "Locate a scan in the map");
  init_pose->add_option("--map", ip_map, "Global map")->required();
  init_pose->add_option("--scan", ip_scan, "Laser scan")->required();
  init_pose->add_option("-o,--output", ip_output, "Transform file (default: stdout)");
  init_pose->add_flag("--raw", ip_raw, "Skip voxel and outlier filtering");

  // evaluate
  std::string ev_est, ev_ref, ev_metric = "ate";
  std::size_t ev_delta = 1;
  auto* evaluate = app.add_subcommand("evaluate", "Trajectory error (ATE or RPE)");
  evaluate->add_option("--est", ev_est, "Estimated trajectory")->required();
  evaluate->add_option("--ref", ev_ref, "Reference trajectory")->required();
  evaluate->add_option("--metric", ev_metric, "ate or rpe")
      ->check(CLI::IsMember({"ate", "rpe"}));
  evaluate->add_option("--delta", ev_delta, "RPE step in poses")->check(CLI::PositiveNumber);

  // scale
  std::string sc_vision, sc_gps, sc_cloud, sc_cloud_out, sc_traj_out;
  auto* scale = app.add_subcommand("scale", "Metric scale of a vision reconstruction");
  scale->add_option("--vision", sc_vision, "Vision trajectory")->required();
  scale->add_option("--gps", sc_gps, "GPS trajectory (local metric frame)")->required();
  scale->add_option("--cloud", sc_cloud, "Vision cloud to rescale");
  scale->add_option("--cloud-out", sc_cloud_out, "Rescaled cloud");
  scale->add_option("--trajectory-out", sc_traj_out, "Rescaled vision trajectory");

  // synth
  std::string sy_scene, sy_scene_file, sy_sensor = "laser", sy_pose, sy_output,
                                       sy_out_dir, sy_traj;
  double sy_noise = 0.0, sy_yaw = 0.0;
  double sy_density = 0.0;
  std::uint64_t sy_seed = 1;
  auto* synth = app.add_subcommand("synth", "Generate synthetic laser/vision clouds");
  synth->add_option("scene", sy_scene, "room, two-room, corridor, plane, campus, twin-campus");
  synth->add_option("--scene-file", sy_scene_file, "Scene description file");
  synth->add_option("--sensor", sy_sensor, "laser or vision")
      ->check(CLI::IsMember({"laser", "vision"}));
  synth->add_option("--noise", sy_noise, "Noise sigma [m]");
  synth->add_option("--density", sy_density, "Points per square meter (default: scene)");
  synth->add_option("--seed", sy_seed, "Random seed");
  synth->add_option("--pose", sy_pose, "Sensor position tx,ty,tz");
  synth->add_option("--yaw", sy_yaw, "Sensor heading [deg]");
  synth->add_option("--trajectory", sy_traj, "Sensor trajectory (writes one scan per pose)");
  synth->add_option("-o,--output", sy_output, "Cloud file (default: stdout, xyz)");
  synth->add_option("--out-dir", sy_out_dir, "Write laser, vision and ground truth files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    Context ctx{loadConfig(config_path.empty() ? std::nullopt
                                               : std::optional<fs::path>(config_path)),
                Stages(verbose, err), in, out, err};

    if (segment->parsed()) {
      PointCloud cloud = readInput(seg_input, in,
                                   seg_vision ? SourceTag::kVision : SourceTag::kLaser);
      cloud = prepared(ctx, std::move(cloud), seg_raw);
      const auto segments = ctx.stages.run(
          "segmentation", [&] { return segmentPlanes(cloud, ctx.config.segmentation); });
      emit(seg_output, out, [&](std::ostream& o) { writeSegments(o, segments); });
      return kExitOk;
    }

    if (reg->parsed()) {
      std::optional<Vec3> odom;
      if (!reg_odom.empty()) odom = parseVec3(reg_odom, "--odom");
      RigidTransform hint = odom ? RigidTransform::fromTranslation(*odom)
                                 : RigidTransform::identity();
      if (!reg_hint.empty()) hint = loadTransform(reg_hint);
      const PointCloud source =
          prepared(ctx, readInput(reg_source, in, SourceTag::kLaser), reg_raw);
      const PointCloud target = prepared(
          ctx,
          readInput(reg_target, in,
                    reg_vision_target ? SourceTag::kVision : SourceTag::kLaser),
          reg_raw);
      const auto source_segments = ctx.stages.run(
          "segmentation", [&] { return segmentPlanes(source, ctx.config.segmentation); });
      const auto target_segments = ctx.stages.run(
          "segmentation", [&] { return segmentPlanes(target, ctx.config.segmentation); });
      const RegistrationResult result = ctx.stages.run("registration", [&] {
        return registerSegments(source_segments, target_segments, ctx.config.match,
                                hint, odom);
      });
      if (!result.success) {
        err << "error: registration failed: no plane correspondences ("
            << source_segments.size() << " source, " << target_segments.size()
            << " target planes)\n";
        return kExitDomain;
      }
      RigidTransform transform = result.transform;
      if (reg_icp) {
        transform = ctx.stages.run("icp", [&] {
          return icpRefine(source, target, transform, ctx.config.icp).transform;
        });
      }
      emit(reg_output, out, [&](std::ostream& o) { writeTransform(o, transform); });
      out << "rank=" << result.transform.translation_rank
          << " pairs=" << result.correspondences.pairs.size() << '\n';
      return kExitOk;
    }

    if (track->parsed()) {
      return trackSequence(ctx, track_args, nullptr, true, {});
    }

    if (localize->parsed()) {
      const GlobalMap map = loadMap(ctx, loc_map, loc_args.raw);
      return trackSequence(ctx, loc_args, &map, !loc_no_relative, loc_merged);
    }

    if (init_pose->parsed()) {
      const GlobalMap map = loadMap(ctx, ip_map, ip_raw);
      const PointCloud scan =
          prepared(ctx, readInput(ip_scan, in, SourceTag::kLaser), ip_raw);
      const auto found = ctx.stages.run(
          "initial_pose", [&] { return initialPoseSearch(map, scan, ctx.config); });
      const std::string ratios = "ratio=" + statNumber(found.best_ratio) +
                                 " runner_up=" + statNumber(found.runner_up_ratio) +
                                 " cells=" + std::to_string(found.cells.size());
      switch (found.outcome) {
        case SearchOutcome::kFound:
          emit(ip_output, out, [&](std::ostream& o) { writeTransform(o, found.pose); });
          out << ratios << '\n';
          return kExitOk;
        case SearchOutcome::kAmbiguous:
          out << "AMBIGUOUS " << ratios << '\n';
          return kExitAmbiguous;
        case SearchOutcome::kNotFound:
          out << "NOT_FOUND " << ratios << '\n';
          return kExitNotFound;
      }
    }

    if (evaluate->parsed()) {
      const Trajectory est = loadTrajectory(ev_est);
      const Trajectory ref = loadTrajectory(ev_ref);
      const ErrorStats stats = ctx.stages.run("evaluation", [&] {
        return ev_metric == "rpe" ? computeRpe(est, ref, ev_delta) : computeAte(est, ref);
      });
      out << "rmse=" << statNumber(stats.rmse) << " min=" << statNumber(stats.min)
          << " max=" << statNumber(stats.max) << '\n';
      if (stats.degenerate) err << "warning: degenerate (collinear) alignment\n";
      return kExitOk;
    }

    if (scale->parsed()) {
      if (!sc_cloud.empty() && sc_cloud_out.empty()) {
        throw UsageError("--cloud requires --cloud-out");
      }
      const Trajectory vision = loadTrajectory(sc_vision);
      const Trajectory gps = loadTrajectory(sc_gps);
      const double s = estimateScale(vision, gps);
      out << "scale=" << formatNumber(s) << '\n';
      if (!sc_cloud.empty()) {
        PointCloud cloud = readInput(sc_cloud, in, SourceTag::kVision);
        saveCloud(scaleCloud(cloud, s), sc_cloud_out);
      }
      if (!sc_traj_out.empty()) saveTrajectory(scaleTrajectory(vision, s), sc_traj_out);
      return kExitOk;
    }

    if (synth->parsed()) {
      if (sy_scene.empty() == sy_scene_file.empty()) {
        throw UsageError("give either a scene name or --scene-file");
      }
      SceneSpec spec;
      if (!sy_scene_file.empty()) {
        std::ifstream file(sy_scene_file);
        if (!file) throw InputError("cannot read '" + sy_scene_file + "'");
        spec = readSceneSpec(file);
      } else {
        double density = sy_density;
        if (density <= 0.0) density = sy_scene.find("campus") != std::string::npos ? 150.0 : 100.0;
        spec = sceneByName(sy_scene, density);
      }
      spec.noise_sigma = sy_noise;
      spec.validate();

      if (sy_out_dir.empty()) {
        if (!sy_traj.empty()) throw UsageError("--trajectory requires --out-dir");
        spec.sensor = sy_sensor == "vision" ? SensorModel::kVisionLike
                                            : SensorModel::kLaserLike;
        const PointCloud cloud = sampleScene(spec, sensorAt(sy_pose, sy_yaw), sy_seed);
        if (sy_output.empty()) {
          writeCloud(out, cloud, CloudFormat::kXyz);
        } else {
          saveCloud(cloud, sy_output);
        }
        return kExitOk;
      }

      // Paired outputs: laser scans in the sensor frame, a vision map of the
      // whole scene in the world frame, and the ground-truth poses.
      const fs::path dir = sy_out_dir;
      fs::create_directories(dir);
      Trajectory truth;
      if (!sy_traj.empty()) {
        truth = loadTrajectory(sy_traj);
      } else {
        truth.append({0.0, sensorAt(sy_pose, sy_yaw).pose});
      }
      spec.sensor = SensorModel::kLaserLike;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        SensorSetup sensor;
        sensor.pose = truth[i].transform;
        const PointCloud scan = sampleScene(spec, sensor, sy_seed + i);
        char name[32];
        std::snprintf(name, sizeof(name), "scan_%03zu.xyz", i);
        saveCloud(scan, truth.size() == 1 ? dir / "laser.xyz" : dir / name);
      }
      const PointCloud map = sampleVisionMap(spec, sy_seed + truth.size());
      saveCloud(map, dir / "vision.ply");
      saveTrajectory(truth, dir / "ground_truth.txt");
      if (truth.size() == 1) saveTransform(truth[0].transform, dir / "pose.txt");
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace planereg::cli
