#include "planereg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "planereg/errors.hpp"
#include "planereg/io.hpp"

namespace planereg {
namespace {

struct Entry {
  std::string_view section;
  std::string_view key;
  std::function<double&(Config&)> real;
  std::function<std::size_t&(Config&)> count;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto real = [&t](std::string_view section, std::string_view key,
                     std::function<double&(Config&)> f) {
      t.push_back({section, key, std::move(f), nullptr});
    };
    auto count = [&t](std::string_view section, std::string_view key,
                      std::function<std::size_t&(Config&)> f) {
      t.push_back({section, key, nullptr, std::move(f)});
    };
    real("preprocessing", "voxel_leaf", [](Config& c) -> double& { return c.filter.voxel_leaf; });
    real("preprocessing", "vision_voxel_leaf", [](Config& c) -> double& { return c.filter.vision_voxel_leaf; });
    count("preprocessing", "outlier_neighbors", [](Config& c) -> std::size_t& { return c.filter.outlier_neighbors; });
    real("preprocessing", "outlier_stddev_mult", [](Config& c) -> double& { return c.filter.outlier_stddev_mult; });

    real("segmentation", "neighbor_radius", [](Config& c) -> double& { return c.segmentation.neighbor_radius; });
    real("segmentation", "distance_threshold", [](Config& c) -> double& { return c.segmentation.distance_threshold; });
    real("segmentation", "angle_threshold", [](Config& c) -> double& { return c.segmentation.angle_threshold; });
    count("segmentation", "min_inliers", [](Config& c) -> std::size_t& { return c.segmentation.min_inliers; });
    real("segmentation", "min_area", [](Config& c) -> double& { return c.segmentation.min_area; });
    count("segmentation", "normal_neighbors", [](Config& c) -> std::size_t& { return c.segmentation.normal_neighbors; });
    count("segmentation", "refit_interval", [](Config& c) -> std::size_t& { return c.segmentation.refit_interval; });

    real("registration", "angle_tol", [](Config& c) -> double& { return c.match.angle_tol; });
    real("registration", "distance_tol", [](Config& c) -> double& { return c.match.distance_tol; });
    real("registration", "area_ratio_tol", [](Config& c) -> double& { return c.match.area_ratio_tol; });
    real("registration", "overlap_epsilon", [](Config& c) -> double& { return c.match.overlap_epsilon; });
    real("registration", "rank_tol", [](Config& c) -> double& { return c.match.rank_tol; });

    count("icp", "icp_max_iterations", [](Config& c) -> std::size_t& { return c.icp.max_iterations; });
    real("icp", "icp_max_correspondence_distance", [](Config& c) -> double& { return c.icp.max_correspondence_distance; });

    real("cell_search", "cell_tolerance", [](Config& c) -> double& { return c.cell_search.cell_tolerance; });
    real("cell_search", "alpha", [](Config& c) -> double& { return c.cell_search.alpha; });
    real("cell_search", "beta", [](Config& c) -> double& { return c.cell_search.beta; });
    real("cell_search", "same_pose_distance", [](Config& c) -> double& { return c.cell_search.same_pose_distance; });

    count("metascan", "min_overlapping_surfaces", [](Config& c) -> std::size_t& { return c.metascan.min_overlapping_surfaces; });
    real("metascan", "min_pose_change_angle", [](Config& c) -> double& { return c.metascan.min_pose_change_angle; });
    real("metascan", "min_pose_change_translation", [](Config& c) -> double& { return c.metascan.min_pose_change_translation; });

    real("localization", "section_tolerance", [](Config& c) -> double& { return c.localization.section_tolerance; });
    real("localization", "max_correction_angle", [](Config& c) -> double& { return c.localization.max_correction_angle; });
    real("localization", "max_correction_fraction", [](Config& c) -> double& { return c.localization.max_correction_fraction; });
    return t;
  }();
  return table;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool knownSection(std::string_view name) {
  for (const auto& e : entries()) {
    if (e.section == name) return true;
  }
  return false;
}

}  // namespace

void Config::validate() const {
  filter.validate();
  segmentation.validate();
  match.validate();
  icp.validate();
  cell_search.validate();
  metascan.validate();
  localization.validate();
}

Config readConfig(std::istream& in) {
  Config config;
  std::string section;
  std::vector<std::string> unknown;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", lineno);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!knownSection(section)) {
        throw ConfigError(section, "unknown section (line " + std::to_string(lineno) + ")");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", lineno);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    const Entry* entry = nullptr;
    for (const auto& e : entries()) {
      if (e.key == key) entry = &e;
    }
    if (!entry) {
      unknown.push_back(key);
      continue;
    }
    if (!section.empty() && entry->section != section) {
      throw ConfigError(key, "belongs to section [" + std::string(entry->section) +
                                 "], found in [" + section + "]");
    }
    if (entry->real) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v)) {
        throw ConfigError(key, "invalid number '" + value + "'");
      }
      entry->real(config) = v;
    } else {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError(key, "invalid count '" + value + "'");
      }
      entry->count(config) = v;
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(list, "unknown key(s)");
  }
  config.validate();
  return config;
}

Config loadConfig(const std::optional<std::filesystem::path>& path) {
  if (!path) return Config{};
  std::ifstream in(*path);
  if (!in) {
    if (!std::filesystem::exists(*path)) return Config{};
    throw InputError("cannot read config '" + path->string() + "'");
  }
  return readConfig(in);
}

void writeConfig(std::ostream& out, const Config& config) {
  Config copy = config;
  std::string_view section;
  for (const auto& e : entries()) {
    if (e.section != section) {
      section = e.section;
      out << "[" << section << "]\n";
    }
    out << e.key << " = ";
    if (e.real) {
      out << formatNumber(e.real(copy));
    } else {
      out << e.count(copy);
    }
    out << "\n";
  }
}

}  // namespace planereg
