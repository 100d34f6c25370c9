#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planereg/geometry.hpp"

namespace planereg {

enum class CloudFormat { kAsciiPly, kXyz };

struct CloudFile {
  std::filesystem::path path;
  CloudFormat format = CloudFormat::kXyz;
  std::size_t point_count = 0;
};

// Format from the extension (.ply, else xyz).
CloudFormat formatFromPath(const std::filesystem::path& path);

// Floating-point rendering used by every writer: 7 significant digits,
// always with a decimal point or exponent ("1.0", "0.3333333", "1e+10").
std::string formatNumber(double value);

/// Reads an ASCII PLY (vertex x,y,z with optional red,green,blue; other
/// vertex properties and other elements are skipped) or an xyz file
/// (`x y z [r g b]` per line, `#` comments). Throws ParseError with the line
/// number on malformed input, count mismatch or non-finite coordinates.
PointCloud readCloud(std::istream& in, std::optional<CloudFormat> format = {});
PointCloud loadCloud(const std::filesystem::path& path,
                     CloudFile* info = nullptr);

void writeCloud(std::ostream& out, const PointCloud& cloud, CloudFormat format);
/// Throws WriteError if the file cannot be written.
void saveCloud(const PointCloud& cloud, const std::filesystem::path& path,
               CloudFormat format);
void saveCloud(const PointCloud& cloud, const std::filesystem::path& path);

/// ASCII PLY with an extra per-vertex `uchar source` property
/// (0 = vision, 1 = laser). `provenance` must have one entry per point.
void saveTaggedPly(const PointCloud& cloud,
                   std::span<const SourceTag> provenance,
                   const std::filesystem::path& path);

/// Trajectory files: `timestamp tx ty tz qx qy qz qw` per line.
Trajectory readTrajectory(std::istream& in);
Trajectory loadTrajectory(const std::filesystem::path& path);
void writeTrajectory(std::ostream& out, const Trajectory& trajectory);
void saveTrajectory(const Trajectory& trajectory,
                    const std::filesystem::path& path);

/// Transform files: 4 lines of 4 numbers (row-major homogeneous matrix).
RigidTransform readTransform(std::istream& in);
RigidTransform loadTransform(const std::filesystem::path& path);
void writeTransform(std::ostream& out, const RigidTransform& transform);
void saveTransform(const RigidTransform& transform,
                   const std::filesystem::path& path);

/// Segment files: one line per segment,
/// `nx ny nz d area n_inliers minx miny minz maxx maxy maxz`.
void writeSegments(std::ostream& out, std::span<const PlanarSegment> segments);

// Parses a comma separated vector such as "1,2,3".
std::vector<double> parseNumberList(const std::string& text);

}  // namespace planereg
