#include "planereg/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include "planereg/errors.hpp"

namespace planereg {
namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parseDouble(std::string_view token, std::size_t line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("invalid number '" + std::string(token) + "'", line);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value '" + std::string(token) + "'", line);
  }
  return value;
}

std::size_t parseCount(std::string_view token, std::size_t line) {
  std::size_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError("invalid count '" + std::string(token) + "'", line);
  }
  return value;
}

std::uint8_t parseChannel(std::string_view token, std::size_t line) {
  const double v = parseDouble(token, line);
  if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
    throw ParseError("color channel out of range: '" + std::string(token) + "'",
                     line);
  }
  return static_cast<std::uint8_t>(v);
}

std::vector<std::string> readLines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool isBlankOrComment(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

PointCloud parsePly(const std::vector<std::string>& lines) {
  if (lines.empty() || tokenize(lines[0]) != std::vector<std::string_view>{"ply"}) {
    throw ParseError("missing 'ply' magic", 1);
  }
  std::vector<PlyElement> elements;
  std::size_t i = 1;
  bool header_done = false;
  bool format_seen = false;
  for (; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto tok = tokenize(lines[i]);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      header_done = true;
      ++i;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii") {
        throw ParseError("only 'format ascii 1.0' PLY files are supported", lineno);
      }
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", lineno);
      elements.push_back({std::string(tok[1]), parseCount(tok[2], lineno), {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before element", lineno);
      if (tok.size() == 5 && tok[1] == "list") {
        elements.back().has_list = true;
        elements.back().properties.emplace_back(tok[4]);
      } else if (tok.size() == 3) {
        elements.back().properties.emplace_back(tok[2]);
      } else {
        throw ParseError("malformed property line", lineno);
      }
    } else {
      throw ParseError("unexpected header keyword '" + std::string(tok[0]) + "'",
                       lineno);
    }
  }
  if (!header_done) throw ParseError("missing end_header", lines.size());
  if (!format_seen) throw ParseError("missing format line", 2);

  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      if (vertex) throw ParseError("duplicate vertex element", 0);
      vertex = &e;
    }
  }
  if (!vertex) throw ParseError("no vertex element", 0);
  if (vertex->has_list) throw ParseError("list properties on vertices are not supported", 0);

  auto find = [&](std::initializer_list<std::string_view> names) -> std::ptrdiff_t {
    for (std::size_t k = 0; k < vertex->properties.size(); ++k) {
      for (auto n : names) {
        if (vertex->properties[k] == n) return static_cast<std::ptrdiff_t>(k);
      }
    }
    return -1;
  };
  const std::ptrdiff_t px = find({"x"});
  const std::ptrdiff_t py = find({"y"});
  const std::ptrdiff_t pz = find({"z"});
  if (px < 0 || py < 0 || pz < 0) throw ParseError("vertex lacks x, y or z", 0);
  const std::ptrdiff_t pr = find({"red", "diffuse_red", "r"});
  const std::ptrdiff_t pg = find({"green", "diffuse_green", "g"});
  const std::ptrdiff_t pb = find({"blue", "diffuse_blue", "b"});
  const bool colored = pr >= 0 && pg >= 0 && pb >= 0;

  PointCloud cloud;
  if (colored) cloud.colors.emplace();
  constexpr std::size_t kMaxReserve = 1u << 20;
  cloud.points.reserve(std::min(vertex->count, kMaxReserve));

  auto nextRecord = [&]() -> std::size_t {
    while (i < lines.size() && tokenize(lines[i]).empty()) ++i;
    if (i >= lines.size()) {
      throw ParseError("unexpected end of file: fewer records than declared",
                       lines.size());
    }
    return i++;
  };

  for (const auto& e : elements) {
    for (std::size_t r = 0; r < e.count; ++r) {
      const std::size_t idx = nextRecord();
      if (&e != vertex) continue;
      const auto tok = tokenize(lines[idx]);
      if (tok.size() != e.properties.size()) {
        throw ParseError("expected " + std::to_string(e.properties.size()) +
                             " values, got " + std::to_string(tok.size()),
                         idx + 1);
      }
      cloud.points.emplace_back(parseDouble(tok[static_cast<std::size_t>(px)], idx + 1),
                                parseDouble(tok[static_cast<std::size_t>(py)], idx + 1),
                                parseDouble(tok[static_cast<std::size_t>(pz)], idx + 1));
      if (colored) {
        cloud.colors->push_back({parseChannel(tok[static_cast<std::size_t>(pr)], idx + 1),
                                 parseChannel(tok[static_cast<std::size_t>(pg)], idx + 1),
                                 parseChannel(tok[static_cast<std::size_t>(pb)], idx + 1)});
      }
    }
  }
  for (; i < lines.size(); ++i) {
    if (!tokenize(lines[i]).empty()) {
      throw ParseError("trailing data after declared elements", i + 1);
    }
  }
  return cloud;
}

PointCloud parseXyz(const std::vector<std::string>& lines) {
  PointCloud cloud;
  std::optional<bool> colored;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (isBlankOrComment(lines[i])) continue;
    const auto tok = tokenize(lines[i]);
    if (tok.size() != 3 && tok.size() != 6) {
      throw ParseError("expected 'x y z' or 'x y z r g b'", i + 1);
    }
    const bool has_color = tok.size() == 6;
    if (!colored) {
      colored = has_color;
      if (has_color) cloud.colors.emplace();
    } else if (*colored != has_color) {
      throw ParseError("mixed colored and uncolored points", i + 1);
    }
    cloud.points.emplace_back(parseDouble(tok[0], i + 1), parseDouble(tok[1], i + 1),
                              parseDouble(tok[2], i + 1));
    if (has_color) {
      cloud.colors->push_back({parseChannel(tok[3], i + 1),
                               parseChannel(tok[4], i + 1),
                               parseChannel(tok[5], i + 1)});
    }
  }
  return cloud;
}

std::ofstream openForWrite(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw WriteError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finishWrite(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

std::ifstream openForRead(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

void writePlyHeader(std::ostream& out, const PointCloud& cloud, bool tagged) {
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.colors) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  if (tagged) out << "property uchar source\n";
  out << "end_header\n";
}

void writePoint(std::ostream& out, const PointCloud& cloud, std::size_t i) {
  const Point3& p = cloud.points[i];
  out << formatNumber(p.x()) << ' ' << formatNumber(p.y()) << ' '
      << formatNumber(p.z());
  if (cloud.colors) {
    const Rgb& c = (*cloud.colors)[i];
    out << ' ' << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b);
  }
}

}  // namespace

CloudFormat formatFromPath(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? CloudFormat::kAsciiPly : CloudFormat::kXyz;
}

std::string formatNumber(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.7g", value);
  std::string s(buf);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

PointCloud readCloud(std::istream& in, std::optional<CloudFormat> format) {
  const auto lines = readLines(in);
  if (!format) {
    const bool ply = !lines.empty() && lines[0].rfind("ply", 0) == 0;
    format = ply ? CloudFormat::kAsciiPly : CloudFormat::kXyz;
  }
  return *format == CloudFormat::kAsciiPly ? parsePly(lines) : parseXyz(lines);
}

PointCloud loadCloud(const std::filesystem::path& path, CloudFile* info) {
  auto in = openForRead(path);
  const CloudFormat format = formatFromPath(path);
  PointCloud cloud = readCloud(in, format);
  if (info) *info = {path, format, cloud.size()};
  return cloud;
}

void writeCloud(std::ostream& out, const PointCloud& cloud, CloudFormat format) {
  cloud.validate();
  if (format == CloudFormat::kAsciiPly) writePlyHeader(out, cloud, false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    writePoint(out, cloud, i);
    out << '\n';
  }
}

void saveCloud(const PointCloud& cloud, const std::filesystem::path& path,
               CloudFormat format) {
  auto out = openForWrite(path);
  writeCloud(out, cloud, format);
  finishWrite(out, path);
}

void saveCloud(const PointCloud& cloud, const std::filesystem::path& path) {
  saveCloud(cloud, path, formatFromPath(path));
}

void saveTaggedPly(const PointCloud& cloud,
                   std::span<const SourceTag> provenance,
                   const std::filesystem::path& path) {
  cloud.validate();
  if (provenance.size() != cloud.size()) {
    throw InputError("provenance tags must match the point count");
  }
  auto out = openForWrite(path);
  writePlyHeader(out, cloud, true);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    writePoint(out, cloud, i);
    out << ' ' << (provenance[i] == SourceTag::kLaser ? 1 : 0) << '\n';
  }
  finishWrite(out, path);
}

Trajectory readTrajectory(std::istream& in) {
  const auto lines = readLines(in);
  Trajectory traj;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (isBlankOrComment(lines[i])) continue;
    const auto tok = tokenize(lines[i]);
    if (tok.size() != 8) {
      throw ParseError("expected 'timestamp tx ty tz qx qy qz qw'", i + 1);
    }
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = parseDouble(tok[static_cast<std::size_t>(k)], i + 1);
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) throw ParseError("zero quaternion", i + 1);
    Pose pose;
    pose.timestamp = v[0];
    pose.transform = RigidTransform::fromQuaternion(q, Vec3(v[1], v[2], v[3]));
    try {
      traj.append(pose);
    } catch (const InputError& e) {
      throw ParseError(e.what(), i + 1);
    }
  }
  return traj;
}

Trajectory loadTrajectory(const std::filesystem::path& path) {
  auto in = openForRead(path);
  return readTrajectory(in);
}

void writeTrajectory(std::ostream& out, const Trajectory& trajectory) {
  char stamp[64];
  for (const auto& pose : trajectory) {
    std::snprintf(stamp, sizeof(stamp), "%.6f", pose.timestamp);
    const auto& t = pose.transform.translation;
    const auto q = pose.transform.quaternion();
    out << stamp << ' ' << formatNumber(t.x()) << ' ' << formatNumber(t.y())
        << ' ' << formatNumber(t.z()) << ' ' << formatNumber(q.x()) << ' '
        << formatNumber(q.y()) << ' ' << formatNumber(q.z()) << ' '
        << formatNumber(q.w()) << '\n';
  }
}

void saveTrajectory(const Trajectory& trajectory,
                    const std::filesystem::path& path) {
  auto out = openForWrite(path);
  writeTrajectory(out, trajectory);
  finishWrite(out, path);
}

RigidTransform readTransform(std::istream& in) {
  const auto lines = readLines(in);
  std::vector<double> values;
  std::size_t last_line = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (isBlankOrComment(lines[i])) continue;
    const auto tok = tokenize(lines[i]);
    if (tok.size() != 4) throw ParseError("expected 4 numbers per row", i + 1);
    if (values.size() == 16) throw ParseError("more than 4 rows", i + 1);
    for (auto t : tok) values.push_back(parseDouble(t, i + 1));
    last_line = i + 1;
  }
  if (values.size() != 16) throw ParseError("expected 4 rows of 4 numbers", last_line);
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = values[static_cast<std::size_t>(4 * r + c)];
  }
  constexpr double kTol = 1e-4;
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kTol) {
    throw ParseError("last row must be 0 0 0 1", last_line);
  }
  const Mat3 r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > kTol ||
      r.determinant() < 0.0) {
    throw ParseError("upper-left block is not a rotation", last_line);
  }
  return RigidTransform::fromMatrix(m);
}

RigidTransform loadTransform(const std::filesystem::path& path) {
  auto in = openForRead(path);
  return readTransform(in);
}

void writeTransform(std::ostream& out, const RigidTransform& transform) {
  const Eigen::Matrix4d m = transform.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      // Round-off below 1e-12 is printed as zero (also folds -0).
      const double v = std::abs(m(r, c)) < 1e-12 ? 0.0 : m(r, c);
      out << (c ? " " : "") << formatNumber(v);
    }
    out << '\n';
  }
}

void saveTransform(const RigidTransform& transform,
                   const std::filesystem::path& path) {
  auto out = openForWrite(path);
  writeTransform(out, transform);
  finishWrite(out, path);
}

void writeSegments(std::ostream& out, std::span<const PlanarSegment> segments) {
  for (const auto& s : segments) {
    out << formatNumber(s.normal.x()) << ' ' << formatNumber(s.normal.y()) << ' '
        << formatNumber(s.normal.z()) << ' ' << formatNumber(s.distance) << ' '
        << formatNumber(s.area) << ' ' << s.inliers.size() << ' '
        << formatNumber(s.extent_min.x()) << ' ' << formatNumber(s.extent_min.y())
        << ' ' << formatNumber(s.extent_min.z()) << ' '
        << formatNumber(s.extent_max.x()) << ' ' << formatNumber(s.extent_max.y())
        << ' ' << formatNumber(s.extent_max.z()) << '\n';
  }
}

std::vector<double> parseNumberList(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view item = std::string_view(text).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto tok = tokenize(item);
    if (tok.size() != 1) throw ParseError("malformed number list '" + text + "'", 0);
    out.push_back(parseDouble(tok[0], 0));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace planereg
