#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "planereg/config.hpp"
#include "planereg/errors.hpp"
#include "planereg/io.hpp"
#include "support.hpp"

namespace planereg {
namespace {

namespace fs = std::filesystem;

PointCloud parse(const std::string& text, std::optional<CloudFormat> format = {}) {
  std::istringstream in(text);
  return readCloud(in, format);
}

std::string render(const PointCloud& c, CloudFormat format) {
  std::ostringstream out;
  writeCloud(out, c, format);
  return out.str();
}

PointCloud randomCloud(std::mt19937_64& rng, bool colored) {
  std::uniform_int_distribution<int> n(0, 200), channel(0, 255), expo(-6, 6);
  std::uniform_real_distribution<double> mant(-10, 10);
  PointCloud c;
  const int count = n(rng);
  if (colored) c.colors.emplace();
  for (int i = 0; i < count; ++i) {
    auto v = [&] { return mant(rng) * std::pow(10.0, expo(rng)); };
    c.points.emplace_back(v(), v(), v());
    if (colored) {
      c.colors->push_back({std::uint8_t(channel(rng)), std::uint8_t(channel(rng)),
                           std::uint8_t(channel(rng))});
    }
  }
  return c;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() /
                  ("planereg_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                   "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

// ---- clouds ----------------------------------------------------------------

TEST(ReadCloud, XyzThreeLines) {
  const auto c = parse("1 2 3\n4 5 6\n# comment\n\n7 8 9\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.points[2], Point3(7, 8, 9));
  EXPECT_FALSE(c.colors);
}

TEST(ReadCloud, XyzWithColors) {
  const auto c = parse("1 2 3 255 0 10\n");
  ASSERT_TRUE(c.colors);
  EXPECT_EQ((*c.colors)[0], (Rgb{255, 0, 10}));
}

TEST(ReadCloud, PlyWithZeroVertices) {
  const auto c = parse("ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\n"
                       "property float y\nproperty float z\nend_header\n");
  EXPECT_TRUE(c.empty());
}

TEST(ReadCloud, PlySkipsExtraPropertiesAndElements) {
  const auto c = parse(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n"
      "property float nx\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "0 1 2 3 10 20 30\n0 4 5 6 40 50 60\n3 0 1 1\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Point3(4, 5, 6));
  EXPECT_EQ((*c.colors)[1], (Rgb{40, 50, 60}));
}

TEST(ReadCloud, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 999;
  };
  EXPECT_EQ(line_of("1 2 3\n1 2 nan\n"), 2u);
  EXPECT_EQ(line_of("1 2 3\n1 2\n"), 2u);
  EXPECT_EQ(line_of("0 0 0\n\n1 2 inf\n"), 3u);
  EXPECT_EQ(line_of("1 2 3 300 0 0\n"), 1u);
  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  EXPECT_EQ(line_of(header + "1 2 3\n"), 8u);                  // too few records: last line
  EXPECT_EQ(line_of(header + "1 2 3\n4 5 6\n7 8 9\n"), 10u);  // too many
  EXPECT_EQ(line_of(header + "1 2 3\n4 x 6\n"), 9u);
  EXPECT_THROW(parse("ply\nformat binary_little_endian 1.0\nend_header\n"), ParseError);
  EXPECT_THROW(parse("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n"),
               ParseError);
}

TEST(WriteCloud, SinglePointXyz) {
  PointCloud c;
  c.points = {{1, 2, 3}};
  EXPECT_EQ(render(c, CloudFormat::kXyz), "1.0 2.0 3.0\n");
}

TEST(WriteCloud, EmptyCloudIsValidFile) {
  for (auto f : {CloudFormat::kXyz, CloudFormat::kAsciiPly}) {
    EXPECT_TRUE(parse(render(PointCloud{}, f), f).empty());
  }
}

TEST(FormatNumber, SevenSignificantDigits) {
  EXPECT_EQ(formatNumber(1.0), "1.0");
  EXPECT_EQ(formatNumber(1.0 / 3.0), "0.3333333");
  EXPECT_EQ(formatNumber(-2.5), "-2.5");
  EXPECT_EQ(formatNumber(1e10), "1e+10");
  EXPECT_EQ(formatNumber(123456789.0), "1.234568e+08");
}

TEST(CloudRoundTrip, FuzzedCloudsBothFormats) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const bool colored = trial % 2 == 0;
    const auto c = randomCloud(rng, colored);
    for (auto f : {CloudFormat::kXyz, CloudFormat::kAsciiPly}) {
      const auto back = parse(render(c, f), f);
      ASSERT_EQ(back.size(), c.size());
      if (!c.empty()) {
        ASSERT_EQ(bool(back.colors), colored);
      }
      for (std::size_t i = 0; i < c.size(); ++i) {
        const Point3& p = c.points[i];
        for (int k = 0; k < 3; ++k) {
          EXPECT_LE(std::abs(back.points[i](k) - p(k)), 1e-6 * std::max(1.0, std::abs(p(k))));
        }
        if (colored) {
          EXPECT_EQ((*back.colors)[i], (*c.colors)[i]);
        }
      }
    }
  }
}

TEST(CloudRoundTrip, FilesDeterminedByExtension) {
  TempDir dir;
  std::mt19937_64 rng(62);
  const auto c = randomCloud(rng, true);
  for (const char* name : {"a.ply", "a.xyz", "a.txt"}) {
    saveCloud(c, dir.path / name);
    CloudFile info;
    const auto back = loadCloud(dir.path / name, &info);
    EXPECT_EQ(info.point_count, c.size());
    EXPECT_EQ(info.format, std::string(name) == "a.ply" ? CloudFormat::kAsciiPly
                                                        : CloudFormat::kXyz);
    EXPECT_EQ(back.size(), c.size());
  }
}

TEST(SaveCloud, UnwritablePathThrows) {
  EXPECT_THROW(saveCloud(PointCloud{}, "/nonexistent-dir/x.xyz"), WriteError);
}

TEST(TaggedPly, CarriesSourceProperty) {
  TempDir dir;
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 1, 1}};
  c.colors = std::vector<Rgb>{{1, 2, 3}, {4, 5, 6}};
  const std::vector<SourceTag> tags{SourceTag::kVision, SourceTag::kLaser};
  saveTaggedPly(c, tags, dir.path / "fused.ply");
  std::ifstream in(dir.path / "fused.ply");
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(text.find("property uchar source"), std::string::npos);
  const auto back = loadCloud(dir.path / "fused.ply");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ((*back.colors)[1], (Rgb{4, 5, 6}));
  EXPECT_THROW(saveTaggedPly(c, std::vector<SourceTag>{SourceTag::kLaser}, dir.path / "bad.ply"),
               InputError);
}

// Mutations of valid files; the parsers must either succeed or raise a
// ParseError, never anything else.
std::string mutate(std::string text, std::mt19937_64& rng) {
  static const char* const tokens[] = {"nan", "inf", "-inf", "1e999", "-", "+", "0x10",
                                       "ply", "end_header", "element vertex 5",
                                       "property float x", "255 255", "\t", "\r",
                                       "#", "1,2,3", "..", "e5", "18446744073709551616",
                                       "element vertex -1", "format ascii 1.0"};
  std::uniform_int_distribution<int> kind(0, 6);
  const int steps = 1 + int(rng() % 3);
  for (int s = 0; s < steps; ++s) {
    if (text.empty()) text = " ";
    const std::size_t pos = rng() % text.size();
    switch (kind(rng)) {
      case 0:
        text[pos] = char(rng() % 256);
        break;
      case 1:
        text.erase(pos, 1 + rng() % 8);
        break;
      case 2:
        text.insert(pos, std::string(" ") + tokens[rng() % std::size(tokens)] + " ");
        break;
      case 3:
        text.resize(pos);
        break;
      case 4: {
        const auto nl = text.find('\n', pos);
        const auto start = text.rfind('\n', pos);
        const std::size_t a = start == std::string::npos ? 0 : start + 1;
        const std::size_t b = nl == std::string::npos ? text.size() : nl + 1;
        text.insert(b, text.substr(a, b - a));  // duplicate a line
        break;
      }
      case 5:
        text.insert(pos, "\n");
        break;
      default:
        text.insert(pos, std::string(1 + rng() % 4, char('0' + rng() % 10)));
    }
  }
  return text;
}

TEST(Parsers, SurviveFuzzCorpus) {
  std::mt19937_64 rng(63);
  PointCloud colored;
  colored.points = {{1, 2, 3}, {-4.5, 0.25, 1e-3}, {7, 8, 9}};
  colored.colors = std::vector<Rgb>{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  PointCloud bare = colored;
  bare.colors.reset();
  std::ostringstream traj, xform;
  Trajectory t;
  for (int i = 0; i < 3; ++i) t.append({double(i), test::randomTransform(rng)});
  writeTrajectory(traj, t);
  writeTransform(xform, test::randomTransform(rng));
  const std::vector<std::string> seeds{
      render(colored, CloudFormat::kAsciiPly), render(bare, CloudFormat::kAsciiPly),
      render(colored, CloudFormat::kXyz), render(bare, CloudFormat::kXyz)};

  int accepted = 0, rejected = 0, other = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::string input = mutate(seeds[c % seeds.size()], rng);
    try {
      parse(input);
      ++accepted;
    } catch (const ParseError&) {
      ++rejected;
    } catch (...) {
      ++other;
      ADD_FAILURE() << "unexpected exception for input:\n" << input;
    }
  }
  EXPECT_EQ(other, 0);
  EXPECT_GT(rejected, 500);
  EXPECT_GT(accepted, 0);

  for (int c = 0; c < 300; ++c) {
    const bool is_traj = c % 2 == 0;
    std::istringstream in(mutate(is_traj ? traj.str() : xform.str(), rng));
    try {
      if (is_traj) {
        readTrajectory(in);
      } else {
        readTransform(in);
      }
    } catch (const ParseError&) {
    } catch (const std::exception& e) {
      ADD_FAILURE() << "unexpected exception: " << e.what();
    }
  }
}

// ---- trajectories and transforms -------------------------------------------

TEST(TrajectoryFile, RoundTrip) {
  std::mt19937_64 rng(64);
  Trajectory t;
  for (int i = 0; i < 20; ++i) t.append({0.1 * i, test::randomTransform(rng)});
  std::stringstream s;
  writeTrajectory(s, t);
  const auto back = readTrajectory(s);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(back[i].timestamp, t[i].timestamp, 1e-6);
    EXPECT_LT((back[i].transform.translation - t[i].transform.translation).norm(), 1e-5);
    EXPECT_LT(rotationDistance(back[i].transform.rotation, t[i].transform.rotation), 1e-6);
  }
}

TEST(TrajectoryFile, ParsesCommentsAndRejectsDisorder) {
  std::istringstream ok("# t x y z qx qy qz qw\n0 1 2 3 0 0 0 1\n1 1 2 3 0 0 0 2\n");
  const auto t = readTrajectory(ok);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_LT((t[1].transform.rotation - Mat3::Identity()).norm(), 1e-12);  // normalized
  std::istringstream bad("1 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n");
  EXPECT_THROW(readTrajectory(bad), ParseError);
  std::istringstream zero_q("0 0 0 0 0 0 0 0\n");
  EXPECT_THROW(readTrajectory(zero_q), ParseError);
}

TEST(TransformFile, RoundTripAndFormat) {
  std::stringstream s;
  writeTransform(s, RigidTransform::identity());
  EXPECT_EQ(s.str(), "1.0 0.0 0.0 0.0\n0.0 1.0 0.0 0.0\n0.0 0.0 1.0 0.0\n0.0 0.0 0.0 1.0\n");
  std::mt19937_64 rng(65);
  const auto t = test::randomTransform(rng);
  std::stringstream r;
  writeTransform(r, t);
  const auto back = readTransform(r);
  EXPECT_LT(rotationDistance(back.rotation, t.rotation), 1e-6);
  EXPECT_LT((back.translation - t.translation).norm(), 1e-5);
  std::istringstream bad("1 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  EXPECT_THROW(readTransform(bad), ParseError);
}

TEST(SegmentFile, OneLinePerSegment) {
  const auto s = test::segmentOf(test::gridRect(2, 1.0, 0, 0, 1, 1, 0.5), {0, 0, 5});
  std::ostringstream out;
  writeSegments(out, std::vector<PlanarSegment>{s, s});
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    double v;
    int n = 0;
    while (fields >> v) ++n;
    EXPECT_EQ(n, 12);
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(ParseNumberList, CommaSeparated) {
  EXPECT_EQ(parseNumberList("1,2.5,-3"), (std::vector<double>{1, 2.5, -3}));
  EXPECT_THROW(parseNumberList("1,,2"), ParseError);
  EXPECT_THROW(parseNumberList("1,x"), ParseError);
}

// ---- configuration ---------------------------------------------------------

Config configFrom(const std::string& text) {
  std::istringstream in(text);
  return readConfig(in);
}

TEST(ConfigFile, AbsentFileGivesDefaults) {
  const Config c = loadConfig(std::nullopt);
  EXPECT_EQ(c.cell_search.alpha, CellSearchParams{}.alpha);
  EXPECT_EQ(c.filter.voxel_leaf, FilterParams{}.voxel_leaf);
}

TEST(ConfigFile, SetsAlpha) {
  EXPECT_EQ(configFrom("alpha = 0.4\n").cell_search.alpha, 0.4);
  EXPECT_EQ(configFrom("[cell_search]\nalpha = 0.4 # comment\n").cell_search.alpha, 0.4);
}

TEST(ConfigFile, InvalidValueNamesKey) {
  try {
    configFrom("voxel_leaf = -1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "voxel_leaf");
  }
}

TEST(ConfigFile, UnknownKeysAreListed) {
  try {
    configFrom("alpha = 0.4\nfoo = 1\nbar = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bar"), std::string::npos);
  }
}

TEST(ConfigFile, KeyInWrongSectionIsRejected) {
  EXPECT_THROW(configFrom("[segmentation]\nalpha = 0.4\n"), ConfigError);
  EXPECT_THROW(configFrom("[nowhere]\n"), ConfigError);
  EXPECT_THROW(configFrom("min_inliers = 2.5\n"), ConfigError);
}

TEST(ConfigFile, WriteReadRoundTrip) {
  Config c;
  c.cell_search.beta = 2.25;
  c.segmentation.min_inliers = 77;
  c.match.angle_tol = 0.123456789;
  std::stringstream s;
  writeConfig(s, c);
  const Config back = readConfig(s);
  EXPECT_EQ(back.cell_search.beta, 2.25);
  EXPECT_EQ(back.segmentation.min_inliers, 77u);
  EXPECT_NEAR(back.match.angle_tol, 0.123456789, 1e-7);
}

TEST(ConfigFile, LoadsFromDisk) {
  TempDir dir;
  std::ofstream(dir.path / "c.conf") << "beta = 3\n";
  EXPECT_EQ(loadConfig(dir.path / "c.conf").cell_search.beta, 3.0);
  EXPECT_EQ(loadConfig(dir.path / "missing.conf").cell_search.beta, CellSearchParams{}.beta);
}

}  // namespace
}  // namespace planereg
