#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "planereg/params.hpp"

namespace planereg {

/// Parameter sets of every module.
///
/// File format: `key = value` lines, `#` comments, optional `[section]`
/// headers (preprocessing, segmentation, registration, icp, cell_search,
/// metascan, localization). Keys are unique across sections; a key inside a
/// section must belong to it. Angles are in radians.
struct Config {
  FilterParams filter;
  SegmentationParams segmentation;
  MatchParams match;
  IcpParams icp;
  CellSearchParams cell_search;
  MetascanParams metascan;
  LocalizationParams localization;

  // Throws ConfigError naming the first key that breaks an invariant.
  void validate() const;
};

/// Missing path (nullopt) gives the defaults. Unknown keys raise a
/// ConfigError listing all of them; invalid values raise a ConfigError
/// naming the key.
Config loadConfig(const std::optional<std::filesystem::path>& path);
Config readConfig(std::istream& in);
void writeConfig(std::ostream& out, const Config& config);

}  // namespace planereg
