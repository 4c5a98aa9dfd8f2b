#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lockstack {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// Splits one CSV line on commas (no quoting, fields are numeric or identifiers).
std::vector<std::string_view> split_csv(std::string_view line);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

/// Trims trailing '\r' and surrounding blanks.
std::string_view trim(std::string_view s);

/// Records what produced a set of output files. The hash covers command,
/// resolved configuration, seed and version but not the timestamps, so reruns
/// of the same configuration stamp their files identically.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t root_seed = 0;
  std::string version;
  std::string started;
  std::string finished;

  [[nodiscard]] std::string hash() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

inline constexpr std::string_view kVersion = "0.3.0";

/// UTC timestamp in ISO 8601.
std::string utc_timestamp();

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// "# manifest: <hash>" comment line for CSV outputs.
std::string csv_manifest_comment(const RunManifest& manifest);

}  // namespace lockstack
