#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cappa::harness {

/// Version string compiled into the library.
std::string_view library_version();

/// Operating system, architecture and compiler of the running binary.
std::string host_description();

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

struct RunRecord {
  std::string label;  ///< e.g. "cappa/init=2" or "trial=17/pds"
  std::uint64_t seed = 0;
  std::uint64_t wall_clock_ns = 0;
  bool diverged = false;
};

/// What was run and how. The hash covers the experiment name, the config
/// snapshot, the library version, the constants report and every run's label
/// and seed. Wall-clock times, divergence flags and the host are recorded but
/// not hashed, so identical manifests hash identically across machines and
/// reruns.
struct RunManifest {
  std::string experiment;
  std::string config;  ///< canonical INI snapshot without output_dir, loadable with --config
  std::string output_dir;  ///< where the files went; recorded, not hashed
  std::string version;
  std::string constants;
  std::vector<RunRecord> runs;
  std::string host;

  std::string hash() const;
  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace cappa::harness
