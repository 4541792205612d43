#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "seqpm/ulam.hpp"

namespace seqpm {

/// Binary cache file layout (little-endian):
///   char[8]  magic "SEQPMULM"
///   u32      format version
///   u32      reserved (0)
///   f64      beta
///   u64      N
///   f64      grading rho
///   u64      FNV-1a 64 checksum of the payload bytes
///   f64[N*N] row-major dense matrix
namespace ulam_file {

inline constexpr std::uint32_t kVersion = 1;

/// Content key: beta printed to 12 decimals plus the grid spec.
std::string cache_key(double beta, const GradedGrid& grid);
std::string file_name(double beta, const GradedGrid& grid);

void write(const std::filesystem::path& path, const UlamOperator& op);

/// Throws std::runtime_error on malformed, truncated or checksum-failing files.
UlamOperator read(const std::filesystem::path& path, GridPtr grid);

}  // namespace ulam_file

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Environment variable that overrides the on-disk cache directory.
inline constexpr const char* kCacheDirEnv = "SEQPM_CACHE_DIR";

/// Supplies Ulam operators by exponent: a bounded in-memory LRU in front of an
/// optional on-disk cache. Disk hits are bit-identical to fresh builds; a hit
/// that fails its checksum (or a spot-check) is rebuilt and rewritten.
class OperatorCache {
 public:
  struct Options {
    std::optional<std::filesystem::path> directory;
    std::size_t memory_capacity{16};
    /// Probability that a disk hit is compared against a fresh build.
    double verify_probability{0.05};
    std::uint64_t seed{0};
    std::function<void(const std::string&)> warn;
  };

  struct Stats {
    std::size_t builds{0};
    std::size_t memory_hits{0};
    std::size_t disk_hits{0};
    std::size_t disk_rebuilds{0};
    std::size_t verifications{0};
  };

  OperatorCache(GridPtr grid, Options options, Parallelism par = {});
  explicit OperatorCache(GridPtr grid, Parallelism par = {});

  /// Options with the directory taken from SEQPM_CACHE_DIR when set.
  static Options options_from_environment();

  std::shared_ptr<const UlamOperator> get(MapParameter beta);

  const GridPtr& grid() const noexcept { return grid_; }
  const Stats& stats() const noexcept { return stats_; }
  const Options& options() const noexcept { return options_; }

 private:
  std::shared_ptr<const UlamOperator> load_or_build(MapParameter beta);
  void warn(const std::string& message) const;

  GridPtr grid_;
  Options options_;
  Parallelism par_;
  Stats stats_;
  std::uint64_t lookups_{0};
  std::list<std::pair<double, std::shared_ptr<const UlamOperator>>> lru_;
};

}  // namespace seqpm
