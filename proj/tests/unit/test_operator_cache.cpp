#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "seqpm/operator_cache.hpp"

using namespace seqpm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("seqpm-cache-test-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

OperatorCache::Options disk(const fs::path& dir, std::vector<std::string>* warnings,
                            double verify = 0.0) {
  OperatorCache::Options o;
  o.directory = dir;
  o.verify_probability = verify;
  o.warn = [warnings](const std::string& w) { warnings->push_back(w); };
  return o;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("disk cache returns bit-identical operators") {
  TempDir dir;
  auto grid = make_grid(64, 2.0);
  std::vector<std::string> warnings;
  const auto fresh = UlamOperator::build(MapParameter(0.15), grid);
  {
    OperatorCache cache(grid, disk(dir.path, &warnings));
    CHECK(*cache.get(MapParameter(0.15)) == fresh);
    CHECK(cache.stats().builds == 1);
    CHECK(cache.get(MapParameter(0.15)) == cache.get(MapParameter(0.15)));
    CHECK(cache.stats().memory_hits == 2);
  }
  CHECK(fs::exists(dir.path / ulam_file::file_name(0.15, *grid)));
  {
    OperatorCache cache(grid, disk(dir.path, &warnings, 1.0));
    CHECK(*cache.get(MapParameter(0.15)) == fresh);
    CHECK(cache.stats().disk_hits == 1);
    // Verification rebuilds once and compares.
    CHECK(cache.stats().builds == 1);
    CHECK(cache.stats().verifications == 1);
  }
  CHECK(warnings.empty());
}

TEST_CASE("corrupted cache file is rebuilt with a warning") {
  TempDir dir;
  auto grid = make_grid(64, 2.0);
  std::vector<std::string> warnings;
  { OperatorCache(grid, disk(dir.path, &warnings)).get(MapParameter(0.1)); }
  const auto file = dir.path / ulam_file::file_name(0.1, *grid);
  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(fs::file_size(file) - 3));
    f.put('\x7f');
  }
  OperatorCache cache(grid, disk(dir.path, &warnings));
  CHECK(*cache.get(MapParameter(0.1)) == UlamOperator::build(MapParameter(0.1), grid));
  CHECK(cache.stats().disk_rebuilds == 1);
  REQUIRE(warnings.size() == 1);
  // The rewritten file is good again.
  OperatorCache again(grid, disk(dir.path, &warnings));
  again.get(MapParameter(0.1));
  CHECK(again.stats().disk_hits == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("truncated file and wrong grid are rejected by the reader") {
  TempDir dir;
  auto grid = make_grid(32, 2.0);
  const auto path = dir.path / "op.bin";
  ulam_file::write(path, UlamOperator::build(MapParameter(0.2), grid));
  CHECK_THROWS(ulam_file::read(path, make_grid(32, 3.0)));
  fs::resize_file(path, fs::file_size(path) / 2);
  CHECK_THROWS(ulam_file::read(path, grid));
}

TEST_CASE("memory LRU evicts beyond capacity") {
  auto grid = make_grid(32, 2.0);
  OperatorCache::Options o;
  o.memory_capacity = 2;
  OperatorCache cache(grid, o);
  cache.get(MapParameter(0.1));
  cache.get(MapParameter(0.2));
  cache.get(MapParameter(0.3));
  cache.get(MapParameter(0.1));  // evicted, rebuilt
  CHECK(cache.stats().builds == 4);
  cache.get(MapParameter(0.3));
  CHECK(cache.stats().memory_hits == 1);
}

TEST_CASE("cache directory from the environment") {
  ::setenv(kCacheDirEnv, "/tmp/seqpm-env-dir", 1);
  CHECK(OperatorCache::options_from_environment().directory == fs::path("/tmp/seqpm-env-dir"));
  ::unsetenv(kCacheDirEnv);
  CHECK_FALSE(OperatorCache::options_from_environment().directory.has_value());
}
