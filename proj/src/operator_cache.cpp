#include "seqpm/operator_cache.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "seqpm/random.hpp"

namespace seqpm {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace ulam_file {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'P', 'M', 'U', 'L', 'M'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

template <typename T>
T get(const char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b)
    bits |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<T>(bits);
}

constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8 + 8 + 8 + 8;

}  // namespace

std::string cache_key(double beta, const GradedGrid& grid) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "beta=%.12f;", beta);
  return std::string(buf) + grid.spec();
}

std::string file_name(double beta, const GradedGrid& grid) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "ulam-%016" PRIx64 ".bin", fnv1a64(cache_key(beta, grid)));
  return buf;
}

void write(const std::filesystem::path& path, const UlamOperator& op) {
  const std::size_t n = op.size();
  std::string payload;
  payload.reserve(n * n * 8);
  for (double v : op.to_dense()) put(payload, v);

  std::string header(kMagic, sizeof kMagic);
  put(header, kVersion);
  put(header, std::uint32_t{0});
  put(header, op.beta().beta());
  put(header, static_cast<std::uint64_t>(n));
  put(header, op.grid().grading());
  put(header, fnv1a64(payload));

  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write operator cache file " + tmp);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("short write to operator cache file " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

UlamOperator read(const std::filesystem::path& path, GridPtr grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open operator cache file " + path.string());
  std::string header(kHeaderBytes, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  if (!in || std::memcmp(header.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("operator cache file has a bad header: " + path.string());
  const char* p = header.data() + 8;
  const auto version = get<std::uint32_t>(p);
  const auto beta = get<double>(p + 8);
  const auto n = get<std::uint64_t>(p + 16);
  const auto rho = get<double>(p + 24);
  const auto checksum = get<std::uint64_t>(p + 32);
  if (version != kVersion) throw std::runtime_error("operator cache file version mismatch");
  if (n != grid->cells() || rho != grid->grading())
    throw std::runtime_error("operator cache file grid mismatch");

  std::string payload(n * n * 8, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!in) throw std::runtime_error("operator cache file truncated: " + path.string());
  if (fnv1a64(payload) != checksum)
    throw std::runtime_error("operator cache file checksum mismatch: " + path.string());

  std::vector<double> dense(n * n);
  for (std::size_t e = 0; e < dense.size(); ++e) dense[e] = get<double>(payload.data() + 8 * e);
  return UlamOperator::from_dense(MapParameter(beta), std::move(grid), dense);
}

}  // namespace ulam_file

// ---------------------------------------------------------------------------

OperatorCache::OperatorCache(GridPtr grid, Options options, Parallelism par)
    : grid_(std::move(grid)), options_(std::move(options)), par_(par) {
  if (options_.memory_capacity == 0) options_.memory_capacity = 1;
}

OperatorCache::OperatorCache(GridPtr grid, Parallelism par)
    : OperatorCache(std::move(grid), Options{}, par) {}

OperatorCache::Options OperatorCache::options_from_environment() {
  Options o;
  if (const char* dir = std::getenv(kCacheDirEnv); dir != nullptr && *dir != '\0')
    o.directory = std::filesystem::path(dir);
  return o;
}

void OperatorCache::warn(const std::string& message) const {
  if (options_.warn) {
    options_.warn(message);
  } else {
    std::cerr << "seqpm: warning: " << message << '\n';
  }
}

std::shared_ptr<const UlamOperator> OperatorCache::get(MapParameter beta) {
  const double b = beta.beta();
  for (auto it = lru_.begin(); it != lru_.end(); ++it) {
    if (it->first == b) {
      ++stats_.memory_hits;
      lru_.splice(lru_.begin(), lru_, it);
      return lru_.front().second;
    }
  }
  auto op = load_or_build(beta);
  lru_.emplace_front(b, op);
  if (lru_.size() > options_.memory_capacity) lru_.pop_back();
  return op;
}

std::shared_ptr<const UlamOperator> OperatorCache::load_or_build(MapParameter beta) {
  ++lookups_;
  auto fresh = [&] {
    ++stats_.builds;
    return std::make_shared<const UlamOperator>(UlamOperator::build(beta, grid_, par_));
  };
  if (!options_.directory) return fresh();

  const auto path = *options_.directory / ulam_file::file_name(beta.beta(), *grid_);
  if (std::filesystem::exists(path)) {
    try {
      auto cached = std::make_shared<const UlamOperator>(ulam_file::read(path, grid_));
      if (cached->beta() == beta) {
        const double u = counter_uniform(derive_key(options_.seed, 0x76657269ULL), lookups_);
        if (u < options_.verify_probability) {
          ++stats_.verifications;
          auto built = fresh();
          if (!(*built == *cached)) {
            warn("cached Ulam operator differs from a fresh build; rewriting " + path.string());
            ++stats_.disk_rebuilds;
            ulam_file::write(path, *built);
            return built;
          }
        }
        ++stats_.disk_hits;
        return cached;
      }
    } catch (const std::exception& e) {
      warn(std::string(e.what()) + "; rebuilding");
      ++stats_.disk_rebuilds;
    }
  }
  auto built = fresh();
  try {
    ulam_file::write(path, *built);
  } catch (const std::exception& e) {
    warn(e.what());
  }
  return built;
}

}  // namespace seqpm
