#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqpm/observable.hpp"
#include "seqpm/pm_map.hpp"

namespace seqpm {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { density_scan, cone, decay, martingale, variance, clt, asip, nearby, quenched };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);
std::vector<std::string> experiment_kind_names();

struct ScheduleSpec {
  std::string kind{"constant"};  // constant | list | nearby | iid
  double beta{0.1};
  std::vector<double> betas;
  double beta0{0.1};
  double epsilon{0.0};
  std::vector<double> alphabet;
  std::vector<double> probabilities;
  std::uint64_t seed{0};
  /// alpha cap; 0 means "the largest exponent the schedule can emit".
  double alpha{0.0};
  bool operator==(const ScheduleSpec&) const = default;
};

struct ObservableSpec {
  std::string kind{"identity"};  // identity | constant | affine | piecewise
  double value{0.0};
  double slope{1.0};
  double intercept{0.0};
  std::vector<double> xs;
  std::vector<double> ys;
  /// Declared Lipschitz bound; 0 means "use the computed one".
  double lipschitz{0.0};
  bool operator==(const ObservableSpec&) const = default;
};

struct GridSpec {
  std::size_t cells{2048};
  double grading{2.0};
  bool operator==(const GridSpec&) const = default;
};

struct EnsembleConfig {
  std::size_t trajectories{100000};
  std::size_t n_max{4096};
  std::vector<std::size_t> checkpoints;  // empty: dyadic
  std::size_t blocks{100};
  bool operator==(const EnsembleConfig&) const = default;
};

struct ConeConfig {
  double a{60.0};
  std::size_t seeds{20};
  std::size_t schedules{20};
  std::size_t n_max{100};
  bool operator==(const ConeConfig&) const = default;
};

struct DecayConfig {
  double p{1.0};
  std::size_t n_max{2000};
  std::size_t fit_lo{50};
  std::size_t fit_hi{2000};
  std::size_t offset{0};
  std::string density{"power"};        // power | constant
  std::string centering{"density"};    // density | lebesgue
  double slope_tolerance{0.6};
  bool operator==(const DecayConfig&) const = default;
};

struct ScanConfig {
  std::size_t n_max{500};
  double floor_variation{0.10};  // relative spread of the floor over the last 100 steps
  double invariant_slope_tolerance{0.05};
  bool operator==(const ScanConfig&) const = default;
};

struct MartingaleConfig {
  std::size_t n_max{1000};
  std::vector<double> moment_r{2.0};
  double moment_increment{0.01};
  std::size_t pathwise_trajectories{100};
  std::size_t pathwise_n_max{200};
  double martingale_tolerance{1e-8};
  double pathwise_tolerance{1e-7};
  double identity_tolerance{1e-8};
  bool tail_check{true};
  double ratio_tolerance{0.01};
  double delta_band{0.10};
  bool operator==(const MartingaleConfig&) const = default;
};

struct StatisticsConfig {
  double z_band{3.0};            // Monte Carlo standard errors for the variance identity
  double centering_z{4.0};
  double closeness_fraction{0.05};
  double ks_threshold{0.05};
  double lil_delta{0.25};
  std::size_t surrogate_paths{10000};
  double gamma_low{0.85};
  double gamma_high{1.15};
  std::size_t schedules{4};  // nearby windows or quenched omega draws
  bool operator==(const StatisticsConfig&) const = default;
};

struct CacheConfig {
  std::string directory;  // empty: SEQPM_CACHE_DIR or no disk cache
  double verify_probability{0.05};
  bool operator==(const CacheConfig&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind{ExperimentKind::variance};
  std::uint64_t seed{0};
  ScheduleSpec schedule;
  ObservableSpec observable;
  GridSpec grid;
  EnsembleConfig ensemble;
  ConeConfig cone;
  DecayConfig decay;
  ScanConfig scan;
  MartingaleConfig martingale;
  StatisticsConfig statistics;
  CacheConfig cache;
  std::string output{"out"};
  bool operator==(const ExperimentConfig&) const = default;
};

/// Every syntax error and hypothesis violation found, one message each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const noexcept { return messages_; }

 private:
  std::vector<std::string> messages_;
};

/// Parses the key = value format with [section] headers. `kind_override`
/// replaces (or supplies) the top-level kind. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<ExperimentKind> kind_override = std::nullopt);

/// Default configuration for a kind, with kind-specific defaults applied.
ExperimentConfig default_config(ExperimentKind kind);

/// Hypothesis checks for the chosen experiment; empty when valid.
std::vector<std::string> validate(const ExperimentConfig& config);

/// Canonical text: every key, fixed order, exact round-trip of doubles.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

MapSchedule make_schedule(const ScheduleSpec& spec);
Observable make_observable(const ObservableSpec& spec);

}  // namespace seqpm
