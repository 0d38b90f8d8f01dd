#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rvmc/ising.hpp"

namespace rvmc {

enum class Command { classical, pure, mixed, oracle, linesearch, diagnose };

std::string_view toString(Command command);

/// Config file problem; the message names the offending line or keys.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ExperimentConfig {
  Command command = Command::oracle;
  std::vector<double> alphas;
  std::vector<double> temperatures;
  std::vector<int> depths{0};
  std::uint64_t seed = 0;
  std::int64_t num_sites = 100000;
  std::int64_t burn_in = 1000;
  double risk = 0.0;
  std::filesystem::path output = ".";
  int workers = 1;
  /// Sites per objective evaluation while optimizing.
  std::int64_t opt_sites = 10000;
  int max_iters = 200;
  /// Likelihood-ratio window of the gradient; 0 gives plain fixed-outcome
  /// derivatives.
  int score_lag = 16;
  /// Optimize only the real parts of amplitudes (the Hamiltonians are real).
  bool real_params = true;
  /// Post-burn-in sample counts for the line-search table.
  std::vector<std::int64_t> samples{100, 1000, 10000, 100000};
  /// Number of x points on [0, 1] for the line-search table.
  int points = 21;
  /// Family used by the oracle command.
  IsingFamily family = IsingFamily::transverse_field;

  void validate() const;
};

/// Parses `key = value` lines. '#' starts a comment; lists are comma separated.
ExperimentConfig parseConfigText(std::string_view text);
ExperimentConfig parseConfig(const std::filesystem::path& path);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs the configured command and writes `<output>/<command>.csv` (plus a
/// trace CSV for optimizing commands). Returns kExitOk or kExitRuntime;
/// diagnostics go to `log`.
int runExperiment(const ExperimentConfig& config, std::ostream& log);

/// Entry point of the robust-vmc executable.
int runCli(int argc, char** argv);

}  // namespace rvmc
