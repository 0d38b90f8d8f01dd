#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "rvmc/decomp.hpp"
#include "rvmc/ising.hpp"

namespace rvmc {

/// Counter-based uniform stream: the SplitMix64 output function evaluated at
/// position `counter` of the stream keyed by `seed`. Values in [0, 1).
double counterUniform(std::uint64_t seed, std::int64_t counter);

struct SweepConfig {
  int n = 0;
  std::int64_t num_sites = 100000;
  std::int64_t burn_in = 1000;
  std::uint64_t seed = 0;
  /// Extra undephased spins kept in the window before measuring out.
  int window_extra = 0;
  bool keep_trace = false;

  void validate() const;
};

struct SiteRecord {
  std::int64_t site;
  int outcome;
  double energy;
  double entropy;
};

struct SweepResult {
  double mean_energy = 0.0;
  double mean_entropy = 0.0;
  double free_energy = 0.0;
  double stderr_free_energy = 0.0;
  double stderr_energy = 0.0;
  double stderr_entropy = 0.0;
  std::int64_t samples = 0;
  /// Outcome measured at each step, one entry per site.
  std::vector<std::uint8_t> outcomes;
  /// ln of the probability of each measured outcome, one entry per site.
  std::vector<double> log_probabilities;
  /// energy - T * entropy of each site, one entry per site.
  std::vector<double> site_free_energies;
  std::vector<SiteRecord> per_site;
};

struct OutcomeRecord {
  std::vector<std::uint8_t> outcomes;
};

/// Window state carried between sites.
struct ChainState {
  std::variant<DensityMatrix, PureStateVector> window;
  /// <Z> of the last measured spin before its measurement; the bond partner
  /// when the extended window holds a single spin (depth 0). The cold start
  /// uses +1, a predecessor in state 0.
  double previous_z = 1.0;
};

/// How the oldest spin is measured out: inverse CDF on `uniform`, or forced.
struct MeasureRule {
  double uniform = 0.0;
  std::optional<int> forced;
};

struct SiteStep {
  ChainState state;
  int outcome;
  double probability;
  double energy;
  double entropy;
};

/// Thrown when a sampled or forced branch has (near) zero probability.
class SamplerDegeneracy : public DegenerateError {
 public:
  SamplerDegeneracy(std::int64_t site, const std::string& what);
  std::int64_t site() const { return site_; }

 private:
  std::int64_t site_;
};

/// All-zeros window of `spins` spins in the representation used for `kind`.
ChainState coldStart(ModelKind kind, int spins);

/// One extend -> estimate -> measure-out cycle.
SiteStep stepSite(const ChainState& state, const ReconstructionOp& op, const IsingSpec& spec,
                  const MeasureRule& rule);

/// Samples `config.num_sites` sites from the cold start and averages the
/// site estimators over sites >= burn_in. Deterministic in its inputs.
SweepResult runSweep(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config);

OutcomeRecord freezeOutcomes(const SweepResult& result);

/// Re-runs a sweep with every measurement forced to the recorded outcome.
SweepResult replaySweep(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config,
                        const OutcomeRecord& record);

/// CSV with columns site,outcome,site_energy,site_entropy.
void writeSiteTrace(std::ostream& os, const SweepResult& result);

}  // namespace rvmc
