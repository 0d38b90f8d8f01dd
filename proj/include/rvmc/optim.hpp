#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rvmc/chainsim.hpp"

namespace rvmc {

/// Sampled free-energy objective: F + risk * stderr, evaluated with a fixed
/// seed so that it is a deterministic function of the parameters.
struct ObjectiveSpec {
  ModelKind kind = ModelKind::classical;
  int n = 0;
  IsingSpec spec;
  SweepConfig config;
  /// Risk multiplier kappa >= 0.
  double risk = 0.0;
  /// Freeze the imaginary parameter slots (real Hamiltonians).
  bool real_only = false;
  /// Threads for independent evaluations; results do not depend on it.
  int workers = 1;
  /// Preceding outcomes whose likelihood ratio reweights each site in
  /// fixedOutcomeGradient. 0 keeps plain fixed-outcome derivatives.
  int score_lag = 16;

  void validate() const;
  ConditionalModel model(const std::vector<double>& params) const;
  /// Parameters the optimizer may move.
  std::vector<bool> activeMask() const;
};

struct ObjectiveValue {
  double value;
  double free_energy;
  double stderr_free_energy;
};

ObjectiveValue evaluateObjective(const std::vector<double>& params, const ObjectiveSpec& spec);

struct Derivatives {
  std::vector<double> gradient;
  std::vector<double> hessian_diagonal;
};

/// Central differences of `f` along each active coordinate with step
/// h * max(1, |x_i|). Inactive coordinates get zero derivatives.
Derivatives centralDifferences(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x, double h, const std::vector<bool>& active,
                               int workers = 1);

/// Raised when a perturbed replay hits a zero-probability outcome.
class GradientDegeneracy : public DegenerateError {
 public:
  GradientDegeneracy(std::size_t coordinate, const std::string& what);
  std::size_t coordinate() const { return coordinate_; }

 private:
  std::size_t coordinate_;
};

/// Free energy of `replayed` where each kept site t is weighted by
/// prod_{s in [t-lag, t)} p'(o_s) / p(o_s), the likelihood ratio of the forced
/// outcomes it was conditioned on (p' from `replayed`, p from `reference`).
/// Self-normalized; equals replayed.free_energy when lag = 0.
double reweightedFreeEnergy(const SweepResult& reference, const SweepResult& replayed, std::int64_t burn_in,
                            int lag);

/// Derivatives of the replayed free energy at fixed measurement outcomes,
/// reweighted as in reweightedFreeEnergy with spec.score_lag.
Derivatives fixedOutcomeGradient(const std::vector<double>& params, const ObjectiveSpec& spec,
                                 const OutcomeRecord& record, double h);

struct LineSearchResult {
  double step;
  double value;
};

inline constexpr int kLineSearchCandidates = 33;

/// Scans step 0 and 33 geometric steps in [1e-4, 4] along `direction` and
/// returns the best; step 0 unless some candidate beats the start. Candidates
/// that raise DegenerateError are skipped.
LineSearchResult lineMinimize(const std::function<double(const std::vector<double>&)>& objective,
                              const std::vector<double>& params, const std::vector<double>& direction,
                              int workers = 1);

/// Candidate step lengths used by lineMinimize (without the zero step).
std::vector<double> lineSearchSteps();

struct OptimizerOptions {
  int max_iters = 200;
  double stall_tolerance = 1e-7;
  int stall_window = 5;
  double h = 1e-3;
};

struct IterationRecord {
  int iteration;
  double objective;
  double free_energy;
  double stderr_free_energy;
  double step;
  double direction_norm;
};

struct OptResult {
  std::vector<double> params;
  int n = 0;
  double objective = 0.0;
  double free_energy = 0.0;
  double stderr_free_energy = 0.0;
  int iterations = 0;
  int objective_evaluations = 0;
  std::vector<IterationRecord> trace;
  /// Set when the run stopped on an error; the other fields hold the last
  /// accepted point.
  std::optional<std::string> error;
};

OptResult minimize(const ObjectiveSpec& spec, const std::vector<double>& init, const OptimizerOptions& options = {});

/// Starting parameters used when none are supplied.
std::vector<double> defaultInitialParams(ModelKind kind, int n);

inline constexpr double kRankSeed = 0.1;

/// Starting point one level deeper than `previous`: embedModel, plus
/// `rank_seed` on the real diagonal of G for mixed models so the optimizer
/// is not confined to the rank of the shallower model.
std::vector<double> continuationStart(const ConditionalModel& previous, double rank_seed = kRankSeed);

/// Optimizes depth 0 from `init` (or the default), then embeds each optimum
/// one level deeper and re-optimizes, up to n_max. Stops at the first stage
/// that fails.
std::vector<OptResult> continuationSchedule(const ObjectiveSpec& spec, int n_max,
                                            const std::optional<std::vector<double>>& init = std::nullopt,
                                            const OptimizerOptions& options = {});

/// CSV with columns iteration,objective,free_energy,stderr,step,direction_norm.
void writeOptimizationTrace(std::ostream& os, const OptResult& result);

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallelFor(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace rvmc
