#include "rvmc/chainsim.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "rvmc/entropy.hpp"

namespace rvmc {

namespace {

constexpr int kBatches = 100;

std::uint64_t splitmixFinalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Site estimators with the energy terms cached per window size.
class SiteKernel {
 public:
  SiteKernel(const ReconstructionOp& op, const IsingSpec& spec) : op_(op), spec_(spec) {
    if (op.kind() == ModelKind::classical) {
      step_entropy_.resize(static_cast<std::size_t>(op.contextDim()));
      for (int k = 0; k < op.contextDim(); ++k) step_entropy_[static_cast<std::size_t>(k)] = classicalStepEntropy(op, k);
    }
  }

  SiteStep step(const ChainState& state, const MeasureRule& rule) {
    return std::visit([&](const auto& window) { return stepWindow(window, state.previous_z, rule); }, state.window);
  }

 private:
  const std::vector<LocalTerm>& termsFor(int spins) {
    if (cached_spins_ != spins) {
      terms_ = oldestSiteTerms(spec_, spins);
      single_z_ = PauliString::on(spins, {{0, Pauli::Z}});
      cached_spins_ = spins;
    }
    return terms_;
  }

  // Energy of the oldest spin. `z_oldest` receives its <Z> before measurement.
  template <class State>
  double energyOf(const State& extended, double previous_z, double& z_oldest) {
    const int spins = extended.numSpins();
    double e = 0.0;
    for (const LocalTerm& t : termsFor(spins)) e += t.coefficient * pauliExpectation(extended, t.op);
    z_oldest = 0.0;
    if (spins == 1) {
      // Depth 0 gives a product state, so the bond to the measured predecessor
      // factorizes into <Z> values and needs no sampled outcome.
      z_oldest = pauliExpectation(extended, single_z_);
      e -= previous_z * z_oldest;
    }
    return e;
  }

  static int chooseOutcome(double p0, const MeasureRule& rule, double& probability) {
    int outcome = 0;
    if (rule.forced) {
      outcome = *rule.forced;
      if (outcome != 0 && outcome != 1) throw ValidationError("forced outcome must be 0 or 1");
    } else {
      outcome = rule.uniform < p0 ? 0 : 1;
    }
    probability = outcome == 0 ? p0 : 1.0 - p0;
    if (probability < kZeroBranchTol) {
      throw DegenerateError("outcome " + std::to_string(outcome) + " has probability " + std::to_string(probability));
    }
    return outcome;
  }

  SiteStep stepWindow(const PureStateVector& window, double previous_z, const MeasureRule& rule) {
    const PureStateVector extended = extendWindow(op_, window);
    double z_oldest = 0.0;
    const double energy = energyOf(extended, previous_z, z_oldest);
    double probability = 0.0;
    const int outcome = chooseOutcome(outcomeProbability(extended, 0, 0), rule, probability);
    PureMeasurementBranch branch = conditionOnOutcome(extended, 0, outcome);
    return {ChainState{std::move(branch.reduced), z_oldest}, outcome, probability, energy, 0.0};
  }

  SiteStep stepWindow(const DensityMatrix& window, double previous_z, const MeasureRule& rule) {
    const DensityMatrix extended = extendWindow(op_, window);
    double z_oldest = 0.0;
    const double energy = energyOf(extended, previous_z, z_oldest);
    double entropy = 0.0;
    if (op_.kind() == ModelKind::classical) {
      const int shift = window.numSpins() - op_.contextSpins();
      for (Eigen::Index i = 0; i < window.dim(); ++i) {
        entropy += window(i, i).real() * step_entropy_[static_cast<std::size_t>(i >> shift)];
      }
    } else if (op_.kind() == ModelKind::mixed) {
      entropy = stepEntropyProduction(window, extended);
    }
    double probability = 0.0;
    const int outcome = chooseOutcome(outcomeProbability(extended, 0, 0), rule, probability);
    MeasurementBranch branch = conditionOnOutcome(extended, 0, outcome);
    return {ChainState{std::move(branch.reduced), z_oldest}, outcome, probability, energy, entropy};
  }

  const ReconstructionOp& op_;
  const IsingSpec& spec_;
  std::vector<double> step_entropy_;
  int cached_spins_ = -1;
  std::vector<LocalTerm> terms_;
  PauliString single_z_;
};

void checkCompatible(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config) {
  config.validate();
  spec.validate();
  model.validate();
  if (model.depth != config.n) {
    throw ValidationError("model depth " + std::to_string(model.depth) + " differs from sweep depth " +
                          std::to_string(config.n));
  }
  if (spec.family == IsingFamily::classical_field && model.kind != ModelKind::classical) {
    throw ValidationError("the classical-field family needs a classical model");
  }
  if (spec.family == IsingFamily::transverse_field && model.kind == ModelKind::classical) {
    throw ValidationError("the transverse-field family needs a pure or mixed model");
  }
}

double batchMeansError(const std::vector<double>& values) {
  const auto total = static_cast<std::int64_t>(values.size());
  if (total < 2) return 0.0;
  const std::int64_t batches = std::min<std::int64_t>(kBatches, total);
  const std::int64_t size = total / batches;
  std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
  for (std::int64_t b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < size; ++i) acc += values[static_cast<std::size_t>(b * size + i)];
    means[static_cast<std::size_t>(b)] = acc / static_cast<double>(size);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

SweepResult sweep(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config,
                  const OutcomeRecord* record) {
  checkCompatible(model, spec, config);
  if (record && static_cast<std::int64_t>(record->outcomes.size()) != config.num_sites) {
    throw ValidationError("outcome record has " + std::to_string(record->outcomes.size()) + " entries, sweep needs " +
                          std::to_string(config.num_sites));
  }
  const ReconstructionOp op = buildReconstruction(model);
  SiteKernel kernel(op, spec);
  const int lag = config.n + config.window_extra;
  ChainState state = coldStart(model.kind, lag);

  SweepResult result;
  result.outcomes.resize(static_cast<std::size_t>(config.num_sites));
  result.log_probabilities.resize(static_cast<std::size_t>(config.num_sites));
  result.site_free_energies.resize(static_cast<std::size_t>(config.num_sites));
  const std::int64_t kept = config.num_sites - config.burn_in;
  std::vector<double> energies;
  std::vector<double> entropies;
  std::vector<double> free_energies;
  energies.reserve(static_cast<std::size_t>(kept));
  entropies.reserve(static_cast<std::size_t>(kept));
  free_energies.reserve(static_cast<std::size_t>(kept));

  for (std::int64_t t = 0; t < config.num_sites; ++t) {
    MeasureRule rule;
    if (record) {
      rule.forced = record->outcomes[static_cast<std::size_t>(t)];
    } else {
      // Keyed by the spin being measured, so window_extra does not shift the stream.
      rule.uniform = counterUniform(config.seed, t - lag);
    }
    SiteStep step = [&] {
      try {
        return kernel.step(state, rule);
      } catch (const DegenerateError& e) {
        throw SamplerDegeneracy(t, e.what());
      }
    }();
    result.outcomes[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(step.outcome);
    result.log_probabilities[static_cast<std::size_t>(t)] = std::log(step.probability);
    result.site_free_energies[static_cast<std::size_t>(t)] = step.energy - spec.temperature * step.entropy;
    if (t >= config.burn_in) {
      energies.push_back(step.energy);
      entropies.push_back(step.entropy);
      free_energies.push_back(step.energy - spec.temperature * step.entropy);
      if (config.keep_trace) result.per_site.push_back({t, step.outcome, step.energy, step.entropy});
    }
    state = std::move(step.state);
  }

  double sum_e = 0.0;
  double sum_s = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    sum_e += energies[i];
    sum_s += entropies[i];
  }
  result.samples = kept;
  result.mean_energy = sum_e / static_cast<double>(kept);
  result.mean_entropy = sum_s / static_cast<double>(kept);
  result.free_energy = result.mean_energy - spec.temperature * result.mean_entropy;
  result.stderr_free_energy = batchMeansError(free_energies);
  result.stderr_energy = batchMeansError(energies);
  result.stderr_entropy = batchMeansError(entropies);
  return result;
}

}  // namespace

double counterUniform(std::uint64_t seed, std::int64_t counter) {
  const std::uint64_t key = splitmixFinalize(seed + 0x9E3779B97F4A7C15ull);
  const std::uint64_t z = splitmixFinalize(key + (static_cast<std::uint64_t>(counter) + 1) * 0x9E3779B97F4A7C15ull);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

void SweepConfig::validate() const {
  if (n < 0) throw ValidationError("conditioning depth must be non-negative");
  if (window_extra < 0) throw ValidationError("window_extra must be non-negative");
  if (n + 1 + window_extra > kMaxSpins) {
    throw ValidationError("n + 1 + window_extra exceeds the " + std::to_string(kMaxSpins) + "-spin window limit");
  }
  if (burn_in < 0 || num_sites <= 0) throw ValidationError("num_sites must be positive and burn_in non-negative");
  if (burn_in >= num_sites) {
    throw ValidationError("burn_in (" + std::to_string(burn_in) + ") must be smaller than num_sites (" +
                          std::to_string(num_sites) + ")");
  }
}

SamplerDegeneracy::SamplerDegeneracy(std::int64_t site, const std::string& what)
    : DegenerateError("site " + std::to_string(site) + ": " + what), site_(site) {}

ChainState coldStart(ModelKind kind, int spins) {
  if (kind == ModelKind::pure) return ChainState{PureStateVector::basisState(spins, 0), 1.0};
  return ChainState{DensityMatrix::basisState(spins, 0), 1.0};
}

SiteStep stepSite(const ChainState& state, const ReconstructionOp& op, const IsingSpec& spec,
                  const MeasureRule& rule) {
  SiteKernel kernel(op, spec);
  return kernel.step(state, rule);
}

SweepResult runSweep(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config) {
  return sweep(model, spec, config, nullptr);
}

OutcomeRecord freezeOutcomes(const SweepResult& result) { return OutcomeRecord{result.outcomes}; }

SweepResult replaySweep(const ConditionalModel& model, const IsingSpec& spec, const SweepConfig& config,
                        const OutcomeRecord& record) {
  return sweep(model, spec, config, &record);
}

void writeSiteTrace(std::ostream& os, const SweepResult& result) {
  os << "site,outcome,site_energy,site_entropy\n" << std::setprecision(17);
  for (const SiteRecord& r : result.per_site) {
    os << r.site << ',' << r.outcome << ',' << r.energy << ',' << r.entropy << '\n';
  }
}

}  // namespace rvmc
