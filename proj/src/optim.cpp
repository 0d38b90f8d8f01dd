#include "rvmc/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace rvmc {

namespace {

constexpr double kMinStep = 1e-4;
constexpr double kMaxStep = 4.0;
constexpr int kMaxStepHalvings = 3;

double perturbation(double h, double x) { return h * std::max(1.0, std::abs(x)); }

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::vector<double> axpy(const std::vector<double>& x, double a, const std::vector<double>& d) {
  std::vector<double> out(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * d[i];
  return out;
}

SweepResult sweepAt(const std::vector<double>& params, const ObjectiveSpec& spec) {
  return runSweep(spec.model(params), spec.spec, spec.config);
}

ObjectiveValue valueOf(const SweepResult& r, double risk) {
  return {r.free_energy + risk * r.stderr_free_energy, r.free_energy, r.stderr_free_energy};
}

std::vector<double> preconditionedDirection(const Derivatives& d, const std::vector<bool>& active) {
  double hmax = 0.0;
  for (std::size_t i = 0; i < d.hessian_diagonal.size(); ++i) {
    if (active[i]) hmax = std::max(hmax, std::abs(d.hessian_diagonal[i]));
  }
  const double floor = 1e-2 * hmax + 1e-8;
  std::vector<double> dir(d.gradient.size(), 0.0);
  for (std::size_t i = 0; i < dir.size(); ++i) {
    if (active[i]) dir[i] = -d.gradient[i] / std::max(std::abs(d.hessian_diagonal[i]), floor);
  }
  return dir;
}

// Uniformly scaled steepest descent; the fallback when the preconditioned
// direction gives no decrease.
std::vector<double> scaledGradientDirection(const Derivatives& d, const std::vector<bool>& active) {
  double hmax = 0.0;
  for (std::size_t i = 0; i < d.hessian_diagonal.size(); ++i) {
    if (active[i]) hmax = std::max(hmax, std::abs(d.hessian_diagonal[i]));
  }
  const double scale = 1.0 / (hmax + 1e-8);
  std::vector<double> dir(d.gradient.size(), 0.0);
  for (std::size_t i = 0; i < dir.size(); ++i) {
    if (active[i]) dir[i] = -d.gradient[i] * scale;
  }
  return dir;
}

bool allFinite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void parallelFor(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Report the lowest failing index so the outcome is schedule independent.
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// ObjectiveSpec

void ObjectiveSpec::validate() const {
  if (!(risk >= 0.0)) throw ValidationError("risk multiplier must be non-negative");
  if (n != config.n) throw ValidationError("objective depth differs from the sweep depth");
  config.validate();
  spec.validate();
}

ConditionalModel ObjectiveSpec::model(const std::vector<double>& params) const {
  ConditionalModel m{kind, n, params};
  m.validate();
  return m;
}

std::vector<bool> ObjectiveSpec::activeMask() const {
  std::vector<bool> mask(ConditionalModel::parameterCount(kind, n), true);
  if (real_only) {
    for (std::size_t slot : ConditionalModel::imaginarySlots(kind, n)) mask[slot] = false;
  }
  if (kind == ModelKind::mixed) {
    // Diagonal imaginary slots of G never enter the model.
    const std::size_t d = std::size_t{2} << n;
    std::size_t idx = 0;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = r; c < d; ++c, ++idx) {
        if (r == c) mask[2 * idx + 1] = false;
      }
    }
  }
  return mask;
}

ObjectiveValue evaluateObjective(const std::vector<double>& params, const ObjectiveSpec& spec) {
  spec.validate();
  return valueOf(sweepAt(params, spec), spec.risk);
}

// ---------------------------------------------------------------------------
// Derivatives

Derivatives centralDifferences(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& x, double h, const std::vector<bool>& active,
                               int workers) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (active.size() != x.size()) throw ValidationError("active mask has the wrong length");
  const double f0 = f(x);
  const std::size_t dim = x.size();
  std::vector<double> plus(dim, f0);
  std::vector<double> minus(dim, f0);
  parallelFor(2 * dim, workers, [&](std::size_t job) {
    const std::size_t i = job / 2;
    if (!active[i]) return;
    std::vector<double> y(x);
    const double step = perturbation(h, x[i]);
    y[i] += (job % 2 == 0) ? step : -step;
    try {
      (job % 2 == 0 ? plus : minus)[i] = f(y);
    } catch (const DegenerateError& e) {
      throw GradientDegeneracy(i, e.what());
    }
  });
  Derivatives d{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (std::size_t i = 0; i < dim; ++i) {
    if (!active[i]) continue;
    const double step = perturbation(h, x[i]);
    d.gradient[i] = (plus[i] - minus[i]) / (2.0 * step);
    d.hessian_diagonal[i] = (plus[i] - 2.0 * f0 + minus[i]) / (step * step);
  }
  return d;
}

GradientDegeneracy::GradientDegeneracy(std::size_t coordinate, const std::string& what)
    : DegenerateError("coordinate " + std::to_string(coordinate) + ": " + what), coordinate_(coordinate) {}

double reweightedFreeEnergy(const SweepResult& reference, const SweepResult& replayed, std::int64_t burn_in,
                            int lag) {
  if (lag < 0) throw ValidationError("score lag must be non-negative");
  if (lag == 0) return replayed.free_energy;
  const std::size_t total = replayed.site_free_energies.size();
  if (reference.log_probabilities.size() != total || replayed.log_probabilities.size() != total) {
    throw ValidationError("reweighting needs per-site records of equal length");
  }
  const auto start = static_cast<std::size_t>(burn_in);
  std::vector<double> log_w(total - start);
  double window = 0.0;
  auto diff = [&](std::size_t s) { return replayed.log_probabilities[s] - reference.log_probabilities[s]; };
  for (std::size_t t = 0; t < total; ++t) {
    if (t >= start) log_w[t - start] = window;
    window += diff(t);
    if (t + 1 >= static_cast<std::size_t>(lag)) window -= diff(t + 1 - static_cast<std::size_t>(lag));
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double w = std::exp(log_w[i] - top);
    num += w * replayed.site_free_energies[start + i];
    den += w;
  }
  return num / den;
}

Derivatives fixedOutcomeGradient(const std::vector<double>& params, const ObjectiveSpec& spec,
                                 const OutcomeRecord& record, double h) {
  spec.validate();
  SweepResult reference;
  if (spec.score_lag > 0) reference = replaySweep(spec.model(params), spec.spec, spec.config, record);
  auto replayed = [&](const std::vector<double>& p) {
    const SweepResult r = replaySweep(spec.model(p), spec.spec, spec.config, record);
    return reweightedFreeEnergy(reference, r, spec.config.burn_in, spec.score_lag);
  };
  return centralDifferences(replayed, params, h, spec.activeMask(), spec.workers);
}

// ---------------------------------------------------------------------------
// Line search

std::vector<double> lineSearchSteps() {
  std::vector<double> steps(kLineSearchCandidates);
  const double ratio = std::log(kMaxStep / kMinStep) / (kLineSearchCandidates - 1);
  for (int i = 0; i < kLineSearchCandidates; ++i) steps[static_cast<std::size_t>(i)] = kMinStep * std::exp(ratio * i);
  steps.back() = kMaxStep;
  return steps;
}

LineSearchResult lineMinimize(const std::function<double(const std::vector<double>&)>& objective,
                              const std::vector<double>& params, const std::vector<double>& direction,
                              int workers) {
  if (direction.size() != params.size()) throw ValidationError("direction has the wrong length");
  if (!allFinite(direction) || norm2(direction) == 0.0) {
    throw ValidationError("line search direction must be finite and nonzero");
  }
  const double start = objective(params);
  const std::vector<double> steps = lineSearchSteps();
  std::vector<double> values(steps.size(), std::numeric_limits<double>::quiet_NaN());
  parallelFor(steps.size(), workers, [&](std::size_t i) {
    try {
      values[i] = objective(axpy(params, steps[i], direction));
    } catch (const DegenerateError&) {
      // Left as NaN: the candidate is skipped.
    }
  });
  LineSearchResult best{0.0, start};
  bool any = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (std::isnan(values[i])) continue;
    any = true;
    if (values[i] < best.value) best = {steps[i], values[i]};
  }
  if (!any) throw Error("line search failed: every candidate step hit a degenerate sample");
  return best;
}

// ---------------------------------------------------------------------------
// Outer loop

std::vector<double> defaultInitialParams(ModelKind kind, int n) {
  const std::size_t ctx = std::size_t{1} << n;
  std::vector<double> p(ConditionalModel::parameterCount(kind, n), 0.0);
  switch (kind) {
    case ModelKind::classical: break;
    case ModelKind::pure:
      for (std::size_t k = 0; k < ctx; ++k) {
        p[2 * k] = 1.0;
        p[2 * (ctx + k)] = -0.5;
      }
      break;
    case ModelKind::mixed: {
      const std::size_t d = 2 * ctx;
      auto slot = [d](std::size_t r, std::size_t c) { return r * d - r * (r - 1) / 2 + (c - r); };
      for (std::size_t r = 0; r < d; ++r) p[2 * slot(r, r)] = 1.0;
      for (std::size_t k = 0; k < ctx; ++k) p[2 * slot(k, ctx + k)] = -0.5;
      break;
    }
  }
  return p;
}

OptResult minimize(const ObjectiveSpec& spec, const std::vector<double>& init, const OptimizerOptions& options) {
  spec.validate();
  const std::vector<bool> active = spec.activeMask();
  auto objective = [&](const std::vector<double>& p) { return evaluateObjective(p, spec).value; };

  OptResult result;
  result.n = spec.n;
  result.params = init;
  SweepResult current = sweepAt(init, spec);
  ObjectiveValue value = valueOf(current, spec.risk);
  result.objective_evaluations = 1;
  auto record_point = [&] {
    result.objective = value.value;
    result.free_energy = value.free_energy;
    result.stderr_free_energy = value.stderr_free_energy;
  };
  record_point();
  result.trace.push_back({0, value.value, value.free_energy, value.stderr_free_energy, 0.0, 0.0});

  std::vector<double> best_history{value.value};
  const std::size_t dim = init.size();
  try {
    for (int iter = 1; iter <= options.max_iters; ++iter) {
      const OutcomeRecord record = freezeOutcomes(current);
      Derivatives derivs;
      double h = options.h;
      for (int attempt = 0;; ++attempt) {
        try {
          derivs = fixedOutcomeGradient(result.params, spec, record, h);
          result.objective_evaluations += static_cast<int>(2 * dim + 1);
          break;
        } catch (const GradientDegeneracy&) {
          if (attempt >= kMaxStepHalvings) throw;
          h *= 0.5;
        }
      }
      if (!allFinite(derivs.gradient)) throw NumericError("non-finite gradient");

      LineSearchResult ls{0.0, value.value};
      std::vector<double> direction;
      for (const auto& candidate : {preconditionedDirection(derivs, active), scaledGradientDirection(derivs, active)}) {
        if (norm2(candidate) == 0.0 || !allFinite(candidate)) continue;
        ls = lineMinimize(objective, result.params, candidate, spec.workers);
        result.objective_evaluations += kLineSearchCandidates + 1;
        direction = candidate;
        if (ls.step > 0.0) break;
      }
      result.iterations = iter;
      if (ls.step == 0.0) {
        result.trace.push_back({iter, value.value, value.free_energy, value.stderr_free_energy, 0.0,
                                direction.empty() ? 0.0 : norm2(direction)});
        break;
      }
      result.params = axpy(result.params, ls.step, direction);
      current = sweepAt(result.params, spec);
      ++result.objective_evaluations;
      value = valueOf(current, spec.risk);
      record_point();
      result.trace.push_back({iter, value.value, value.free_energy, value.stderr_free_energy, ls.step, norm2(direction)});

      best_history.push_back(value.value);
      const auto w = static_cast<std::size_t>(options.stall_window);
      if (best_history.size() > w &&
          best_history[best_history.size() - 1 - w] - best_history.back() < options.stall_tolerance) {
        break;
      }
    }
  } catch (const Error& e) {
    result.error = e.what();
  }
  return result;
}

std::vector<double> continuationStart(const ConditionalModel& previous, double rank_seed) {
  ConditionalModel next = embedModel(previous);
  if (next.kind == ModelKind::mixed && rank_seed != 0.0) {
    // The embedded Choi matrix has the rank of the shallower model, and
    // rank-raising directions of G enter G G^dagger only at second order.
    const std::size_t d = std::size_t{2} << next.depth;
    std::size_t idx = 0;
    for (std::size_t r = 0; r < d; ++r) {
      next.params[2 * idx] += rank_seed;
      idx += d - r;
    }
  }
  return next.params;
}

std::vector<OptResult> continuationSchedule(const ObjectiveSpec& spec, int n_max,
                                            const std::optional<std::vector<double>>& init,
                                            const OptimizerOptions& options) {
  if (n_max < 0) throw ValidationError("n_max must be non-negative");
  std::vector<OptResult> stages;
  ObjectiveSpec stage = spec;
  stage.n = 0;
  stage.config.n = 0;
  std::vector<double> start = init ? *init : defaultInitialParams(spec.kind, 0);
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0) {
      stage.n = n;
      stage.config.n = n;
      start = continuationStart(ConditionalModel{spec.kind, n - 1, stages.back().params});
    }
    OptResult r = minimize(stage, start, options);
    const bool failed = r.error.has_value();
    stages.push_back(std::move(r));
    if (failed) break;
  }
  return stages;
}

void writeOptimizationTrace(std::ostream& os, const OptResult& result) {
  os << "iteration,objective,free_energy,stderr,step,direction_norm\n" << std::setprecision(17);
  for (const IterationRecord& r : result.trace) {
    os << r.iteration << ',' << r.objective << ',' << r.free_energy << ',' << r.stderr_free_energy << ',' << r.step
       << ',' << r.direction_norm << '\n';
  }
}

}  // namespace rvmc
