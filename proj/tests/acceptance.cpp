// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids
// (1 .. 8) to run a subset; the exit status is nonzero if any line fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rvmc/chainsim.hpp"
#include "rvmc/cli.hpp"
#include "rvmc/entropy.hpp"
#include "rvmc/optim.hpp"
#include "rvmc/oracles.hpp"
#include "test_support.hpp"

using namespace rvmc;

namespace {

int failures = 0;

void report(const std::string& id, const std::string& title, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << id << ' ' << title << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

constexpr std::int64_t kFinalSites = 100000;
constexpr std::int64_t kOptSites = 10000;
constexpr std::int64_t kBurnIn = 1000;

SweepConfig finalSweep(int n, int window_extra = 0) {
  SweepConfig s;
  s.n = n;
  s.num_sites = kFinalSites;
  s.burn_in = kBurnIn;
  s.window_extra = window_extra;
  return s;
}

// Continuation to n_max at reduced sampling, then a full sweep per depth.
struct Ladder {
  std::vector<OptResult> stages;
  std::vector<SweepResult> sweeps;
};

Ladder optimizeLadder(ModelKind kind, const IsingSpec& spec, int n_max) {
  ObjectiveSpec os;
  os.kind = kind;
  os.spec = spec;
  os.config.num_sites = kOptSites;
  os.config.burn_in = kBurnIn;
  os.real_only = kind != ModelKind::classical;
  Ladder ladder;
  ladder.stages = continuationSchedule(os, n_max);
  for (const OptResult& r : ladder.stages) {
    if (r.error) throw Error("optimization failed at n=" + std::to_string(r.n) + ": " + *r.error);
    ladder.sweeps.push_back(runSweep(ConditionalModel{kind, r.n, r.params}, spec, finalSweep(r.n)));
  }
  return ladder;
}

void classicalExactness() {
  Stopwatch clock;
  const IsingSpec spec{IsingFamily::classical_field, 0.5, 3.0};
  const Ladder ladder = optimizeLadder(ModelKind::classical, spec, 1);
  const SweepResult& r = ladder.sweeps.back();
  const double exact = classicalTransferMatrix(0.5, 3.0).free_energy;
  const double tol = std::max(3.0 * r.stderr_free_energy, 1e-3);
  const double gap = std::abs(r.free_energy - exact);
  const double elapsed = clock.seconds();
  report("1", "classical exactness", gap <= tol && elapsed < 60.0,
         "F=" + num(r.free_energy, 10) + " exact=" + num(exact, 10) + " |dF|=" + num(gap, 3) + " tol=" + num(tol, 3) +
             " time=" + num(elapsed, 3) + "s");
}

void lineSearchConvergence() {
  const double alpha = 0.5;
  const double temperature = 3.0;
  const IsingSpec spec{IsingFamily::classical_field, alpha, temperature};
  const std::vector<double> mf = meanFieldClassicalModel(alpha, temperature).params;
  const std::vector<double> ex = exactClassicalConditionals(alpha, temperature).params;
  const std::vector<std::int64_t> counts{100, 1000, 10000, 100000};
  constexpr int kPoints = 21;
  constexpr int kSeeds = 8;

  // Pointwise spread: the range of F(x) over independent seeds, worst x.
  std::vector<double> spread;
  bool endpoints_ok = true;
  std::string endpoint_detail;
  for (std::int64_t samples : counts) {
    double worst = 0.0;
    for (int i = 0; i < kPoints; ++i) {
      const double x = static_cast<double>(i) / (kPoints - 1);
      std::vector<double> p(mf.size());
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = (1.0 - x) * mf[k] + x * ex[k];
      double lo = 1e300;
      double hi = -1e300;
      for (int seed = 0; seed < kSeeds; ++seed) {
        SweepConfig sc;
        sc.n = 1;
        sc.num_sites = kBurnIn + samples;
        sc.burn_in = kBurnIn;
        sc.seed = static_cast<std::uint64_t>(seed);
        const double f = runSweep(ConditionalModel{ModelKind::classical, 1, p}, spec, sc).free_energy;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
      }
      worst = std::max(worst, hi - lo);
    }
    spread.push_back(worst);

    if (samples >= 1000) {
      int wins = 0;
      for (int seed = 0; seed < kSeeds; ++seed) {
        SweepConfig sc;
        sc.n = 1;
        sc.num_sites = kBurnIn + samples;
        sc.burn_in = kBurnIn;
        sc.seed = static_cast<std::uint64_t>(seed);
        const double f0 = runSweep(ConditionalModel{ModelKind::classical, 1, mf}, spec, sc).free_energy;
        const double f1 = runSweep(ConditionalModel{ModelKind::classical, 1, ex}, spec, sc).free_energy;
        if (f1 < f0) ++wins;
      }
      if (wins < kSeeds) endpoints_ok = false;
      endpoint_detail += " " + std::to_string(samples) + ":" + std::to_string(wins) + "/" + std::to_string(kSeeds);
    }
  }
  bool decreasing = true;
  std::string spread_detail;
  for (std::size_t i = 0; i < spread.size(); ++i) {
    if (i > 0 && !(spread[i] < spread[i - 1])) decreasing = false;
    spread_detail += (i ? "," : "") + num(spread[i], 3);
  }
  report("2", "line-search convergence", decreasing && endpoints_ok,
         "spread over " + std::to_string(kSeeds) + " seeds [" + spread_detail + "] F(1)<F(0) seeds" + endpoint_detail);
}

void pureAccuracy() {
  Stopwatch clock;
  const std::vector<double> alphas{0.5, 1.0, 1.15, 2.0};
  double worst_n3 = 0.0;
  double worst_mf = 0.0;
  double worst_second = 0.0;
  std::string n3_detail;
  std::string mf_detail;
  for (double alpha : alphas) {
    const IsingSpec spec{IsingFamily::transverse_field, alpha, 0.0};
    const double exact = tfimExact(alpha, 0.0);
    const Ladder ladder = optimizeLadder(ModelKind::pure, spec, 3);
    const double e3 = std::abs(ladder.sweeps[3].free_energy - exact) / (1.0 + alpha);
    const double e0 = std::abs(ladder.sweeps[0].free_energy - exact) / (1.0 + alpha);
    const double e2 = std::abs(secondOrderReference(alpha, 0.0) - exact) / (1.0 + alpha);
    worst_n3 = std::max(worst_n3, e3);
    worst_mf = std::max(worst_mf, e0);
    worst_second = std::max(worst_second, e2);
    n3_detail += " " + num(alpha, 3) + ":" + num(100 * e3, 3) + "%";
    mf_detail += " " + num(alpha, 3) + ":" + num(100 * e0, 3) + "%";
  }
  const double elapsed = clock.seconds();
  report("3a", "pure-state accuracy at n=3", worst_n3 <= 3e-3 && elapsed <= 7200.0,
         "error per scale" + n3_detail + " (limit 0.3%) time=" + num(elapsed, 4) + "s");
  report("3b", "mean-field error reaches several percent", worst_mf >= 0.03,
         "n=0 error per scale" + mf_detail + " (max must be >= 3%)");
  report("3c", "second-order error stays below about 1%", worst_second <= 0.0125,
         "max second-order error per scale " + num(100 * worst_second, 3) + "% (limit 1.25%)");
}

void mixedAccuracy() {
  const double alpha = 1.15;
  const std::vector<double> temperatures{0.25, 0.5, 1.0, 2.0, 4.0};
  bool deep_ok = true;
  bool monotone_ok = true;
  bool hot_ok = true;
  std::string deep_detail;
  std::string monotone_detail;
  std::string hot_detail;
  for (double t : temperatures) {
    const IsingSpec spec{IsingFamily::transverse_field, alpha, t};
    const double exact = tfimExact(alpha, t);
    const Ladder ladder = optimizeLadder(ModelKind::mixed, spec, 3);
    std::vector<double> err;
    for (const SweepResult& r : ladder.sweeps) err.push_back((r.free_energy - exact) / (1.0 + alpha));
    const double e3 = std::abs(err[3]);
    if (e3 > 5e-3) deep_ok = false;
    deep_detail += " T=" + num(t, 3) + ":" + num(100 * e3, 3) + "%";
    monotone_detail += " T=" + num(t, 3) + ":";
    for (std::size_t n = 0; n < err.size(); ++n) {
      monotone_detail += (n ? "," : "") + num(100 * err[n], 3);
      if (n == 0) continue;
      const double se = std::hypot(ladder.sweeps[n].stderr_free_energy, ladder.sweeps[n - 1].stderr_free_energy) /
                        (1.0 + alpha);
      if (err[n] > err[n - 1] + 3.0 * se) monotone_ok = false;
    }
    monotone_detail += "%";
    if (t == 4.0) {
      for (std::size_t n = 0; n < err.size(); ++n) {
        if (std::abs(err[n]) > 1e-2) hot_ok = false;
        hot_detail += (n ? "," : "") + num(100 * err[n], 3);
      }
    }
  }
  report("4a", "mixed-state accuracy at n=3", deep_ok, "error per scale" + deep_detail + " (limit 0.5%)");
  report("4b", "mixed-state errors decrease in n", monotone_ok, "errors by n" + monotone_detail);
  report("4c", "all depths within 1% at T=4", hot_ok, "errors by n [" + hot_detail + "]%");
}

void boundValidity() {
  Stopwatch clock;
  std::mt19937_64 rng(2024);
  int checked = 0;
  int bound_violations = 0;
  int production_violations = 0;
  int sandwich_violations = 0;
  double classical_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = trial % 3;
    const ModelKind kind = trial % 3 == 0 ? ModelKind::classical : trial % 3 == 1 ? ModelKind::pure : ModelKind::mixed;
    const auto op = buildReconstruction(testing::randomModel(rng, kind, n));
    const auto sigma = kind == ModelKind::classical ? testing::randomDiagonal(rng, n)
                                                    : testing::randomDensity(rng, n, 1 + trial % 4);
    const auto rho = applyReconstruction(op, sigma);
    const double exact = testing::entropyByEigen(rho.matrix());
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      const double bound = entropyBoundDephased(rho, op, sigma, SpinSet::fromMask(mask));
      ++checked;
      if (bound > exact + 1e-8) ++bound_violations;
      if (kind == ModelKind::classical) classical_gap = std::max(classical_gap, std::abs(bound - exact));
    }
    if (stepEntropyProduction(sigma, rho) < -1e-8) ++production_violations;
    if (kind != ModelKind::classical) {
      const auto full_rank = testing::randomDensity(rng, n);
      const auto d = errorChannelDistortion(op, full_rank, SpinSet::fromMask(static_cast<std::uint32_t>(trial) % (1u << n)));
      if (d.sandwich[1] > d.sandwich[0] + 1e-8 || d.sandwich[2] > d.sandwich[1] + 1e-8) ++sandwich_violations;
    }
  }
  const double elapsed = clock.seconds();
  const bool pass = bound_violations == 0 && production_violations == 0 && sandwich_violations == 0 &&
                    classical_gap <= 1e-10 && elapsed < 60.0;
  report("5", "entropy-bound validity", pass,
         std::to_string(checked) + " bounds, violations " + std::to_string(bound_violations) + ", negative production " +
             std::to_string(production_violations) + ", sandwich violations " + std::to_string(sandwich_violations) +
             ", classical gap " + num(classical_gap, 3) + " time=" + num(elapsed, 3) + "s");
}

void tightness() {
  const IsingSpec spec{IsingFamily::transverse_field, 1.15, 1.0};
  const Ladder ladder = optimizeLadder(ModelKind::mixed, spec, 2);
  const ConditionalModel model{ModelKind::mixed, 2, ladder.stages[2].params};
  const SweepResult& base = ladder.sweeps[2];
  const SweepResult wide = runSweep(model, spec, finalSweep(2, 1));
  const double change = wide.mean_entropy - base.mean_entropy;
  const double se = std::hypot(base.stderr_entropy, wide.stderr_entropy);
  report("6", "tightness diagnostic", std::abs(change) < 3.0 * se,
         "S(extra=0)=" + num(base.mean_entropy, 8) + " S(extra=1)=" + num(wide.mean_entropy, 8) +
             " change=" + num(change, 3) + " 3*stderr=" + num(3.0 * se, 3));
}

void oracleIntegrity() {
  Stopwatch clock;
  const double closed = tfimExact(1.0, 0.0) + 4.0 / std::numbers::pi;
  double ed2 = 0.0;
  for (double alpha : {0.0, 0.5, 1.0, 1.15, 2.0}) {
    const double e = 2.0 * exactDiagonalization(2, IsingSpec{IsingFamily::transverse_field, alpha, 0.0}, Boundary::open);
    ed2 = std::max(ed2, std::abs(e + std::sqrt(1.0 + 4.0 * alpha * alpha)));
  }
  bool decreasing = true;
  std::string detail;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const IsingSpec spec{IsingFamily::transverse_field, 1.0, t};
    const double exact = tfimExact(1.0, t);
    double previous = 1e300;
    detail += " T=" + num(t, 3) + ":";
    for (int l : {8, 10, 12}) {
      const double err = std::abs(exactDiagonalization(l, spec, Boundary::periodic) - exact);
      if (!(err < previous)) decreasing = false;
      detail += (l == 8 ? "" : ",") + num(err, 3);
      previous = err;
    }
  }
  const double elapsed = clock.seconds();
  report("7", "oracle integrity", std::abs(closed) <= 1e-8 && ed2 <= 1e-10 && decreasing && elapsed < 60.0,
         "tfimExact(1,0)+4/pi=" + num(closed, 3) + " L=2 ED gap=" + num(ed2, 3) + " ED errors L=8,10,12" + detail +
             " time=" + num(elapsed, 3) + "s");
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const std::filesystem::path root =
      std::filesystem::temp_directory_path() / ("rvmc-acceptance-" + std::to_string(::getpid()));
  const std::map<std::string, std::string> configs{
      {"oracle", "command = oracle\nalpha = 0.5, 1, 1.15, 2\nT = 0, 1\n"},
      {"linesearch", "command = linesearch\nalpha = 0.5\nT = 3\nsamples = 100, 1000\npoints = 5\n"},
      {"classical", "command = classical\nalpha = 0.5, 1\nT = 3\nn = 0, 1\nnum_sites = 4000\nburn_in = 500\n"
                    "opt_sites = 2000\nmax_iters = 5\n"},
      {"pure", "command = pure\nalpha = 0.5, 2\nT = 0\nn = 0, 1\nnum_sites = 3000\nburn_in = 500\n"
               "opt_sites = 1500\nmax_iters = 3\n"},
      {"mixed", "command = mixed\nalpha = 1.15\nT = 1, 4\nn = 0, 1\nnum_sites = 3000\nburn_in = 500\n"
                "opt_sites = 1500\nmax_iters = 3\n"},
      {"diagnose", "command = diagnose\nalpha = 1.15\nT = 1, 2\nn = 0, 1\nnum_sites = 3000\nburn_in = 500\n"
                   "opt_sites = 1500\nmax_iters = 3\n"},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [name, text] : configs) {
    std::vector<std::string> runs;
    for (int workers : {1, 1, 3}) {
      ExperimentConfig cfg = parseConfigText(text);
      cfg.workers = workers;
      cfg.output = root / (name + "-" + std::to_string(runs.size()));
      std::ostringstream log;
      const int code = runExperiment(cfg, log);
      std::string bytes = slurp(cfg.output / (name + ".csv"));
      if (std::filesystem::exists(cfg.output / (name + "_trace.csv"))) bytes += slurp(cfg.output / (name + "_trace.csv"));
      if (code != kExitOk) {
        pass = false;
        detail += " " + name + ":exit" + std::to_string(code);
      }
      runs.push_back(bytes);
    }
    const bool same = runs[0] == runs[1] && runs[1] == runs[2] && !runs[0].empty();
    if (!same) pass = false;
    detail += " " + name + (same ? ":identical" : ":differs");
  }
  std::filesystem::remove_all(root);
  report("8", "determinism", pass, "reruns with workers 1,1,3" + detail);
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<void()>> criteria{
      {"1", classicalExactness}, {"2", lineSearchConvergence}, {"3", pureAccuracy}, {"4", mixedAccuracy},
      {"5", boundValidity},      {"6", tightness},             {"7", oracleIntegrity}, {"8", determinism},
  };
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i) selected.emplace_back(argv[i]);
  if (selected.empty()) {
    for (const auto& entry : criteria) selected.push_back(entry.first);
  }
  for (const std::string& id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    try {
      it->second();
    } catch (const std::exception& e) {
      report(id, "error", false, e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
