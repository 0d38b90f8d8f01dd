#include "rvmc/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "rvmc/optim.hpp"
#include "rvmc/oracles.hpp"

namespace rvmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> splitList(const std::string& value) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    items.push_back(trim(std::string_view(value).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return items;
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const Entry& entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key, const std::string& text) const {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
      throw ConfigError("line " + std::to_string(entry(key).line) + ": '" + key + "' expects a number, got '" + text + "'");
    }
    return v;
  }

  std::int64_t integer(const std::string& key, const std::string& text) const {
    const double v = number(key, text);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
      throw ConfigError("line " + std::to_string(entry(key).line) + ": '" + key + "' expects an integer, got '" + text + "'");
    }
    return static_cast<std::int64_t>(v);
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : splitList(entry(key).value)) out.push_back(number(key, item));
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& item : splitList(entry(key).value)) out.push_back(integer(key, item));
    return out;
  }

  std::int64_t integer(const std::string& key) const { return integer(key, entry(key).value); }
  double number(const std::string& key) const { return number(key, entry(key).value); }

  bool flag(const std::string& key) const {
    const std::string& v = entry(key).value;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("line " + std::to_string(entry(key).line) + ": '" + key + "' expects true or false");
  }

 private:
  std::map<std::string, Entry> entries_;
};

const std::vector<std::string>& knownKeys() {
  static const std::vector<std::string> keys{"command", "alpha",   "T",       "n",           "seed",
                                             "num_sites", "burn_in", "kappa",  "output",      "workers",
                                             "opt_sites", "max_iters", "samples", "points",   "real_params",
                                             "family", "score_lag"};
  return keys;
}

Command parseCommand(const std::string& s, int line) {
  for (Command c : {Command::classical, Command::pure, Command::mixed, Command::oracle, Command::linesearch,
                    Command::diagnose}) {
    if (toString(c) == s) return c;
  }
  throw ConfigError("line " + std::to_string(line) + ": unknown command '" + s + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class... Ts>
std::string csvRow(const Ts&... values) {
  std::string row;
  auto add = [&row](const auto& v) {
    if (!row.empty()) row += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      row += fmt(v);
    } else if constexpr (std::is_integral_v<std::decay_t<decltype(v)>>) {
      row += std::to_string(v);
    } else {
      row += v;
    }
  };
  (add(values), ...);
  return row;
}

// Output of one grid point. Rows are kept until every point is done so the
// file order never depends on scheduling.
struct JobOutput {
  std::vector<std::string> rows;
  std::vector<std::string> trace;
  std::optional<std::string> error;
};

double transverseSecondOrder(double alpha, double temperature) {
  const double a = std::abs(alpha);
  if (temperature > 0.0 && a == 0.0) return kNaN;
  return secondOrderReference(a, temperature);
}

struct References {
  double exact;
  double second_order;
};

References referencesFor(IsingFamily family, double alpha, double temperature) {
  if (family == IsingFamily::classical_field) {
    const double exact =
        temperature > 0.0 ? classicalTransferMatrix(alpha, temperature).free_energy : -1.0 - std::abs(alpha);
    return {exact, kNaN};
  }
  return {tfimExact(std::abs(alpha), temperature), transverseSecondOrder(alpha, temperature)};
}

std::string resultRow(double alpha, double temperature, const std::string& n, double f, double err,
                      const References& ref) {
  return csvRow(alpha, temperature, n, f, err, ref.exact, ref.second_order, f - ref.exact, f - ref.second_order,
                (f - ref.exact) / (1.0 + std::abs(alpha)));
}

const char* kResultHeader =
    "alpha,T,n,free_energy,stderr,oracle_exact,oracle_2nd_order,error_vs_exact,error_vs_2nd_order,error_per_scale";
const char* kTraceHeader = "alpha,T,n,iteration,objective,free_energy,stderr,step,direction_norm";

ModelKind kindFor(Command c) {
  switch (c) {
    case Command::classical: return ModelKind::classical;
    case Command::pure: return ModelKind::pure;
    default: return ModelKind::mixed;
  }
}

IsingFamily familyFor(Command c) {
  return c == Command::classical || c == Command::linesearch ? IsingFamily::classical_field
                                                             : IsingFamily::transverse_field;
}

int maxDepth(const ExperimentConfig& cfg) { return *std::max_element(cfg.depths.begin(), cfg.depths.end()); }

SweepConfig fullSweep(const ExperimentConfig& cfg, int n, int window_extra = 0) {
  SweepConfig s;
  s.n = n;
  s.num_sites = cfg.num_sites;
  s.burn_in = cfg.burn_in;
  s.seed = cfg.seed;
  s.window_extra = window_extra;
  return s;
}

// Continuation up to the deepest requested n at reduced sampling.
std::vector<OptResult> optimizeGridPoint(const ExperimentConfig& cfg, const IsingSpec& spec, JobOutput& out) {
  ObjectiveSpec os;
  os.kind = kindFor(cfg.command);
  os.n = 0;
  os.spec = spec;
  os.config.n = 0;
  os.config.num_sites = cfg.opt_sites;
  os.config.burn_in = cfg.burn_in;
  os.config.seed = cfg.seed;
  os.risk = cfg.risk;
  os.real_only = os.kind != ModelKind::classical && cfg.real_params;
  os.score_lag = cfg.score_lag;
  OptimizerOptions options;
  options.max_iters = cfg.max_iters;
  std::vector<OptResult> stages = continuationSchedule(os, maxDepth(cfg), std::nullopt, options);
  for (const OptResult& r : stages) {
    for (const IterationRecord& it : r.trace) {
      out.trace.push_back(csvRow(spec.alpha, spec.temperature, r.n, it.iteration, it.objective, it.free_energy,
                                 it.stderr_free_energy, it.step, it.direction_norm));
    }
  }
  const OptResult& last = stages.back();
  if (last.error) throw Error("optimization failed at n=" + std::to_string(last.n) + ": " + *last.error);
  return stages;
}

JobOutput runGridPoint(const ExperimentConfig& cfg, double alpha, double temperature) {
  JobOutput out;
  const IsingSpec spec{familyFor(cfg.command), alpha, temperature};
  switch (cfg.command) {
    case Command::oracle: {
      const References ref = referencesFor(cfg.family, alpha, temperature);
      out.rows.push_back(resultRow(alpha, temperature, "nan", ref.exact, 0.0, ref));
      break;
    }
    case Command::classical:
    case Command::pure:
    case Command::mixed: {
      const References ref = referencesFor(spec.family, alpha, temperature);
      const std::vector<OptResult> stages = optimizeGridPoint(cfg, spec, out);
      for (int n : cfg.depths) {
        const ConditionalModel model{kindFor(cfg.command), n, stages[static_cast<std::size_t>(n)].params};
        const SweepResult r = runSweep(model, spec, fullSweep(cfg, n));
        out.rows.push_back(resultRow(alpha, temperature, std::to_string(n), r.free_energy, r.stderr_free_energy, ref));
      }
      break;
    }
    case Command::diagnose: {
      const std::vector<OptResult> stages = optimizeGridPoint(cfg, spec, out);
      for (int n : cfg.depths) {
        const ConditionalModel model{ModelKind::mixed, n, stages[static_cast<std::size_t>(n)].params};
        for (int extra : {0, 1}) {
          const SweepResult r = runSweep(model, spec, fullSweep(cfg, n, extra));
          out.rows.push_back(csvRow(alpha, temperature, n, extra, r.mean_entropy, r.stderr_entropy, r.free_energy,
                                    r.stderr_free_energy));
        }
      }
      break;
    }
    case Command::linesearch: {
      const std::vector<double> mf = meanFieldClassicalModel(alpha, temperature).params;
      const std::vector<double> ex = exactClassicalConditionals(alpha, temperature).params;
      for (std::int64_t samples : cfg.samples) {
        SweepConfig sc;
        sc.n = 1;
        sc.num_sites = cfg.burn_in + samples;
        sc.burn_in = cfg.burn_in;
        sc.seed = cfg.seed;
        for (int i = 0; i < cfg.points; ++i) {
          const double x = cfg.points == 1 ? 0.0 : static_cast<double>(i) / (cfg.points - 1);
          std::vector<double> p(mf.size());
          for (std::size_t k = 0; k < p.size(); ++k) p[k] = (1.0 - x) * mf[k] + x * ex[k];
          const SweepResult r = runSweep(ConditionalModel{ModelKind::classical, 1, p}, spec, sc);
          out.rows.push_back(csvRow(alpha, temperature, x, samples, r.free_energy, r.stderr_free_energy));
        }
      }
      break;
    }
  }
  return out;
}

std::string headerFor(Command c) {
  switch (c) {
    case Command::linesearch: return "alpha,T,x,samples,free_energy,stderr";
    case Command::diagnose: return "alpha,T,n,window_extra,mean_entropy,stderr_entropy,free_energy,stderr";
    default: return kResultHeader;
  }
}

bool optimizes(Command c) { return c != Command::oracle && c != Command::linesearch; }

std::string footer(const std::string& message) {
  std::string clean = message;
  for (char& ch : clean) {
    if (ch == ',' || ch == '\n') ch = ';';
  }
  return "TRUNCATED," + clean;
}

}  // namespace

std::string_view toString(Command command) {
  switch (command) {
    case Command::classical: return "classical";
    case Command::pure: return "pure";
    case Command::mixed: return "mixed";
    case Command::oracle: return "oracle";
    case Command::linesearch: return "linesearch";
    case Command::diagnose: return "diagnose";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (alphas.empty()) throw ConfigError("'alpha' grid is empty");
  if (temperatures.empty()) throw ConfigError("'T' grid is empty");
  if (depths.empty()) throw ConfigError("'n' list is empty");
  for (double a : alphas) {
    if (!std::isfinite(a)) throw ConfigError("'alpha' values must be finite");
  }
  for (double t : temperatures) {
    if (!std::isfinite(t) || t < 0.0) throw ConfigError("'T' values must be finite and non-negative");
    if (command == Command::pure && t != 0.0) throw ConfigError("'T' must be 0 for the pure command");
    if (command == Command::linesearch && t <= 0.0) throw ConfigError("'T' must be positive for linesearch");
  }
  const int extra = command == Command::diagnose ? 1 : 0;
  for (int n : depths) {
    if (n < 0 || n + 1 + extra > kMaxSpins) {
      throw ConfigError("'n' values must lie in [0, " + std::to_string(kMaxSpins - 1 - extra) + "]");
    }
  }
  if (burn_in < 0) throw ConfigError("'burn_in' must be non-negative");
  if (burn_in >= num_sites) {
    throw ConfigError("burn_in (" + std::to_string(burn_in) + ") must be smaller than num_sites (" +
                      std::to_string(num_sites) + ")");
  }
  if (optimizes(command) && burn_in >= opt_sites) {
    throw ConfigError("burn_in (" + std::to_string(burn_in) + ") must be smaller than opt_sites (" +
                      std::to_string(opt_sites) + ")");
  }
  if (!(risk >= 0.0)) throw ConfigError("'kappa' must be non-negative");
  if (workers < 1) throw ConfigError("'workers' must be at least 1");
  if (max_iters < 0) throw ConfigError("'max_iters' must be non-negative");
  if (score_lag < 0) throw ConfigError("'score_lag' must be non-negative");
  if (points < 1) throw ConfigError("'points' must be at least 1");
  if (samples.empty()) throw ConfigError("'samples' list is empty");
  for (std::int64_t s : samples) {
    if (s < 1) throw ConfigError("'samples' values must be positive");
  }
  if (output.empty()) throw ConfigError("'output' must not be empty");
}

ExperimentConfig parseConfigText(std::string_view text) {
  std::map<std::string, Entry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (std::find(knownKeys().begin(), knownKeys().end(), key) == knownKeys().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' has no value");
    if (const auto it = entries.find(key); it != entries.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(it->second.line) + ")");
    }
    entries.emplace(key, Entry{value, line_no});
  }

  const Reader in(std::move(entries));
  ExperimentConfig cfg;
  cfg.command = parseCommand(in.entry("command").value, in.entry("command").line);
  cfg.alphas = in.numbers("alpha");
  cfg.temperatures = in.numbers("T");
  if (in.has("n")) {
    cfg.depths.clear();
    for (std::int64_t n : in.integers("n")) {
      if (n < 0 || n > kMaxSpins) throw ConfigError("line " + std::to_string(in.entry("n").line) + ": 'n' out of range");
      cfg.depths.push_back(static_cast<int>(n));
    }
  }
  if (in.has("seed")) {
    const std::int64_t seed = in.integer("seed");
    if (seed < 0) throw ConfigError("line " + std::to_string(in.entry("seed").line) + ": 'seed' must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  if (in.has("num_sites")) cfg.num_sites = in.integer("num_sites");
  if (in.has("burn_in")) cfg.burn_in = in.integer("burn_in");
  if (in.has("kappa")) cfg.risk = in.number("kappa");
  if (in.has("output")) cfg.output = in.entry("output").value;
  if (in.has("workers")) cfg.workers = static_cast<int>(in.integer("workers"));
  if (in.has("opt_sites")) cfg.opt_sites = in.integer("opt_sites");
  if (in.has("max_iters")) cfg.max_iters = static_cast<int>(in.integer("max_iters"));
  if (in.has("score_lag")) cfg.score_lag = static_cast<int>(in.integer("score_lag"));
  if (in.has("samples")) cfg.samples = in.integers("samples");
  if (in.has("points")) cfg.points = static_cast<int>(in.integer("points"));
  if (in.has("real_params")) cfg.real_params = in.flag("real_params");
  if (in.has("family")) {
    const Entry& e = in.entry("family");
    if (e.value == "classical_field") {
      cfg.family = IsingFamily::classical_field;
    } else if (e.value == "transverse_field") {
      cfg.family = IsingFamily::transverse_field;
    } else {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown family '" + e.value + "'");
    }
  }
  return cfg;
}

ExperimentConfig parseConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parseConfigText(buffer.str());
}

int runExperiment(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  std::filesystem::create_directories(config.output);

  std::vector<std::pair<double, double>> grid;
  for (double a : config.alphas) {
    for (double t : config.temperatures) grid.emplace_back(a, t);
  }
  std::vector<JobOutput> outputs(grid.size());
  parallelFor(grid.size(), config.workers, [&](std::size_t i) {
    try {
      outputs[i] = runGridPoint(config, grid[i].first, grid[i].second);
    } catch (const std::exception& e) {
      outputs[i].error = e.what();
    }
  });

  const std::string name(toString(config.command));
  std::ofstream csv(config.output / (name + ".csv"));
  std::ofstream trace;
  if (optimizes(config.command)) {
    trace.open(config.output / (name + "_trace.csv"));
    trace << kTraceHeader << '\n';
  }
  csv << headerFor(config.command) << '\n';
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    for (const std::string& row : outputs[i].trace) trace << row << '\n';
    if (outputs[i].error) {
      csv << footer(*outputs[i].error) << '\n';
      log << "error at alpha=" << fmt(grid[i].first) << " T=" << fmt(grid[i].second) << ": " << *outputs[i].error
          << '\n';
      return kExitRuntime;
    }
    for (const std::string& row : outputs[i].rows) csv << row << '\n';
  }
  if (!csv) {
    log << "error: could not write " << (config.output / (name + ".csv")).string() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int runCli(int argc, char** argv) {
  CLI::App app{"Variational free energies of Ising chains from sequentially prepared states"};
  std::string config_path;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> sites;
  std::optional<int> workers;
  app.add_option("config", config_path, "experiment config file")->required();
  app.add_option("--output", output, "output directory");
  app.add_option("--seed", seed, "sampling seed");
  app.add_option("--sites", sites, "sites per final sweep");
  app.add_option("--workers", workers, "worker threads");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  ExperimentConfig cfg;
  try {
    cfg = parseConfig(config_path);
    if (output) cfg.output = *output;
    if (seed) cfg.seed = *seed;
    if (sites) cfg.num_sites = *sites;
    if (workers) cfg.workers = *workers;
    cfg.validate();
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    return runExperiment(cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace rvmc
