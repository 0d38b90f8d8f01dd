#include "rvmc/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rvmc {

namespace {

// ln(2 cosh y) without overflow.
double logTwoCosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a));
}

double logLambdaMax(double alpha, double temperature) {
  const double x = std::abs(alpha) / temperature;
  const double e = std::exp(-2.0 * x);
  const double c = 0.5 * (1.0 + e);
  const double s = 0.5 * (1.0 - e);
  return 1.0 / temperature + x + std::log(c + std::sqrt(s * s + std::exp(-4.0 / temperature - 2.0 * x)));
}

double transferFreeEnergy(double alpha, double temperature) {
  return -temperature * logLambdaMax(alpha, temperature);
}

// Composite Simpson on [0, pi].
template <class F>
double simpsonHalfPeriod(F&& f, int panels) {
  const double h = std::numbers::pi / panels;
  double acc = f(0.0) + f(std::numbers::pi);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return acc * h / 3.0;
}

constexpr int kSimpsonPanels = 1 << 14;

double meanFieldObjective(double alpha, double temperature, double p) {
  const double m = 1.0 - 2.0 * p;
  double entropy_term = 0.0;
  if (p > 0.0) entropy_term += p * std::log(p);
  if (p < 1.0) entropy_term += (1.0 - p) * std::log(1.0 - p);
  return alpha * m - m * m + temperature * entropy_term;
}

double logSumExp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

ThermoValues classicalTransferMatrix(double alpha, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("transfer matrix needs T > 0");
  const double h = 1e-5 * temperature;
  const double f = transferFreeEnergy(alpha, temperature);
  const double entropy =
      -(transferFreeEnergy(alpha, temperature + h) - transferFreeEnergy(alpha, temperature - h)) / (2.0 * h);
  return {f, entropy};
}

ConditionalModel exactClassicalConditionals(double alpha, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("exact conditionals need T > 0");
  // log T(s, s') = (s s' - alpha (s + s') / 2) / T with s = 1 - 2 i.
  Eigen::Matrix2d log_t;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double si = 1 - 2 * i;
      const double sj = 1 - 2 * j;
      log_t(i, j) = (si * sj - 0.5 * alpha * (si + sj)) / temperature;
    }
  }
  const Eigen::Matrix2d scaled = (log_t.array() - log_t.maxCoeff()).exp().matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scaled);
  Eigen::Vector2d v = es.eigenvectors().col(1).cwiseAbs();
  // P(i|j) = T(j,i) v_i / (lambda v_j); softmax drops the j-only factors.
  ConditionalModel model{ModelKind::classical, 1, std::vector<double>(4)};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double log_v = std::log(std::max(v[i], std::numeric_limits<double>::min()));
      model.params[static_cast<std::size_t>(2 * i + j)] = log_t(j, i) + log_v;
    }
  }
  return model;
}

MeanFieldSolution meanFieldSolve(double alpha, double temperature, int grid_points) {
  if (!(temperature >= 0.0)) throw ValidationError("mean-field solve needs T >= 0");
  if (grid_points < 3) throw ValidationError("mean-field grid needs at least 3 points");
  auto f = [&](double p) { return meanFieldObjective(alpha, temperature, p); };
  const double step = 1.0 / (grid_points - 1);
  int best = 0;
  double best_value = f(0.0);
  for (int i = 1; i < grid_points; ++i) {
    const double v = f(i * step);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1) * step);
  double hi = std::min(1.0, (best + 1) * step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  double p = 0.5 * (lo + hi);
  // Values are flat to roundoff within ~1e-8 of the minimum, so polish with
  // Newton steps on F'(p) = -2 alpha + 4 m + T ln(p / (1 - p)).
  const double bracket_lo = std::max(0.0, (best - 1) * step);
  const double bracket_hi = std::min(1.0, (best + 1) * step);
  for (int it = 0; it < 50 && temperature > 0.0 && p > 0.0 && p < 1.0; ++it) {
    const double m = 1.0 - 2.0 * p;
    const double d1 = -2.0 * alpha + 4.0 * m + temperature * std::log(p / (1.0 - p));
    const double d2 = -8.0 + temperature / (p * (1.0 - p));
    if (!(d2 > 0.0)) break;
    const double next = p - d1 / d2;
    if (!(next > bracket_lo && next < bracket_hi)) break;
    const bool done = std::abs(next - p) < 1e-15;
    p = next;
    if (done) break;
  }
  double value = f(p);
  // The bracket may end within 1e-10 of an endpoint minimum.
  for (double edge : {0.0, 1.0}) {
    if (std::abs(edge - p) <= 1e-9 && f(edge) <= value) {
      p = edge;
      value = f(edge);
    }
  }
  return {p, value};
}

ConditionalModel meanFieldClassicalModel(double alpha, double temperature) {
  const MeanFieldSolution mf = meanFieldSolve(alpha, temperature);
  const double p1 = std::clamp(mf.p_star, 1e-12, 1.0 - 1e-12);
  const double l0 = std::log(1.0 - p1);
  const double l1 = std::log(p1);
  return {ModelKind::classical, 1, {l0, l0, l1, l1}};
}

double tfimExact(double alpha, double temperature) {
  if (!(alpha >= 0.0)) throw ValidationError("tfimExact needs alpha >= 0");
  if (!(temperature >= 0.0)) throw ValidationError("tfimExact needs T >= 0");
  auto half_gap = [alpha](double k) { return std::sqrt(1.0 + alpha * alpha - 2.0 * alpha * std::cos(k)); };
  if (temperature == 0.0) {
    return -simpsonHalfPeriod(half_gap, kSimpsonPanels) / std::numbers::pi;
  }
  auto integrand = [&](double k) { return logTwoCosh(half_gap(k) / temperature); };
  return -temperature * simpsonHalfPeriod(integrand, kSimpsonPanels) / std::numbers::pi;
}

double secondOrderReference(double alpha, double temperature) {
  if (!(temperature >= 0.0)) throw ValidationError("second-order reference needs T >= 0");
  if (temperature == 0.0) {
    return alpha < 1.0 ? -1.0 - alpha * alpha / 4.0 : -alpha - 1.0 / (4.0 * alpha);
  }
  if (!(alpha > 0.0)) throw ValidationError("thermal second-order reference needs alpha > 0");
  const double x = alpha / temperature;
  const double e = std::exp(-2.0 * x);
  const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
  const double tanh_x = (1.0 - e) / (1.0 + e);
  // (2 alpha + T sinh(2x)) / (8 alpha T cosh^2 x), split to avoid overflow.
  const double correction = sech2 / (4.0 * temperature) + tanh_x / (4.0 * alpha);
  return -temperature * logTwoCosh(x) - correction;
}

double exactDiagonalization(int sites, const IsingSpec& spec, Boundary boundary) {
  spec.validate();
  if (sites > 14) throw SizeError("exact diagonalization is limited to 14 sites");
  if (sites < 1) throw ValidationError("chain needs at least one site");
  if (boundary == Boundary::periodic && sites < 3) {
    throw ValidationError("periodic chains need at least 3 sites");
  }
  const int bonds = boundary == Boundary::periodic ? sites : sites - 1;
  const std::uint32_t dim = 1u << sites;
  auto bond_mask = [sites](int b) { return (1u << b) | (1u << ((b + 1) % sites)); };

  Eigen::VectorXd energies(dim);
  if (spec.family == IsingFamily::classical_field) {
    for (std::uint32_t s = 0; s < dim; ++s) {
      double e = spec.alpha * (sites - 2 * std::popcount(s));
      for (int b = 0; b < bonds; ++b) e -= (std::popcount(s & bond_mask(b)) & 1) ? -1.0 : 1.0;
      energies[s] = e;
    }
  } else {
    // In the X eigenbasis: H = alpha sum Z - sum X X, which conserves the
    // parity of the bit count. Diagonalize the two parity blocks separately.
    Eigen::Index filled = 0;
    for (int parity = 0; parity < 2; ++parity) {
      std::vector<std::uint32_t> states;
      for (std::uint32_t s = 0; s < dim; ++s) {
        if ((std::popcount(s) & 1) == parity) states.push_back(s);
      }
      const auto block = static_cast<Eigen::Index>(states.size());
      std::vector<Eigen::Index> position(dim, -1);
      for (Eigen::Index i = 0; i < block; ++i) position[states[static_cast<std::size_t>(i)]] = i;
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(block, block);
      for (Eigen::Index i = 0; i < block; ++i) {
        const std::uint32_t s = states[static_cast<std::size_t>(i)];
        h(i, i) = spec.alpha * (sites - 2 * std::popcount(s));
        for (int b = 0; b < bonds; ++b) h(position[s ^ bond_mask(b)], i) -= 1.0;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
      energies.segment(filled, block) = es.eigenvalues();
      filled += block;
    }
  }

  if (spec.temperature == 0.0) return energies.minCoeff() / sites;
  return -spec.temperature * logSumExp(-energies / spec.temperature) / sites;
}

}  // namespace rvmc
