#include "rvmc/decomp.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace rvmc {

namespace {

constexpr double kDegenerateNorm = 1e-12;

Eigen::Index mixedDim(int depth) { return Eigen::Index{2} << depth; }

void checkDepth(int depth) {
  if (depth < 0 || depth + 1 > kMaxSpins) {
    throw SizeError("conditioning depth " + std::to_string(depth) + " out of range");
  }
}

CMatrix choiFromTable(const Eigen::VectorXd& table) { return table.cast<Complex>().asDiagonal(); }

CMatrix choiFromAmplitudes(const CVector& psi) { return psi * psi.adjoint(); }

}  // namespace

std::string_view toString(ModelKind kind) {
  switch (kind) {
    case ModelKind::classical: return "classical";
    case ModelKind::pure: return "pure";
    case ModelKind::mixed: return "mixed";
  }
  return "unknown";
}

ModelKind parseModelKind(std::string_view text) {
  if (text == "classical") return ModelKind::classical;
  if (text == "pure") return ModelKind::pure;
  if (text == "mixed") return ModelKind::mixed;
  throw ValidationError("unknown model kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ConditionalModel

std::size_t ConditionalModel::parameterCount(ModelKind kind, int depth) {
  checkDepth(depth);
  const std::size_t ctx = std::size_t{1} << depth;
  switch (kind) {
    case ModelKind::classical: return 2 * ctx;
    case ModelKind::pure: return 4 * ctx;
    case ModelKind::mixed: {
      const auto d = static_cast<std::size_t>(mixedDim(depth));
      return d * (d + 1);
    }
  }
  return 0;
}

std::vector<std::size_t> ConditionalModel::imaginarySlots(ModelKind kind, int depth) {
  std::vector<std::size_t> slots;
  switch (kind) {
    case ModelKind::classical: break;
    case ModelKind::pure:
      for (std::size_t q = 0; q < (std::size_t{2} << depth); ++q) slots.push_back(2 * q + 1);
      break;
    case ModelKind::mixed: {
      const auto d = static_cast<std::size_t>(mixedDim(depth));
      std::size_t idx = 0;
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r; c < d; ++c, ++idx) slots.push_back(2 * idx + 1);
      }
      break;
    }
  }
  return slots;
}

void ConditionalModel::validate() const {
  const std::size_t expected = parameterCount(kind, depth);
  if (params.size() != expected) {
    throw ValidationError(std::string(toString(kind)) + " model at depth " + std::to_string(depth) +
                          " needs " + std::to_string(expected) + " parameters, got " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(params[i])) {
      throw ValidationError("parameter " + std::to_string(i) + " is not finite");
    }
  }
}

// ---------------------------------------------------------------------------
// ReconstructionOp

ReconstructionOp::ReconstructionOp(ModelKind kind, int context_spins, CMatrix choi, CVector conditional)
    : kind_(kind), context_spins_(context_spins), choi_(std::move(choi)), conditional_(std::move(conditional)) {}

ReconstructionOp ReconstructionOp::classical(int context_spins, Eigen::VectorXd table) {
  checkDepth(context_spins);
  if (table.size() != mixedDim(context_spins)) throw ValidationError("conditional table has wrong size");
  CMatrix choi = choiFromTable(table);
  ReconstructionOp op(ModelKind::classical, context_spins, std::move(choi), table.cast<Complex>());
  op.validate();
  return op;
}

ReconstructionOp ReconstructionOp::pure(int context_spins, CVector amplitudes) {
  checkDepth(context_spins);
  if (amplitudes.size() != mixedDim(context_spins)) throw ValidationError("amplitude vector has wrong size");
  CMatrix choi = choiFromAmplitudes(amplitudes);
  ReconstructionOp op(ModelKind::pure, context_spins, std::move(choi), std::move(amplitudes));
  op.validate();
  return op;
}

ReconstructionOp ReconstructionOp::mixed(int context_spins, CMatrix choi) {
  checkDepth(context_spins);
  if (choi.rows() != mixedDim(context_spins) || choi.cols() != choi.rows()) {
    throw ValidationError("reconstruction matrix has wrong shape");
  }
  ReconstructionOp op(ModelKind::mixed, context_spins, std::move(choi), CVector());
  op.validate();
  return op;
}

ReconstructionOp ReconstructionOp::asMixed() const {
  return ReconstructionOp(ModelKind::mixed, context_spins_, choi_, CVector());
}

void ReconstructionOp::validate() const {
  const Eigen::Index ctx = contextDim();
  switch (kind_) {
    case ModelKind::classical:
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double p0 = conditional_[k].real();
        const double p1 = conditional_[ctx + k].real();
        if (p0 < 0.0 || p1 < 0.0 || conditional_[k].imag() != 0.0 || conditional_[ctx + k].imag() != 0.0) {
          throw ValidationError("conditional probabilities must be real and non-negative");
        }
        if (std::abs(p0 + p1 - 1.0) > 1e-12) {
          throw ValidationError("conditional probabilities for context " + std::to_string(k) +
                                " sum to " + std::to_string(p0 + p1));
        }
      }
      return;
    case ModelKind::pure:
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double norm = std::norm(conditional_[k]) + std::norm(conditional_[ctx + k]);
        if (std::abs(norm - 1.0) > kTraceTol) {
          throw ValidationError("conditional amplitudes for context " + std::to_string(k) +
                                " have squared norm " + std::to_string(norm));
        }
      }
      return;
    case ModelKind::mixed: {
      const double asym = (choi_ - choi_.adjoint()).cwiseAbs().maxCoeff();
      if (asym > kHermitianTol) throw ValidationError("reconstruction matrix is not Hermitian");
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double t = choi_(k, k).real() + choi_(ctx + k, ctx + k).real();
        if (std::abs(t - 1.0) > kTraceTol) {
          throw ValidationError("reconstruction is not trace preserving on context " + std::to_string(k));
        }
      }
      Eigen::SelfAdjointEigenSolver<CMatrix> es(choi_, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -kPsdTol) {
        throw ValidationError("reconstruction matrix is not positive semidefinite");
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter maps

ReconstructionOp buildReconstruction(const ConditionalModel& model) {
  model.validate();
  const int n = model.depth;
  const Eigen::Index ctx = Eigen::Index{1} << n;
  const Eigen::Index d = 2 * ctx;
  const auto& f = model.params;

  switch (model.kind) {
    case ModelKind::classical: {
      Eigen::VectorXd table(d);
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double f0 = f[static_cast<std::size_t>(k)];
        const double f1 = f[static_cast<std::size_t>(ctx + k)];
        const double top = std::max(f0, f1);
        const double e0 = std::exp(f0 - top);
        const double e1 = std::exp(f1 - top);
        table[k] = e0 / (e0 + e1);
        table[ctx + k] = e1 / (e0 + e1);
      }
      return ReconstructionOp::classical(n, std::move(table));
    }
    case ModelKind::pure: {
      CVector psi(d);
      for (Eigen::Index q = 0; q < d; ++q) {
        psi[q] = Complex(f[static_cast<std::size_t>(2 * q)], f[static_cast<std::size_t>(2 * q + 1)]);
      }
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double norm = std::sqrt(std::norm(psi[k]) + std::norm(psi[ctx + k]));
        if (norm < kDegenerateNorm) {
          throw DegenerateError("pure parameters vanish for context " + std::to_string(k));
        }
        psi[k] /= norm;
        psi[ctx + k] /= norm;
      }
      return ReconstructionOp::pure(n, std::move(psi));
    }
    case ModelKind::mixed: {
      CMatrix g = CMatrix::Zero(d, d);
      std::size_t idx = 0;
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = r; c < d; ++c, ++idx) {
          g(r, c) = r == c ? Complex(f[2 * idx], 0.0) : Complex(f[2 * idx], f[2 * idx + 1]);
        }
      }
      CMatrix r0 = g * g.adjoint();
      Eigen::VectorXd scale(d);
      for (Eigen::Index k = 0; k < ctx; ++k) {
        const double s = r0(k, k).real() + r0(ctx + k, ctx + k).real();
        if (s < kDegenerateNorm) {
          throw DegenerateError("mixed parameters give vanishing trace on context " + std::to_string(k));
        }
        scale[k] = scale[ctx + k] = 1.0 / std::sqrt(s);
      }
      CMatrix choi = scale.asDiagonal() * r0 * scale.asDiagonal();
      // Exact Hermiticity after rounding.
      choi = (0.5 * (choi + choi.adjoint())).eval();
      return ReconstructionOp::mixed(n, std::move(choi));
    }
  }
  throw ValidationError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Application

DensityMatrix extendWindow(const ReconstructionOp& op, const DensityMatrix& window) {
  const int n = op.contextSpins();
  const int m = window.numSpins();
  if (m < n) {
    throw ValidationError("window on " + std::to_string(m) + " spins is smaller than the " +
                          std::to_string(n) + "-spin context");
  }
  if (m + 1 > kMaxSpins) throw SizeError("extended window exceeds the spin limit");
  const Eigen::Index wd = window.dim();
  const Eigen::Index ctx = op.contextDim();
  const int shift = m - n;
  const CMatrix& r = op.choi();
  const CMatrix& w = window.matrix();
  CMatrix out(2 * wd, 2 * wd);
  for (Eigen::Index b = 0; b < 2; ++b) {
    for (Eigen::Index c = 0; c < wd; ++c) {
      const Eigen::Index rc = b * ctx + (c >> shift);
      for (Eigen::Index a = 0; a < 2; ++a) {
        for (Eigen::Index rr = 0; rr < wd; ++rr) {
          out(a * wd + rr, b * wd + c) = r(a * ctx + (rr >> shift), rc) * w(rr, c);
        }
      }
    }
  }
  return DensityMatrix::trusted(std::move(out));
}

PureStateVector extendWindow(const ReconstructionOp& op, const PureStateVector& window) {
  if (op.kind() != ModelKind::pure) throw ValidationError("vector extension requires a pure reconstruction");
  const int n = op.contextSpins();
  const int m = window.numSpins();
  if (m < n) throw ValidationError("window is smaller than the reconstruction context");
  if (m + 1 > kMaxSpins) throw SizeError("extended window exceeds the spin limit");
  const Eigen::Index wd = window.dim();
  const Eigen::Index ctx = op.contextDim();
  const int shift = m - n;
  const CVector& psi = op.conditional();
  CVector out(2 * wd);
  for (Eigen::Index a = 0; a < 2; ++a) {
    for (Eigen::Index i = 0; i < wd; ++i) out[a * wd + i] = psi[a * ctx + (i >> shift)] * window[i];
  }
  return PureStateVector::trusted(std::move(out));
}

DensityMatrix applyReconstruction(const ReconstructionOp& op, const DensityMatrix& window) {
  if (window.numSpins() != op.contextSpins()) {
    throw ValidationError("window has " + std::to_string(window.numSpins()) + " spins, reconstruction expects " +
                          std::to_string(op.contextSpins()));
  }
  return extendWindow(op, window);
}

PureStateVector applyReconstruction(const ReconstructionOp& op, const PureStateVector& window) {
  if (window.numSpins() != op.contextSpins()) {
    throw ValidationError("window has " + std::to_string(window.numSpins()) + " spins, reconstruction expects " +
                          std::to_string(op.contextSpins()));
  }
  return extendWindow(op, window);
}

CMatrix adjointReconstruction(const ReconstructionOp& op, const CMatrix& y) {
  const Eigen::Index ctx = op.contextDim();
  if (y.rows() != 2 * ctx || y.cols() != 2 * ctx) throw ValidationError("operator has wrong shape");
  const CMatrix& r = op.choi();
  CMatrix out = CMatrix::Zero(ctx, ctx);
  for (Eigen::Index l = 0; l < ctx; ++l) {
    for (Eigen::Index k = 0; k < ctx; ++k) {
      Complex acc = 0.0;
      for (Eigen::Index a = 0; a < 2; ++a) {
        for (Eigen::Index b = 0; b < 2; ++b) {
          acc += y(a * ctx + k, b * ctx + l) * std::conj(r(a * ctx + k, b * ctx + l));
        }
      }
      out(k, l) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical decomposition and embedding

CanonicalDecomposition canonicalDecompose(const DensityMatrix& rho, int split) {
  const int m = rho.numSpins();
  if (m < 1) throw ValidationError("cannot split a zero-spin state");
  if (split != m - 1) {
    throw ValidationError("split spin " + std::to_string(split) + " must be the newest spin " +
                          std::to_string(m - 1));
  }
  const Eigen::Index ctx = rho.dim() / 2;
  Eigen::VectorXd root(ctx);
  for (Eigen::Index k = 0; k < ctx; ++k) {
    const double s = rho(k, k).real() + rho(ctx + k, ctx + k).real();
    if (s <= kDegenerateNorm) {
      throw DegenerateError("diagonal partial sum vanishes for context " + std::to_string(k));
    }
    root[k] = std::sqrt(s);
  }
  CMatrix sigma = (root * root.transpose()).cast<Complex>();
  CMatrix r(2 * ctx, 2 * ctx);
  for (Eigen::Index c = 0; c < 2 * ctx; ++c) {
    for (Eigen::Index rr = 0; rr < 2 * ctx; ++rr) {
      r(rr, c) = rho(rr, c) / (root[rr % ctx] * root[c % ctx]);
    }
  }
  return {ReconstructionOp::mixed(m - 1, std::move(r)), DensityMatrix::fromMatrix(std::move(sigma))};
}

ConditionalModel embedModel(const ConditionalModel& model) {
  model.validate();
  const int n = model.depth;
  checkDepth(n + 1);
  ConditionalModel out{model.kind, n + 1, std::vector<double>(ConditionalModel::parameterCount(model.kind, n + 1), 0.0)};
  const std::size_t ctx = std::size_t{1} << n;

  switch (model.kind) {
    case ModelKind::classical:
    case ModelKind::pure: {
      const std::size_t width = model.kind == ModelKind::pure ? 2 : 1;
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t k = 0; k < ctx; ++k) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t src = a * ctx + k;
            const std::size_t dst = a * 2 * ctx + 2 * k + b;
            for (std::size_t w = 0; w < width; ++w) out.params[width * dst + w] = model.params[width * src + w];
          }
        }
      }
      return out;
    }
    case ModelKind::mixed: {
      // G' = G (x) [[0, 1], [0, 1]] stays upper triangular and gives
      // R' = R (x) J: every entry replicated over the added context bit.
      const std::size_t d = 2 * ctx;
      const std::size_t d2 = 2 * d;
      auto slot = [](std::size_t dim, std::size_t r, std::size_t c) {
        return r * dim - r * (r - 1) / 2 + (c - r);
      };
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r; c < d; ++c) {
          const std::size_t src = slot(d, r, c);
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t dst = slot(d2, 2 * r + b, 2 * c + 1);
            out.params[2 * dst] = model.params[2 * src];
            out.params[2 * dst + 1] = r == c ? 0.0 : model.params[2 * src + 1];
          }
        }
      }
      return out;
    }
  }
  throw ValidationError("unknown model kind");
}

// ---------------------------------------------------------------------------
// IO

void writeModel(std::ostream& os, const ConditionalModel& model) {
  model.validate();
  os << toString(model.kind) << '\n' << model.depth << '\n' << model.params.size() << '\n';
  os << std::setprecision(17);
  for (double p : model.params) os << p << '\n';
}

ConditionalModel readModel(std::istream& is) {
  std::string kind_text;
  int depth = -1;
  std::size_t count = 0;
  if (!(is >> kind_text >> depth >> count)) throw ValidationError("malformed model header");
  ConditionalModel model{parseModelKind(kind_text), depth, {}};
  model.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> model.params[i])) throw ValidationError("model file ends after " + std::to_string(i) + " values");
  }
  model.validate();
  return model;
}

}  // namespace rvmc
