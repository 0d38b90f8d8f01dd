#include "rvmc/qmath.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace rvmc {

namespace {

int spinsForDim(Eigen::Index dim) {
  if (dim < 1 || (dim & (dim - 1)) != 0) {
    throw ValidationError("dimension " + std::to_string(dim) + " is not a power of two");
  }
  const int spins = std::countr_zero(static_cast<std::uint64_t>(dim));
  if (spins > kMaxSpins) {
    throw SizeError("state on " + std::to_string(spins) + " spins exceeds the " +
                    std::to_string(kMaxSpins) + "-spin limit");
  }
  return spins;
}

void checkSpin(int spin, int num_spins) {
  if (spin < 0 || spin >= num_spins) {
    throw ValidationError("spin index " + std::to_string(spin) + " out of range for " +
                          std::to_string(num_spins) + " spins");
  }
}

void checkSubset(SpinSet s, int num_spins) {
  if ((s.mask() >> num_spins) != 0) {
    throw ValidationError("spin set references spins beyond " + std::to_string(num_spins));
  }
}

double entropyFromEigenvalues(const Eigen::VectorXd& evals) {
  double s = 0.0;
  for (double lambda : evals) {
    if (lambda < -kPsdTol) {
      throw ValidationError("negative eigenvalue " + std::to_string(lambda) +
                            " in entropy evaluation");
    }
    lambda = std::clamp(lambda, 0.0, 1.0);
    if (lambda > 0.0) s -= lambda * std::log(lambda);
  }
  return s;
}

}  // namespace

SpinSet::SpinSet(std::initializer_list<int> spins) {
  for (int s : spins) {
    if (s < 0 || s >= 32) throw ValidationError("spin index out of range");
    mask_ |= 1u << s;
  }
}

SpinSet SpinSet::range(int count) {
  return fromMask(count >= 32 ? ~0u : ((1u << count) - 1u));
}

int SpinSet::size() const { return std::popcount(mask_); }

std::vector<int> SpinSet::indices() const {
  std::vector<int> out;
  for (int b = 0; b < 32; ++b) {
    if (contains(b)) out.push_back(b);
  }
  return out;
}

SpinSet SpinSet::complement(int num_spins) const {
  return fromMask(range(num_spins).mask() & ~mask_);
}

std::uint32_t depositBits(std::uint32_t value, std::uint32_t mask) {
  std::uint32_t out = 0;
  for (std::uint32_t bit = 1; mask != 0; bit <<= 1) {
    const std::uint32_t low = mask & (~mask + 1u);
    if (value & bit) out |= low;
    mask &= mask - 1u;
  }
  return out;
}

std::uint32_t extractBits(std::uint32_t value, std::uint32_t mask) {
  std::uint32_t out = 0;
  for (std::uint32_t bit = 1; mask != 0; bit <<= 1) {
    const std::uint32_t low = mask & (~mask + 1u);
    if (value & low) out |= bit;
    mask &= mask - 1u;
  }
  return out;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix() : num_spins_(0), data_(CMatrix::Ones(1, 1)) {}

DensityMatrix::DensityMatrix(int num_spins, CMatrix m) : num_spins_(num_spins), data_(std::move(m)) {}

DensityMatrix DensityMatrix::trusted(CMatrix m) {
  if (m.rows() != m.cols()) throw ValidationError("density matrix must be square");
  const int spins = spinsForDim(m.rows());
  return DensityMatrix(spins, std::move(m));
}

DensityMatrix DensityMatrix::fromMatrix(CMatrix m) {
  DensityMatrix rho = trusted(std::move(m));
  rho.validate();
  return rho;
}

void DensityMatrix::validate() const {
  const Eigen::Index d = dim();
  double asym = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      asym = std::max(asym, std::abs(data_(r, c) - std::conj(data_(c, r))));
    }
  }
  if (asym > kHermitianTol) {
    throw ValidationError("matrix is not Hermitian (max asymmetry " + std::to_string(asym) + ")");
  }
  const double tr = data_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol) {
    throw ValidationError("trace " + std::to_string(tr) + " differs from 1");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(data_, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -kPsdTol) {
    throw ValidationError("matrix is not positive semidefinite (min eigenvalue " +
                          std::to_string(min_eig) + ")");
  }
}

DensityMatrix DensityMatrix::basisState(int num_spins, std::uint32_t index) {
  if (num_spins < 0 || num_spins > kMaxSpins) throw SizeError("invalid spin count");
  const Eigen::Index d = Eigen::Index{1} << num_spins;
  if (index >= d) throw ValidationError("basis index out of range");
  CMatrix m = CMatrix::Zero(d, d);
  m(index, index) = 1.0;
  return DensityMatrix(num_spins, std::move(m));
}

DensityMatrix DensityMatrix::maximallyMixed(int num_spins) {
  if (num_spins < 0 || num_spins > kMaxSpins) throw SizeError("invalid spin count");
  const Eigen::Index d = Eigen::Index{1} << num_spins;
  return DensityMatrix(num_spins, CMatrix::Identity(d, d) / static_cast<double>(d));
}

DensityMatrix DensityMatrix::diagonal(const Eigen::VectorXd& probabilities) {
  CMatrix m = probabilities.cast<Complex>().asDiagonal();
  return fromMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// PureStateVector

PureStateVector::PureStateVector() : num_spins_(0), data_(CVector::Ones(1)) {}

PureStateVector::PureStateVector(int num_spins, CVector v) : num_spins_(num_spins), data_(std::move(v)) {}

PureStateVector PureStateVector::trusted(CVector v) {
  const int spins = spinsForDim(v.size());
  return PureStateVector(spins, std::move(v));
}

PureStateVector PureStateVector::fromVector(CVector v) {
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > kTraceTol) {
    throw ValidationError("state vector norm " + std::to_string(norm) + " differs from 1");
  }
  return trusted(std::move(v));
}

PureStateVector PureStateVector::basisState(int num_spins, std::uint32_t index) {
  if (num_spins < 0 || num_spins > kMaxSpins) throw SizeError("invalid spin count");
  const Eigen::Index d = Eigen::Index{1} << num_spins;
  if (index >= d) throw ValidationError("basis index out of range");
  CVector v = CVector::Zero(d);
  v[index] = 1.0;
  return PureStateVector(num_spins, std::move(v));
}

DensityMatrix PureStateVector::toDensity() const {
  return DensityMatrix::trusted(data_ * data_.adjoint());
}

// ---------------------------------------------------------------------------
// PauliString

PauliString::PauliString(std::vector<Pauli> ops) : ops_(std::move(ops)) {}

PauliString PauliString::parse(std::string_view text) {
  std::vector<Pauli> ops;
  ops.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case 'I': ops.push_back(Pauli::I); break;
      case 'X': ops.push_back(Pauli::X); break;
      case 'Y': ops.push_back(Pauli::Y); break;
      case 'Z': ops.push_back(Pauli::Z); break;
      default: throw ValidationError(std::string("invalid Pauli character '") + c + "'");
    }
  }
  return PauliString(std::move(ops));
}

PauliString PauliString::on(int num_spins, std::initializer_list<std::pair<int, Pauli>> factors) {
  std::vector<Pauli> ops(static_cast<std::size_t>(num_spins), Pauli::I);
  for (auto [spin, op] : factors) {
    checkSpin(spin, num_spins);
    ops[static_cast<std::size_t>(spin)] = op;
  }
  return PauliString(std::move(ops));
}

int PauliString::quantumWeight() const {
  return static_cast<int>(std::count_if(ops_.begin(), ops_.end(),
                                        [](Pauli p) { return p == Pauli::X || p == Pauli::Y; }));
}

// ---------------------------------------------------------------------------
// Operations

double entropyOfHermitian(const CMatrix& m) {
  if (m.rows() == 1) return entropyFromEigenvalues(Eigen::VectorXd::Constant(1, m(0, 0).real()));
  if (m.imag().isZero(0.0)) {
    // Real symmetric input: the real solver is several times cheaper.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.real(), Eigen::EigenvaluesOnly);
    return entropyFromEigenvalues(es.eigenvalues());
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return entropyFromEigenvalues(es.eigenvalues());
}

double vonNeumannEntropy(const DensityMatrix& rho) {
  const CMatrix& m = rho.matrix();
  const Eigen::Index d = m.rows();
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = c; r < d; ++r) {
      if (std::abs(m(r, c) - std::conj(m(c, r))) > kHermitianTol) {
        throw ValidationError("entropy of a non-Hermitian matrix");
      }
    }
  }
  return entropyOfHermitian(m);
}

DensityMatrix partialTrace(const DensityMatrix& rho, SpinSet keep) {
  checkSubset(keep, rho.numSpins());
  if (keep.empty()) throw ValidationError("partial trace over every spin leaves a scalar");
  const std::uint32_t keep_mask = keep.mask();
  const std::uint32_t traced_mask = keep.complement(rho.numSpins()).mask();
  const Eigen::Index dk = Eigen::Index{1} << keep.size();
  const std::uint32_t dt = 1u << std::popcount(traced_mask);
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Eigen::Index c = 0; c < dk; ++c) {
    const std::uint32_t cb = depositBits(static_cast<std::uint32_t>(c), keep_mask);
    for (Eigen::Index r = 0; r < dk; ++r) {
      const std::uint32_t rb = depositBits(static_cast<std::uint32_t>(r), keep_mask);
      Complex acc = 0.0;
      for (std::uint32_t t = 0; t < dt; ++t) {
        const std::uint32_t tb = depositBits(t, traced_mask);
        acc += rho(rb | tb, cb | tb);
      }
      out(r, c) = acc;
    }
  }
  return DensityMatrix::trusted(std::move(out));
}

DensityMatrix dephase(const DensityMatrix& rho, SpinSet spins) {
  checkSubset(spins, rho.numSpins());
  const std::uint32_t mask = spins.mask();
  CMatrix out = rho.matrix();
  const Eigen::Index d = out.rows();
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      if (((static_cast<std::uint32_t>(r) ^ static_cast<std::uint32_t>(c)) & mask) != 0) out(r, c) = 0.0;
    }
  }
  return DensityMatrix::trusted(std::move(out));
}

double outcomeProbability(const DensityMatrix& rho, int spin, int outcome) {
  checkSpin(spin, rho.numSpins());
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.dim(); ++i) {
    if (((i >> spin) & 1) == outcome) p += rho(i, i).real();
  }
  return std::clamp(p, 0.0, 1.0);
}

double outcomeProbability(const PureStateVector& psi, int spin, int outcome) {
  checkSpin(spin, psi.numSpins());
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    if (((i >> spin) & 1) == outcome) p += std::norm(psi[i]);
  }
  return std::clamp(p, 0.0, 1.0);
}

MeasurementBranch conditionOnOutcome(const DensityMatrix& rho, int spin, int outcome) {
  checkSpin(spin, rho.numSpins());
  if (outcome != 0 && outcome != 1) throw ValidationError("outcome must be 0 or 1");
  const double p = outcomeProbability(rho, spin, outcome);
  if (p < kZeroBranchTol) {
    throw DegenerateError("measurement branch on spin " + std::to_string(spin) +
                          " has probability " + std::to_string(p));
  }
  const std::uint32_t rest = SpinSet{spin}.complement(rho.numSpins()).mask();
  const std::uint32_t fixed = static_cast<std::uint32_t>(outcome) << spin;
  const Eigen::Index dr = rho.dim() / 2;
  CMatrix out(dr, dr);
  for (Eigen::Index c = 0; c < dr; ++c) {
    const std::uint32_t cb = depositBits(static_cast<std::uint32_t>(c), rest) | fixed;
    for (Eigen::Index r = 0; r < dr; ++r) {
      out(r, c) = rho(depositBits(static_cast<std::uint32_t>(r), rest) | fixed, cb) / p;
    }
  }
  return {p, DensityMatrix::trusted(std::move(out))};
}

PureMeasurementBranch conditionOnOutcome(const PureStateVector& psi, int spin, int outcome) {
  checkSpin(spin, psi.numSpins());
  if (outcome != 0 && outcome != 1) throw ValidationError("outcome must be 0 or 1");
  const double p = outcomeProbability(psi, spin, outcome);
  if (p < kZeroBranchTol) {
    throw DegenerateError("measurement branch on spin " + std::to_string(spin) +
                          " has probability " + std::to_string(p));
  }
  const std::uint32_t rest = SpinSet{spin}.complement(psi.numSpins()).mask();
  const std::uint32_t fixed = static_cast<std::uint32_t>(outcome) << spin;
  const Eigen::Index dr = psi.dim() / 2;
  const double scale = 1.0 / std::sqrt(p);
  CVector out(dr);
  for (Eigen::Index r = 0; r < dr; ++r) {
    out[r] = psi[depositBits(static_cast<std::uint32_t>(r), rest) | fixed] * scale;
  }
  return {p, PureStateVector::trusted(std::move(out))};
}

namespace {

// P|c> = phase(c) |c ^ flip>
struct PauliAction {
  std::uint32_t flip = 0;
  std::uint32_t z_mask = 0;  // Z or Y factors contribute (-1)^bit
  int y_count = 0;

  explicit PauliAction(const PauliString& p) {
    for (int b = 0; b < p.size(); ++b) {
      switch (p.ops()[static_cast<std::size_t>(b)]) {
        case Pauli::I: break;
        case Pauli::X: flip |= 1u << b; break;
        case Pauli::Z: z_mask |= 1u << b; break;
        case Pauli::Y:
          flip |= 1u << b;
          z_mask |= 1u << b;
          ++y_count;
          break;
      }
    }
  }

  // Y = i X Z, so Y|c> = i (-1)^c |c^1>.
  Complex phase(std::uint32_t c) const {
    static const Complex kIPowers[4] = {1.0, Complex(0, 1), -1.0, Complex(0, -1)};
    const double sign = (std::popcount(c & z_mask) & 1) ? -1.0 : 1.0;
    return sign * kIPowers[y_count & 3];
  }
};

double checkedReal(Complex value) {
  if (std::abs(value.imag()) > kHermitianTol) {
    throw NumericError("Pauli expectation has imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

}  // namespace

double pauliExpectation(const DensityMatrix& rho, const PauliString& p) {
  if (p.size() != rho.numSpins()) {
    throw ValidationError("Pauli string length " + std::to_string(p.size()) +
                          " does not match state on " + std::to_string(rho.numSpins()) + " spins");
  }
  const PauliAction act(p);
  Complex acc = 0.0;
  for (Eigen::Index c = 0; c < rho.dim(); ++c) {
    const auto cb = static_cast<std::uint32_t>(c);
    acc += act.phase(cb) * rho(cb, cb ^ act.flip);
  }
  return checkedReal(acc);
}

double pauliExpectation(const PureStateVector& psi, const PauliString& p) {
  if (p.size() != psi.numSpins()) {
    throw ValidationError("Pauli string length " + std::to_string(p.size()) +
                          " does not match state on " + std::to_string(psi.numSpins()) + " spins");
  }
  const PauliAction act(p);
  Complex acc = 0.0;
  for (Eigen::Index c = 0; c < psi.dim(); ++c) {
    const auto cb = static_cast<std::uint32_t>(c);
    acc += std::conj(psi[cb ^ act.flip]) * act.phase(cb) * psi[cb];
  }
  return checkedReal(acc);
}

CMatrix hermitianSqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix hermitianPseudoInverseSqrt(const CMatrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  Eigen::VectorXd inv = es.eigenvalues();
  for (double& v : inv) v = v > floor ? 1.0 / std::sqrt(v) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace rvmc
