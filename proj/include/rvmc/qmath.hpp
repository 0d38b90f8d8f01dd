#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rvmc/errors.hpp"

namespace rvmc {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Largest window handled by the dense routines (dimension 1024).
inline constexpr int kMaxSpins = 10;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kZeroBranchTol = 1e-12;

/// A set of spin indices stored as a bitmask. Bit b of a basis index
/// addresses spin b; bit 0 is the oldest spin in a window.
class SpinSet {
 public:
  constexpr SpinSet() = default;
  SpinSet(std::initializer_list<int> spins);
  static constexpr SpinSet fromMask(std::uint32_t mask) {
    SpinSet s;
    s.mask_ = mask;
    return s;
  }
  /// {0, ..., count-1}
  static SpinSet range(int count);

  constexpr std::uint32_t mask() const { return mask_; }
  constexpr bool contains(int spin) const { return (mask_ >> spin) & 1u; }
  int size() const;
  bool empty() const { return mask_ == 0; }
  std::vector<int> indices() const;

  SpinSet operator&(SpinSet o) const { return fromMask(mask_ & o.mask_); }
  SpinSet operator|(SpinSet o) const { return fromMask(mask_ | o.mask_); }
  /// Complement within the first `num_spins` spins.
  SpinSet complement(int num_spins) const;
  bool operator==(const SpinSet&) const = default;

 private:
  std::uint32_t mask_ = 0;
};

/// Hermitian, positive semidefinite, unit-trace matrix on `numSpins()` spins.
class DensityMatrix {
 public:
  /// The zero-spin state: the 1x1 matrix [1].
  DensityMatrix();

  /// Validates every invariant; throws ValidationError on violation.
  static DensityMatrix fromMatrix(CMatrix m);
  /// Skips the eigenvalue check. Used on hot paths whose inputs are valid by
  /// construction; shape is still checked.
  static DensityMatrix trusted(CMatrix m);

  static DensityMatrix basisState(int num_spins, std::uint32_t index);
  static DensityMatrix maximallyMixed(int num_spins);
  static DensityMatrix diagonal(const Eigen::VectorXd& probabilities);

  int numSpins() const { return num_spins_; }
  Eigen::Index dim() const { return data_.rows(); }
  const CMatrix& matrix() const { return data_; }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return data_(r, c); }

  /// Re-checks Hermiticity, PSD and trace; throws ValidationError.
  void validate() const;

 private:
  DensityMatrix(int num_spins, CMatrix m);

  int num_spins_ = 0;
  CMatrix data_;
};

/// Unit-norm state vector on `numSpins()` spins.
class PureStateVector {
 public:
  PureStateVector();
  static PureStateVector fromVector(CVector v);
  static PureStateVector trusted(CVector v);
  static PureStateVector basisState(int num_spins, std::uint32_t index);

  int numSpins() const { return num_spins_; }
  Eigen::Index dim() const { return data_.size(); }
  const CVector& vector() const { return data_; }
  Complex operator[](Eigen::Index i) const { return data_[i]; }

  DensityMatrix toDensity() const;

 private:
  PureStateVector(int num_spins, CVector v);

  int num_spins_ = 0;
  CVector data_;
};

enum class Pauli : std::uint8_t { I, X, Y, Z };

/// Tensor product of single-spin Paulis; ops()[b] acts on spin b.
class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(std::vector<Pauli> ops);
  /// Character i of `text` (one of IXYZ) acts on spin i.
  static PauliString parse(std::string_view text);
  /// Identity on `num_spins` spins except the listed (spin, op) factors.
  static PauliString on(int num_spins, std::initializer_list<std::pair<int, Pauli>> factors);

  int size() const { return static_cast<int>(ops_.size()); }
  const std::vector<Pauli>& ops() const { return ops_; }
  /// Number of X/Y factors: spins that must be measured off the computational basis.
  int quantumWeight() const;

 private:
  std::vector<Pauli> ops_;
};

/// -tr(rho ln rho) in nats. Eigenvalues in [-1e-10, 0) are clamped to zero.
double vonNeumannEntropy(const DensityMatrix& rho);
/// Same on a raw Hermitian matrix; throws ValidationError for eigenvalues
/// below -1e-10. Only the lower triangle is read.
double entropyOfHermitian(const CMatrix& m);

DensityMatrix partialTrace(const DensityMatrix& rho, SpinSet keep);

/// Zeroes entries whose row and column basis indices differ on any spin in `spins`.
DensityMatrix dephase(const DensityMatrix& rho, SpinSet spins);

struct MeasurementBranch {
  double probability;
  DensityMatrix reduced;
};

struct PureMeasurementBranch {
  double probability;
  PureStateVector reduced;
};

/// Projects `spin` onto `outcome`, removes it, and renormalizes. Throws
/// DegenerateError when the branch probability is below 1e-12.
MeasurementBranch conditionOnOutcome(const DensityMatrix& rho, int spin, int outcome);
PureMeasurementBranch conditionOnOutcome(const PureStateVector& psi, int spin, int outcome);

/// Probability of measuring `outcome` on `spin` without forming the branch.
double outcomeProbability(const DensityMatrix& rho, int spin, int outcome);
double outcomeProbability(const PureStateVector& psi, int spin, int outcome);

/// tr(rho P). Throws NumericError when the imaginary part exceeds 1e-10.
double pauliExpectation(const DensityMatrix& rho, const PauliString& p);
double pauliExpectation(const PureStateVector& psi, const PauliString& p);

/// f(m) for Hermitian m via eigen-decomposition.
CMatrix hermitianSqrt(const CMatrix& m);
/// Inverse square root restricted to the support (eigenvalues above `floor`).
CMatrix hermitianPseudoInverseSqrt(const CMatrix& m, double floor);

/// Scatters the low bits of `value` into the positions set in `mask`.
std::uint32_t depositBits(std::uint32_t value, std::uint32_t mask);
/// Gathers the bits of `value` selected by `mask` into the low bits.
std::uint32_t extractBits(std::uint32_t value, std::uint32_t mask);

}  // namespace rvmc
