#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "rvmc/qmath.hpp"

namespace rvmc {

enum class ModelKind { classical, pure, mixed };

std::string_view toString(ModelKind kind);
ModelKind parseModelKind(std::string_view text);

/// Unconstrained variational parameters for a reconstruction conditioned on
/// the `depth` preceding spins.
///
/// Layouts, with composite index q = a * 2^depth + k (a the new spin, k the
/// context basis index, bit 0 of k the oldest context spin):
///  - classical: params[q] is the logit f(a, k).
///  - pure:      params[2q], params[2q+1] are Re/Im of f(a, k).
///  - mixed:     upper triangle of the d x d factor G (d = 2^(depth+1)) in
///               row-major order, two reals per entry (Re, Im). The
///               imaginary slot of each diagonal entry is unused.
struct ConditionalModel {
  ModelKind kind = ModelKind::classical;
  int depth = 0;
  std::vector<double> params;

  static std::size_t parameterCount(ModelKind kind, int depth);
  /// Indices of the slots holding imaginary parts (empty for classical).
  static std::vector<std::size_t> imaginarySlots(ModelKind kind, int depth);

  /// Throws ValidationError on a length mismatch or a non-finite entry.
  void validate() const;
};

/// Robust extension channel adding one spin conditioned on the computational
/// basis structure of `contextSpins()` preceding spins.
///
/// `choi()` is the matrix R indexed like the extended state: row/column
/// a * 2^n + k. Applying the channel to a window w gives
///   out[(a,k),(b,l)] = R[(a,k),(b,l)] * w[k,l].
/// Trace preservation: sum_a R[(a,k),(a,k)] = 1 for every context k.
class ReconstructionOp {
 public:
  /// P(a|k) stored at a * 2^n + k.
  static ReconstructionOp classical(int context_spins, Eigen::VectorXd table);
  /// psi(a|k) stored at a * 2^n + k.
  static ReconstructionOp pure(int context_spins, CVector amplitudes);
  static ReconstructionOp mixed(int context_spins, CMatrix choi);

  ModelKind kind() const { return kind_; }
  int contextSpins() const { return context_spins_; }
  Eigen::Index contextDim() const { return Eigen::Index{1} << context_spins_; }
  const CMatrix& choi() const { return choi_; }
  /// Conditional table (classical) or amplitudes (pure); empty for mixed.
  const CVector& conditional() const { return conditional_; }

  /// Same channel with kind() == mixed.
  ReconstructionOp asMixed() const;

  /// Re-checks the invariants for kind(); throws ValidationError.
  void validate() const;

 private:
  ReconstructionOp(ModelKind kind, int context_spins, CMatrix choi, CVector conditional);

  ModelKind kind_;
  int context_spins_;
  CMatrix choi_;
  CVector conditional_;
};

ReconstructionOp buildReconstruction(const ConditionalModel& model);

/// Extends a window of exactly `op.contextSpins()` spins by one new spin at
/// the highest bit.
DensityMatrix applyReconstruction(const ReconstructionOp& op, const DensityMatrix& window);
PureStateVector applyReconstruction(const ReconstructionOp& op, const PureStateVector& window);

/// Like applyReconstruction, but the window may carry extra older spins
/// below the context; the channel acts trivially on them.
DensityMatrix extendWindow(const ReconstructionOp& op, const DensityMatrix& window);
PureStateVector extendWindow(const ReconstructionOp& op, const PureStateVector& window);

/// Hilbert-Schmidt adjoint of the channel: maps an operator on n+1 spins to
/// one on the n context spins.
CMatrix adjointReconstruction(const ReconstructionOp& op, const CMatrix& y);

struct CanonicalDecomposition {
  ReconstructionOp op;
  DensityMatrix sigma;
};

/// Solves rho = R(sigma) with the rank-1 sigma whose entries are
/// sqrt(s_k s_l), s_k the diagonal partial sums over the new spin. `split`
/// names the spin treated as new and must be the highest spin of rho.
CanonicalDecomposition canonicalDecompose(const DensityMatrix& rho, int split);

/// Lifts a depth-n model to depth n+1 whose reconstruction ignores the added
/// (oldest) context spin.
ConditionalModel embedModel(const ConditionalModel& model);

/// Text format: kind, depth, parameter count, then one value per line with
/// 17 significant digits.
void writeModel(std::ostream& os, const ConditionalModel& model);
ConditionalModel readModel(std::istream& is);

}  // namespace rvmc
