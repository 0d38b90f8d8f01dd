#pragma once

#include <array>
#include <limits>

#include "rvmc/decomp.hpp"

namespace rvmc {

/// Shannon entropy (nats) of the conditional distribution P(.|context).
double classicalStepEntropy(const ReconstructionOp& op, int context);

/// S(after) - S(before). Throws ValidationError when the result is below
/// -1e-6, which a valid reconstruction cannot produce.
double stepEntropyProduction(const DensityMatrix& before, const DensityMatrix& after);

/// Entropy lower bound for rho = R(sigma) using a reference state dephased on
/// every spin of sigma outside `undephased`:
///
///   S(sigma) + sum_i p_i [ S(R(sigma_i)) - S(sigma_i) ]
///
/// where i runs over basis states of the dephased spins, p_i is the
/// probability of i and sigma_i is sigma projected onto i and renormalized.
/// Evaluated by exact enumeration; at most 8 spins in rho.
double entropyBoundDephased(const DensityMatrix& rho, const ReconstructionOp& op, const DensityMatrix& sigma,
                            SpinSet undephased);

inline constexpr double kInfiniteRelativeEntropy = std::numeric_limits<double>::infinity();

/// tr(rho ln rho - rho ln sigma); +inf when rho has weight outside the
/// support of sigma.
double relativeEntropy(const DensityMatrix& rho, const DensityMatrix& sigma);

struct Distortion {
  DensityMatrix distorted;
  /// S(sigma||sigma0), S(R(sigma)||R(sigma0)), S(E(sigma)||sigma0)
  std::array<double, 3> sandwich;
};

/// E(sigma) = M(R(sigma)) with M the Petz recovery map of R at sigma0, the
/// state sigma dephased outside `undephased`. sigma must be strictly
/// positive; at most 6 spins after extension.
Distortion errorChannelDistortion(const ReconstructionOp& op, const DensityMatrix& sigma, SpinSet undephased);

}  // namespace rvmc
