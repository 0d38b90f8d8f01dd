#pragma once

#include "rvmc/decomp.hpp"
#include "rvmc/ising.hpp"

namespace rvmc {

struct ThermoValues {
  double free_energy;  // per site
  double entropy;      // per site, nats
};

/// Exact classical chain H = alpha sum Z - sum ZZ from the 2x2 transfer
/// matrix, in the log domain. Entropy is -dF/dT by central difference.
ThermoValues classicalTransferMatrix(double alpha, double temperature);

/// Depth-1 classical model whose chain P(s_{i+1}|s_i) samples the Boltzmann
/// distribution exactly.
ConditionalModel exactClassicalConditionals(double alpha, double temperature);

struct MeanFieldSolution {
  double p_star;  // probability of the spin state favoured by the field term
  double free_energy;
};

/// Minimizes F(p) = alpha(1-2p) - (1-2p)^2 + T p ln p + T (1-p) ln(1-p)
/// by a grid scan followed by golden-section refinement.
MeanFieldSolution meanFieldSolve(double alpha, double temperature, int grid_points = 1001);

/// Depth-1 classical model with context-independent conditionals equal to
/// the mean-field solution.
ConditionalModel meanFieldClassicalModel(double alpha, double temperature);

/// Free-fermion free energy per site of the infinite transverse-field chain
/// (ground-state energy per site at T = 0).
double tfimExact(double alpha, double temperature);

/// Second-order perturbative free energy per site: low/high-field ground
/// state branches at T = 0, high-field thermal form at T > 0.
double secondOrderReference(double alpha, double temperature);

enum class Boundary { open, periodic };

/// Full-spectrum free energy per site of an L-site chain (L <= 14). Returns
/// the ground-state energy per site at T = 0.
double exactDiagonalization(int sites, const IsingSpec& spec, Boundary boundary);

}  // namespace rvmc
