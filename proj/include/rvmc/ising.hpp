#pragma once

#include <string_view>
#include <vector>

#include "rvmc/qmath.hpp"

namespace rvmc {

enum class IsingFamily {
  classical_field,   // H = alpha sum Z_i - sum Z_i Z_{i+1}
  transverse_field,  // H = alpha sum X_i - sum Z_i Z_{i+1}
};

std::string_view toString(IsingFamily family);

/// One-dimensional Ising Hamiltonian at temperature T (units of the coupling).
struct IsingSpec {
  IsingFamily family = IsingFamily::transverse_field;
  double alpha = 0.0;
  double temperature = 0.0;

  /// Throws ValidationError for negative or non-finite temperature.
  void validate() const;
  /// Z for the classical family, X for the transverse one.
  Pauli fieldOperator() const;
};

/// A coefficient times a Pauli string acting on a window.
struct LocalTerm {
  double coefficient;
  PauliString op;
};

/// Energy terms attributed to the oldest spin (bit 0) of a window on
/// `window_spins` spins: its field term and, when the window holds its
/// successor, the bond between the two oldest spins. Each site therefore owns
/// exactly one field term and one bond.
/// The oldest spin is the one about to be measured out. Every spin that was
/// conditioned on it is already in the window, so its coherences are final.
std::vector<LocalTerm> oldestSiteTerms(const IsingSpec& spec, int window_spins);

}  // namespace rvmc
