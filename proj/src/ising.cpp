#include "rvmc/ising.hpp"

#include <cmath>
#include <string>

namespace rvmc {

std::string_view toString(IsingFamily family) {
  return family == IsingFamily::classical_field ? "classical_field" : "transverse_field";
}

void IsingSpec::validate() const {
  if (!std::isfinite(alpha)) throw ValidationError("field strength must be finite");
  if (!std::isfinite(temperature) || temperature < 0.0) {
    throw ValidationError("temperature must be finite and non-negative, got " + std::to_string(temperature));
  }
}

Pauli IsingSpec::fieldOperator() const {
  return family == IsingFamily::classical_field ? Pauli::Z : Pauli::X;
}

std::vector<LocalTerm> oldestSiteTerms(const IsingSpec& spec, int window_spins) {
  if (window_spins < 1) throw ValidationError("window must hold at least one spin");
  std::vector<LocalTerm> terms;
  terms.push_back({spec.alpha, PauliString::on(window_spins, {{0, spec.fieldOperator()}})});
  if (window_spins >= 2) {
    terms.push_back({-1.0, PauliString::on(window_spins, {{0, Pauli::Z}, {1, Pauli::Z}})});
  }
  return terms;
}

}  // namespace rvmc
