#include "rvmc/entropy.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace rvmc {

namespace {

constexpr double kInverseFloor = 1e-12;
constexpr double kSupportTol = 1e-10;

}  // namespace

double classicalStepEntropy(const ReconstructionOp& op, int context) {
  if (op.kind() != ModelKind::classical) throw ValidationError("classical step entropy needs a classical reconstruction");
  if (context < 0 || context >= op.contextDim()) throw ValidationError("context index out of range");
  double s = 0.0;
  for (Eigen::Index a = 0; a < 2; ++a) {
    const double p = op.conditional()[a * op.contextDim() + context].real();
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

double stepEntropyProduction(const DensityMatrix& before, const DensityMatrix& after) {
  const double production = vonNeumannEntropy(after) - vonNeumannEntropy(before);
  if (production < -1e-6) {
    throw ValidationError("entropy production " + std::to_string(production) +
                          " is negative: the extension is not a valid reconstruction");
  }
  return production;
}

double entropyBoundDephased(const DensityMatrix& rho, const ReconstructionOp& op, const DensityMatrix& sigma,
                            SpinSet undephased) {
  if (rho.numSpins() > 8) throw SizeError("exact bound enumeration is limited to 8 spins");
  if (sigma.numSpins() + 1 != rho.numSpins() || sigma.numSpins() != op.contextSpins()) {
    throw ValidationError("rho, op and sigma sizes are inconsistent");
  }
  const int m = sigma.numSpins();
  const std::uint32_t dephased = undephased.complement(m).mask();
  if ((undephased.mask() >> m) != 0) throw ValidationError("undephased set references spins outside sigma");

  const CMatrix& s = sigma.matrix();
  const Eigen::Index d = sigma.dim();
  const std::uint32_t count = 1u << std::popcount(dephased);
  double bound = vonNeumannEntropy(sigma);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t fixed = depositBits(i, dephased);
    CMatrix block = CMatrix::Zero(d, d);
    double p = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      if ((static_cast<std::uint32_t>(c) & dephased) != fixed) continue;
      p += s(c, c).real();
      for (Eigen::Index r = 0; r < d; ++r) {
        if ((static_cast<std::uint32_t>(r) & dephased) == fixed) block(r, c) = s(r, c);
      }
    }
    if (p <= 0.0) continue;
    block /= p;
    const DensityMatrix conditioned = DensityMatrix::trusted(std::move(block));
    const DensityMatrix extended = applyReconstruction(op, conditioned);
    bound += p * (vonNeumannEntropy(extended) - vonNeumannEntropy(conditioned));
  }
  return bound;
}

double relativeEntropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw ValidationError("relative entropy of states with different sizes");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sigma.matrix());
  const CMatrix& v = es.eigenvectors();
  double cross = 0.0;
  for (Eigen::Index j = 0; j < sigma.dim(); ++j) {
    const double weight = (v.col(j).adjoint() * rho.matrix() * v.col(j))(0, 0).real();
    const double mu = es.eigenvalues()[j];
    if (mu < kInverseFloor) {
      if (weight > kSupportTol) return kInfiniteRelativeEntropy;
      continue;
    }
    cross += weight * std::log(mu);
  }
  return -vonNeumannEntropy(rho) - cross;
}

Distortion errorChannelDistortion(const ReconstructionOp& op, const DensityMatrix& sigma, SpinSet undephased) {
  const int m = sigma.numSpins();
  if (m + 1 > 6) throw SizeError("error-channel evaluation is limited to 6 spins");
  if (m != op.contextSpins()) throw ValidationError("sigma does not match the reconstruction context");
  if ((undephased.mask() >> m) != 0) throw ValidationError("undephased set references spins outside sigma");

  const DensityMatrix sigma0 = dephase(sigma, undephased.complement(m));
  Eigen::SelfAdjointEigenSolver<CMatrix> es0(sigma0.matrix(), Eigen::EigenvaluesOnly);
  if (es0.eigenvalues().minCoeff() < kInverseFloor) {
    throw NumericError("reference state is singular; the Petz map needs a strictly positive sigma");
  }

  const DensityMatrix image = applyReconstruction(op, sigma);
  const DensityMatrix image0 = applyReconstruction(op, sigma0);
  const CMatrix root0 = hermitianSqrt(sigma0.matrix());
  const CMatrix inv_root = hermitianPseudoInverseSqrt(image0.matrix(), kInverseFloor);

  // R(sigma) must live on the support of R(sigma0) for the recovery map.
  Eigen::SelfAdjointEigenSolver<CMatrix> es_img(image0.matrix());
  for (Eigen::Index j = 0; j < image0.dim(); ++j) {
    if (es_img.eigenvalues()[j] >= kInverseFloor) continue;
    const auto v = es_img.eigenvectors().col(j);
    const double weight = (v.adjoint() * image.matrix() * v)(0, 0).real();
    if (weight > kSupportTol) {
      throw NumericError("R(sigma) has weight outside the support of R(sigma0); inverse square root undefined");
    }
  }

  CMatrix distorted = root0 * adjointReconstruction(op, inv_root * image.matrix() * inv_root) * root0;
  distorted = (0.5 * (distorted + distorted.adjoint())).eval();
  DensityMatrix e_sigma = DensityMatrix::trusted(std::move(distorted));

  Distortion out{e_sigma,
                 {relativeEntropy(sigma, sigma0), relativeEntropy(image, image0), relativeEntropy(e_sigma, sigma0)}};
  return out;
}

}  // namespace rvmc
