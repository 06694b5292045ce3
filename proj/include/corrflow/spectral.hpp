#pragma once

// Full Hermitian eigendecomposition and everything derived directly from
// it: observables rotated into the energy eigenbasis, thermal ensembles,
// and degeneracy audits for both energies and energy gaps.
//
// Eigenvector phases are left unfixed. Every quantity computed downstream
// depends only on |A_jk|^2, rho_jj and diagonal products, all of which are
// phase-invariant.

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "corrflow/spinchain.hpp"

namespace corrflow {

inline constexpr double kDefaultDegeneracyTol = 1e-8;

/// Sorted eigenvalues plus the unitary eigenvector matrix (column j is
/// the eigenvector of energies[j]).
struct Spectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd eigenvectors;

  Eigen::Index dim() const { return energies.size(); }
};

/// Matrix elements A_jk of a Hermitian observable in the energy
/// eigenbasis, tagged with the energies they refer to.
struct EigenbasisOperator {
  Eigen::MatrixXcd elements;
  Eigen::VectorXd energies;

  Eigen::Index dim() const { return energies.size(); }
};

/// Diagonal thermal weights rho_jj = exp(-beta E_j)/Z with log-partition
/// function and purity.
struct ThermalEnsemble {
  double beta = 0.0;
  Eigen::VectorXd weights;
  double log_z = 0.0;
  double purity = 1.0;
  Eigen::VectorXd energies;
  bool gibbs = true;  // false for hand-built (non-thermal) weight vectors

  Eigen::Index dim() const { return weights.size(); }
};

struct DegeneracyReport {
  int energy_collisions = 0;          // adjacent spacings below tolerance
  double min_energy_spacing = 0.0;
  std::size_t distinct_gap_values = 0;  // clusters among all d(d-1) gaps
  std::size_t max_gap_multiplicity = 1;
  double tolerance = kDefaultDegeneracyTol;

  bool gaps_degenerate() const { return max_gap_multiplicity > 1; }
};

namespace detail {

inline bool is_exactly_real(const Eigen::MatrixXcd& m) {
  return m.imag().isZero(0.0);
}

}  // namespace detail

/// Dense Hermitian eigensolve. Real-symmetric input takes the dsyevd
/// path, complex Hermitian input zheevd; both return ascending energies.
inline Spectrum diagonalize(const DenseOperator& op) {
  if (!op.hermitian)
    throw std::invalid_argument("diagonalize: operator not flagged Hermitian");
  const Eigen::Index d = op.dim();
  if (d == 0) throw std::invalid_argument("diagonalize: empty operator");
  double herm_defect = (op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm_defect > 1e-12)
    throw std::invalid_argument("diagonalize: matrix is not Hermitian");

  Spectrum s;
  s.energies.resize(d);
  if (detail::is_exactly_real(op.matrix)) {
    Eigen::MatrixXd work = op.matrix.real();
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L',
                                     static_cast<lapack_int>(d), work.data(),
                                     static_cast<lapack_int>(d),
                                     s.energies.data());
    if (info != 0)
      throw std::runtime_error("diagonalize: dsyevd failed to converge");
    s.eigenvectors = work.cast<Complex>();
  } else {
    Eigen::MatrixXcd work = op.matrix;
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L',
                                     static_cast<lapack_int>(d), work.data(),
                                     static_cast<lapack_int>(d),
                                     s.energies.data());
    if (info != 0)
      throw std::runtime_error("diagonalize: zheevd failed to converge");
    s.eigenvectors = std::move(work);
  }
  return s;
}

/// Energy-spacing and gap-multiplicity audit. Gap statistics cluster all
/// d(d-1) nonzero gaps E_j - E_k (both signs) within the tolerance.
inline DegeneracyReport audit_degeneracies(const Spectrum& s,
                                           double tol = kDefaultDegeneracyTol) {
  if (tol <= 0) throw std::invalid_argument("audit_degeneracies: tol must be > 0");
  const Eigen::Index d = s.dim();
  DegeneracyReport rep;
  rep.tolerance = tol;

  rep.min_energy_spacing = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j + 1 < d; ++j) {
    double spacing = s.energies[j + 1] - s.energies[j];
    rep.min_energy_spacing = std::min(rep.min_energy_spacing, spacing);
    if (spacing < tol) ++rep.energy_collisions;
  }
  if (d < 2) rep.min_energy_spacing = 0.0;

  std::vector<double> gaps;
  gaps.reserve(static_cast<std::size_t>(d) * (d - 1));
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k)
      if (j != k) gaps.push_back(s.energies[j] - s.energies[k]);
  std::sort(gaps.begin(), gaps.end());

  std::size_t clusters = 0, run = 0, max_run = 0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (i == 0 || gaps[i] - gaps[i - 1] > tol) {
      ++clusters;
      run = 1;
    } else {
      ++run;
    }
    max_run = std::max(max_run, run);
  }
  rep.distinct_gap_values = clusters;
  rep.max_gap_multiplicity = gaps.empty() ? 1 : max_run;
  return rep;
}

/// V^dagger A V. Real inputs go through two real GEMMs.
inline EigenbasisOperator to_eigenbasis(const DenseOperator& a,
                                        const Spectrum& s) {
  if (a.dim() != s.dim())
    throw std::invalid_argument("to_eigenbasis: dimension mismatch");
  EigenbasisOperator out;
  out.energies = s.energies;
  if (detail::is_exactly_real(a.matrix) &&
      detail::is_exactly_real(s.eigenvectors)) {
    Eigen::MatrixXd ar = a.matrix.real();
    Eigen::MatrixXd vr = s.eigenvectors.real();
    Eigen::MatrixXd tmp(a.dim(), a.dim());
    tmp.noalias() = ar * vr;
    Eigen::MatrixXd res(a.dim(), a.dim());
    res.noalias() = vr.transpose() * tmp;
    out.elements = res.cast<Complex>();
  } else {
    Eigen::MatrixXcd tmp = a.matrix * s.eigenvectors;
    out.elements = s.eigenvectors.adjoint() * tmp;
  }
  return out;
}

/// Gibbs weights with a ground-state energy shift so that
/// beta*(E_max - E_0) never overflows the exponential.
inline ThermalEnsemble thermal_ensemble(const Spectrum& s, double beta) {
  if (!std::isfinite(beta))
    throw std::invalid_argument("thermal_ensemble: beta must be finite");
  if (beta < 0)
    throw std::invalid_argument("thermal_ensemble: beta must be >= 0");
  const Eigen::Index d = s.dim();
  if (d == 0) throw std::invalid_argument("thermal_ensemble: empty spectrum");

  ThermalEnsemble ens;
  ens.beta = beta;
  ens.energies = s.energies;
  ens.weights.resize(d);
  const double e0 = s.energies[0];
  long double z = 0.0L;
  for (Eigen::Index j = 0; j < d; ++j) {
    double w = std::exp(-beta * (s.energies[j] - e0));
    ens.weights[j] = w;
    z += w;
  }
  long double purity = 0.0L;
  for (Eigen::Index j = 0; j < d; ++j) {
    ens.weights[j] = static_cast<double>(ens.weights[j] / z);
    purity += static_cast<long double>(ens.weights[j]) * ens.weights[j];
  }
  ens.purity = static_cast<double>(purity);
  ens.log_z = static_cast<double>(std::log(z)) - beta * e0;
  ens.gibbs = true;
  return ens;
}

/// Hand-built diagonal ensemble (not of Gibbs form); rejected by the
/// Kubo paths.
inline ThermalEnsemble custom_ensemble(const Eigen::VectorXd& weights,
                                       const Eigen::VectorXd& energies) {
  if (weights.size() != energies.size())
    throw std::invalid_argument("custom_ensemble: size mismatch");
  ThermalEnsemble ens;
  ens.beta = std::numeric_limits<double>::quiet_NaN();
  ens.weights = weights;
  ens.energies = energies;
  long double purity = 0.0L;
  for (Eigen::Index j = 0; j < weights.size(); ++j)
    purity += static_cast<long double>(weights[j]) * weights[j];
  ens.purity = static_cast<double>(purity);
  ens.log_z = 0.0;
  ens.gibbs = false;
  return ens;
}

namespace detail {
inline bool same_energies(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}
}  // namespace detail

inline void require_same_basis(const ThermalEnsemble& ens,
                               const EigenbasisOperator& op,
                               const char* where) {
  if (!detail::same_energies(ens.energies, op.energies))
    throw std::invalid_argument(std::string(where) +
                                ": operands come from different spectra");
}

inline void require_same_basis(const EigenbasisOperator& a,
                               const EigenbasisOperator& b,
                               const char* where) {
  if (!detail::same_energies(a.energies, b.energies))
    throw std::invalid_argument(std::string(where) +
                                ": operands come from different spectra");
}

}  // namespace corrflow
