#pragma once

// Diagonal-matrix-element statistics: deviations
// Delta_{k,A} = A_kk - tr(rho A), their ensemble-weighted tails, and the
// factorization error sum_k rho_kk Delta_{k,A} Delta_{k,B} that separates
// the infinite-time average from tr(rho A) tr(rho B).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "corrflow/spectral.hpp"

namespace corrflow {

struct DeviationStats {
  Eigen::VectorXd deviations;        // Delta_{k,A}
  double weighted_mean = 0.0;        // sum rho Delta, vanishes identically
  double weighted_variance = 0.0;    // sum rho Delta^2
  std::vector<double> tail_deltas;
  std::vector<double> tail_masses;   // Pr_rho[|Delta| >= delta]
};

inline double ensemble_expectation(const ThermalEnsemble& ens,
                                   const EigenbasisOperator& a) {
  require_same_basis(ens, a, "ensemble_expectation");
  long double acc = 0.0L;
  for (Eigen::Index k = 0; k < ens.dim(); ++k)
    acc += static_cast<long double>(ens.weights[k]) * a.elements(k, k).real();
  return static_cast<double>(acc);
}

inline DeviationStats diagonal_deviations(const ThermalEnsemble& ens,
                                          const EigenbasisOperator& a,
                                          const std::vector<double>& delta_grid) {
  require_same_basis(ens, a, "diagonal_deviations");
  for (std::size_t i = 0; i < delta_grid.size(); ++i)
    if (!(delta_grid[i] > 0) ||
        (i > 0 && !(delta_grid[i] > delta_grid[i - 1])))
      throw std::invalid_argument(
          "diagonal_deviations: delta grid must be positive ascending");

  const Eigen::Index d = ens.dim();
  DeviationStats stats;
  stats.deviations.resize(d);
  const double mean = ensemble_expectation(ens, a);
  long double wmean = 0.0L, wvar = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    double dev = a.elements(k, k).real() - mean;
    stats.deviations[k] = dev;
    wmean += static_cast<long double>(ens.weights[k]) * dev;
    wvar += static_cast<long double>(ens.weights[k]) * dev * dev;
  }
  stats.weighted_mean = static_cast<double>(wmean);
  stats.weighted_variance = static_cast<double>(wvar);

  stats.tail_deltas = delta_grid;
  stats.tail_masses.resize(delta_grid.size());
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    long double mass = 0.0L;
    for (Eigen::Index k = 0; k < d; ++k)
      if (std::abs(stats.deviations[k]) >= delta_grid[i])
        mass += ens.weights[k];
    stats.tail_masses[i] = static_cast<double>(mass);
  }
  return stats;
}

struct FactorizationError {
  double value = 0.0;          // sum_k rho_kk Delta_{k,A} Delta_{k,B}
  double in_set = 0.0;         // contribution with both |Delta| <= threshold
  double out_of_set = 0.0;
  double threshold = 0.0;
};

inline FactorizationError factorization_error(const ThermalEnsemble& ens,
                                              const EigenbasisOperator& a,
                                              const EigenbasisOperator& b,
                                              double split_threshold = 0.0) {
  require_same_basis(ens, a, "factorization_error");
  require_same_basis(a, b, "factorization_error");
  const Eigen::Index d = ens.dim();
  const double mean_a = ensemble_expectation(ens, a);
  const double mean_b = ensemble_expectation(ens, b);
  long double total = 0.0L, inside = 0.0L, outside = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    double da = a.elements(k, k).real() - mean_a;
    double db = b.elements(k, k).real() - mean_b;
    long double term = static_cast<long double>(ens.weights[k]) * da * db;
    total += term;
    if (std::abs(da) <= split_threshold && std::abs(db) <= split_threshold)
      inside += term;
    else
      outside += term;
  }
  FactorizationError err;
  err.value = static_cast<double>(total);
  err.in_set = static_cast<double>(inside);
  err.out_of_set = static_cast<double>(outside);
  err.threshold = split_threshold;
  return err;
}

}  // namespace corrflow
