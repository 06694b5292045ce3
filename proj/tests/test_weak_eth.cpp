#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "corrflow/correlators.hpp"
#include "corrflow/spectral.hpp"
#include "corrflow/spinchain.hpp"
#include "corrflow/weak_eth.hpp"

using namespace corrflow;
using Catch::Approx;

namespace {

SpinChainSpec eth_spec(int L) {
  return SpinChainSpec{.length = L, .gamma = 0.8, .lambda = 0.5, .j1 = 1.0,
                       .j2 = 1.0};
}

struct Workspace {
  Spectrum spectrum;
  ThermalEnsemble ens;
  EigenbasisOperator aeig;  // X at floor(L/2)
  EigenbasisOperator beig;  // X on the adjacent site toward the centre
};

Workspace make_workspace(int L, double beta) {
  auto spec = eth_spec(L);
  Workspace w;
  w.spectrum = diagonalize(build_hamiltonian(spec));
  w.ens = thermal_ensemble(w.spectrum, beta);
  w.aeig = to_eigenbasis(default_observable(spec), w.spectrum);
  w.beig = to_eigenbasis(
      build_pauli_string(single_site(L / 2 - 1, PauliAxis::X), L), w.spectrum);
  return w;
}

}  // namespace

TEST_CASE("identity observable has no deviations") {
  auto w = make_workspace(4, 1.0);
  EigenbasisOperator ident;
  ident.energies = w.spectrum.energies;
  ident.elements = Eigen::MatrixXcd::Identity(16, 16);
  auto stats = diagonal_deviations(w.ens, ident, {0.1, 0.5});
  CHECK(stats.deviations.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(stats.weighted_variance < 1e-28);
  CHECK(stats.tail_masses[0] == 0.0);
  CHECK(stats.tail_masses[1] == 0.0);
}

TEST_CASE("infinite-temperature deviations center on tr(A)/d") {
  auto w = make_workspace(5, 0.0);
  auto stats = diagonal_deviations(w.ens, w.aeig, {0.1});
  const double d = 32.0;
  double mean = w.aeig.elements.trace().real() / d;
  for (Eigen::Index k = 0; k < 32; ++k)
    CHECK(stats.deviations[k] ==
          Approx(w.aeig.elements(k, k).real() - mean).margin(1e-13));
  CHECK(std::abs(stats.weighted_mean) < 1e-10);
}

TEST_CASE("weighted mean of deviations vanishes identically") {
  for (int L : {4, 6}) {
    for (double beta : {0.0, 0.5, 2.0}) {
      auto w = make_workspace(L, beta);
      auto stats = diagonal_deviations(w.ens, w.aeig, {0.2});
      CHECK(std::abs(stats.weighted_mean) < 1e-10);
    }
  }
}

TEST_CASE("tail masses are nonincreasing in the threshold") {
  auto w = make_workspace(6, 1.0);
  auto stats = diagonal_deviations(w.ens, w.aeig, {0.05, 0.1, 0.2, 0.4, 0.8});
  for (std::size_t i = 1; i < stats.tail_masses.size(); ++i)
    CHECK(stats.tail_masses[i] <= stats.tail_masses[i - 1]);
}

TEST_CASE("delta grid must be positive ascending") {
  auto w = make_workspace(4, 1.0);
  CHECK_THROWS_AS(diagonal_deviations(w.ens, w.aeig, {0.2, 0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(diagonal_deviations(w.ens, w.aeig, {-0.1, 0.2}),
                  std::invalid_argument);
}

TEST_CASE("factorization error vanishes against the identity") {
  auto w = make_workspace(5, 1.0);
  EigenbasisOperator ident;
  ident.energies = w.spectrum.energies;
  ident.elements = Eigen::MatrixXcd::Identity(32, 32);
  auto err = factorization_error(w.ens, w.aeig, ident);
  CHECK(std::abs(err.value) < 1e-14);
}

TEST_CASE("autocorrelation factorization error is nonnegative") {
  auto w = make_workspace(6, 1.0);
  auto err = factorization_error(w.ens, w.aeig, w.aeig);
  CHECK(err.value >= 0.0);
  auto dev = diagonal_deviations(w.ens, w.aeig, {0.2});
  CHECK(err.value == Approx(dev.weighted_variance).margin(1e-12));
}

TEST_CASE("factorization error equals the diagonal-ensemble identity") {
  for (int L : {4, 6, 8}) {
    auto w = make_workspace(L, 1.0);
    auto err = factorization_error(w.ens, w.aeig, w.beig);
    double ita = infinite_time_average(w.ens, w.aeig, w.beig);
    double product = ensemble_expectation(w.ens, w.aeig) *
                     ensemble_expectation(w.ens, w.beig);
    CHECK(std::abs(err.value - (ita - product)) < 1e-10);
  }
}

TEST_CASE("cauchy-schwarz controls the cross factorization error") {
  auto w = make_workspace(6, 1.0);
  auto err = factorization_error(w.ens, w.aeig, w.beig);
  auto dev_a = diagonal_deviations(w.ens, w.aeig, {0.2});
  auto dev_b = diagonal_deviations(w.ens, w.beig, {0.2});
  CHECK(std::abs(err.value) <=
        std::sqrt(dev_a.weighted_variance * dev_b.weighted_variance) + 1e-14);
}

TEST_CASE("split at a threshold partitions the error sum") {
  auto w = make_workspace(6, 1.0);
  auto err = factorization_error(w.ens, w.aeig, w.beig, 0.1);
  CHECK(err.threshold == 0.1);
  CHECK(err.value == Approx(err.in_set + err.out_of_set).margin(1e-14));
  // with both deviations capped by the threshold, the in-set part obeys
  // |in_set| <= threshold^2
  CHECK(std::abs(err.in_set) <= 0.1 * 0.1 + 1e-14);
}

TEST_CASE("weak-ETH tails and factorization error shrink with system size") {
  // scaling run over the ETH family; the heaviest size dominates the
  // suite's runtime but pins the direction of both decays
  std::vector<double> tails;
  std::vector<double> errors;
  for (int L : {6, 8, 10, 12}) {
    auto w = make_workspace(L, 1.0);
    auto stats = diagonal_deviations(w.ens, w.aeig, {0.2});
    tails.push_back(stats.tail_masses[0]);
    errors.push_back(std::abs(factorization_error(w.ens, w.aeig, w.beig).value));
  }
  for (std::size_t i = 1; i < tails.size(); ++i) {
    CHECK(tails[i] <= tails[i - 1]);
    CHECK(errors[i] < errors[i - 1]);
  }
}
