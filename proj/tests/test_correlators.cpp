#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "corrflow/correlators.hpp"
#include "corrflow/spectral.hpp"
#include "corrflow/spinchain.hpp"

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
  EigenbasisOperator aeig;
};

Workspace eth_workspace(int L, double beta) {
  Workspace w;
  w.spectrum = diagonalize(build_hamiltonian(eth_spec(L)));
  w.ens = thermal_ensemble(w.spectrum, beta);
  w.aeig = to_eigenbasis(default_observable(eth_spec(L)), w.spectrum);
  return w;
}

EigenbasisOperator identity_in(const Spectrum& s) {
  EigenbasisOperator op;
  op.energies = s.energies;
  op.elements = Eigen::MatrixXcd::Identity(s.dim(), s.dim());
  return op;
}

}  // namespace

TEST_CASE("identity correlates to one at all times") {
  auto w = eth_workspace(4, 1.0);
  auto ident = identity_in(w.spectrum);
  for (double t : {0.0, 0.7, 13.0, -4.2}) {
    Complex c = correlation_trace(w.ens, ident, ident, t);
    CHECK(std::abs(c - Complex(1, 0)) < 1e-12);
  }
}

TEST_CASE("t = 0 value is tr(rho A B)") {
  auto w = eth_workspace(5, 1.0);
  Complex c0 = correlation_trace(w.ens, w.aeig, w.aeig, 0.0);
  CHECK(c0.real() == Approx(1.0).margin(1e-9));  // A^2 = 1
  CHECK(std::abs(c0.imag()) < 1e-12);
}

TEST_CASE("observable commuting with H gives a constant correlator") {
  // field-free Ising: H = Z0 Z1, A = Z0
  SpinChainSpec spec{.length = 2, .j1 = 1.0};
  auto s = diagonalize(build_hamiltonian(spec));
  auto ens = thermal_ensemble(s, 0.7);
  auto a = to_eigenbasis(build_pauli_string(single_site(0, PauliAxis::Z), 2), s);
  Complex c0 = correlation_trace(ens, a, a, 0.0);
  CHECK(c0.real() == Approx(1.0).margin(1e-12));  // tr(rho Z0^2)
  for (double t : {0.4, 2.0, 31.0}) {
    Complex ct = correlation_trace(ens, a, a, t);
    CHECK(std::abs(ct - c0) < 1e-10);
  }
}

TEST_CASE("time reversal conjugates the correlator") {
  auto w = eth_workspace(6, 1.0);
  for (double t : {0.3, 1.0, 5.5, 20.0}) {
    Complex plus = correlation_trace(w.ens, w.aeig, w.aeig, t);
    Complex minus = correlation_trace(w.ens, w.aeig, w.aeig, -t);
    CHECK(std::abs(minus - std::conj(plus)) < 1e-10);
  }
}

TEST_CASE("symmetric correlation basics") {
  auto w = eth_workspace(6, 1.0);
  CHECK(symmetric_correlation(w.ens, w.aeig, 0.0) == Approx(1.0).margin(1e-9));
  // equals the real part of the plain correlator
  for (double t : {1.0, 3.7}) {
    Complex c = correlation_trace(w.ens, w.aeig, w.aeig, t);
    double expected = 0.5 * (c + std::conj(c)).real();
    CHECK(symmetric_correlation(w.ens, w.aeig, t) ==
          Approx(expected).margin(1e-10));
  }
}

TEST_CASE("kubo correlation normalization and commuting limit") {
  auto w = eth_workspace(5, 1.0);
  CHECK(kubo_correlation(w.ens, w.aeig, 0.0) == 1.0);  // exact by construction

  SpinChainSpec ising{.length = 3, .lambda = 0.2, .j1 = 1.0};
  auto s = diagonalize(build_hamiltonian(ising));
  auto ens = thermal_ensemble(s, 0.9);
  auto z0 = to_eigenbasis(build_pauli_string(single_site(0, PauliAxis::Z), 3), s);
  for (double t : {0.0, 1.3, 8.0})
    CHECK(kubo_correlation(ens, z0, t) == Approx(1.0).margin(1e-10));
}

TEST_CASE("kubo rejects non-thermal ensembles") {
  auto w = eth_workspace(4, 1.0);
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(16, 1.0 / 16);
  auto custom = custom_ensemble(weights, w.spectrum.energies);
  CHECK_THROWS_AS(kubo_correlation(custom, w.aeig, 1.0), std::invalid_argument);
}

TEST_CASE("kubo approaches the normalized symmetric correlator as beta -> 0") {
  SpinChainSpec spec = eth_spec(4);
  auto s = diagonalize(build_hamiltonian(spec));
  auto ens = thermal_ensemble(s, 1e-4);
  auto a = to_eigenbasis(default_observable(spec), s);
  const double cs0 = symmetric_correlation(ens, a, 0.0);
  for (double t : {0.3, 1.0, 2.7}) {
    double kubo = kubo_correlation(ens, a, t);
    double sym = symmetric_correlation(ens, a, t) / cs0;
    CHECK(std::abs(kubo - sym) <= 1e-3);
  }
}

TEST_CASE("kubo pair weights are nonnegative") {
  for (double beta : {0.5, 2.0}) {
    auto s = diagonalize(build_hamiltonian(eth_spec(3)));
    auto ens = thermal_ensemble(s, beta);
    for (Eigen::Index j = 0; j < ens.dim(); ++j)
      for (Eigen::Index k = 0; k < ens.dim(); ++k) {
        double de = ens.energies[j] - ens.energies[k];
        double kappa = std::abs(de) < 1e-12
                           ? ens.beta * ens.weights[j]
                           : (ens.weights[k] - ens.weights[j]) / de;
        CHECK(kappa >= 0.0);
      }
  }
}

TEST_CASE("infinite-time average of the identity is one") {
  auto w = eth_workspace(4, 1.0);
  auto ident = identity_in(w.spectrum);
  CHECK(infinite_time_average(w.ens, ident, ident) == Approx(1.0).margin(1e-12));
}

TEST_CASE("infinite-time average matches the diagonal sum at beta = 0") {
  auto w = eth_workspace(5, 0.0);
  const Eigen::Index d = w.ens.dim();
  long double oracle = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    double akk = w.aeig.elements(k, k).real();
    oracle += akk * akk / static_cast<double>(d);
  }
  double value = infinite_time_average(w.ens, w.aeig, w.aeig);
  CHECK(value >= 0.0);
  CHECK(value == Approx(static_cast<double>(oracle)).margin(1e-12));
}

TEST_CASE("series evaluation agrees with the single-point path") {
  auto w = eth_workspace(6, 1.0);
  auto series =
      evaluate_series(w.ens, w.aeig, CorrelationKind::plain, 0.37, 300);
  for (std::size_t k : {std::size_t{0}, std::size_t{41}, std::size_t{257},
                        std::size_t{300}}) {
    Complex direct = correlation_trace(w.ens, w.aeig, w.aeig, 0.37 * k);
    CHECK(std::abs(series.values[k] - direct) < 1e-11);
  }
  CHECK(series.c_zero == series.values[0].real());
  CHECK(series.autocorrelation);
  CHECK(series.c_infinity ==
        Approx(infinite_time_average(w.ens, w.aeig, w.aeig)).margin(1e-12));
}

TEST_CASE("autocorrelation series is bounded by its t = 0 value") {
  auto w = eth_workspace(6, 1.0);
  auto series =
      evaluate_series(w.ens, w.aeig, CorrelationKind::plain, 0.05, 4000);
  for (const Complex& v : series.values)
    CHECK(std::abs(v) <= series.c_zero + 1e-9);
}

TEST_CASE("symmetric and kubo series are real") {
  auto w = eth_workspace(5, 1.0);
  auto sym =
      evaluate_series(w.ens, w.aeig, CorrelationKind::symmetric, 0.1, 500);
  auto kubo = evaluate_series(w.ens, w.aeig, CorrelationKind::kubo, 0.1, 500);
  CHECK(kubo.values[0].real() == Approx(1.0).margin(1e-14));
  for (std::size_t k = 0; k < sym.values.size(); ++k) {
    CHECK(std::abs(sym.values[k].imag()) < 1e-10);
    CHECK(std::abs(kubo.values[k].imag()) < 1e-10);
  }
}

TEST_CASE("infinite-time average matches the long-time running average") {
  auto w = eth_workspace(6, 1.0);
  auto series =
      evaluate_series(w.ens, w.aeig, CorrelationKind::plain, 0.01, 1000000);
  long double mean = 0.0L;
  for (const Complex& v : series.values) mean += v.real();
  mean /= static_cast<long double>(series.values.size());
  double ita = infinite_time_average(w.ens, w.aeig, w.aeig);
  CHECK(std::abs(static_cast<double>(mean) - ita) <= 0.05 * std::abs(ita));
}

TEST_CASE("running time average on hand-built series") {
  CorrelationSeries s;
  s.dt = 1.0;
  s.c_infinity = 2.0;
  s.values = {Complex(2, 0), Complex(2, 0), Complex(2, 0)};
  auto r = running_time_average(s);
  CHECK(r == std::vector<double>{0.0, 0.0, 0.0});

  s.values = {Complex(4, 0), Complex(2, 0)};  // deviations^2: 4, 0
  r = running_time_average(s);
  CHECK(r[0] == Approx(4.0));
  CHECK(r[1] == Approx(2.0));

  s.values.clear();
  CHECK_THROWS_AS(running_time_average(s), std::invalid_argument);
}

TEST_CASE("running average discretization error is first order in dt") {
  auto w = eth_workspace(6, 1.0);
  auto avg_at = [&](double dt) {
    auto steps = static_cast<std::size_t>(std::llround(10.0 / dt));
    auto series =
        evaluate_series(w.ens, w.aeig, CorrelationKind::plain, dt, steps);
    return running_time_average(series).back();
  };
  double coarse = avg_at(0.002);
  double mid = avg_at(0.001);
  double fine = avg_at(0.0005);
  double d1 = std::abs(coarse - mid);
  double d2 = std::abs(mid - fine);
  CHECK(d2 <= d1 * 1.2 + 1e-12);    // refinement does not grow the change
  CHECK(d1 / mid < 5e-3);           // and the change is already tiny
}

TEST_CASE("fluctuation variance vanishes for conserved observables") {
  SpinChainSpec spec{.length = 3, .lambda = 0.3, .j1 = 1.0};
  auto s = diagonalize(build_hamiltonian(spec));
  auto ens = thermal_ensemble(s, 1.0);
  auto z0 = to_eigenbasis(build_pauli_string(single_site(0, PauliAxis::Z), 3), s);
  auto rep = fluctuation_variance(ens, z0, z0);
  CHECK(rep.sigma_c_squared_exact < 1e-18);
}

TEST_CASE("fluctuation variance obeys the purity bound") {
  auto w = eth_workspace(6, 1.0);
  auto audit = audit_degeneracies(w.spectrum);
  FluctuationOptions opts;
  opts.audit = &audit;
  auto rep = fluctuation_variance(w.ens, w.aeig, w.aeig, opts);
  CHECK(rep.sigma_c_squared_exact >= 0.0);
  CHECK_FALSE(rep.gap_degeneracy_flag);
  CHECK(rep.sigma_c_squared_exact <= rep.theorem2_bound);
}

TEST_CASE("fluctuation variance matches its time-domain estimate") {
  auto w = eth_workspace(6, 1.0);
  FluctuationOptions opts;
  opts.with_time_domain = true;
  opts.dt = 5e-3;
  opts.horizon = 1e4;
  auto rep = fluctuation_variance(w.ens, w.aeig, w.aeig, opts);
  CHECK(rep.horizon == 1e4);
  CHECK(std::abs(rep.time_domain_estimate - rep.sigma_c_squared_exact) <=
        0.05 * rep.sigma_c_squared_exact);

  opts.scheme = TimeAverageScheme::trapezoid;
  auto trap = fluctuation_variance(w.ens, w.aeig, w.aeig, opts);
  CHECK(std::abs(trap.time_domain_estimate - rep.time_domain_estimate) <
        0.01 * rep.sigma_c_squared_exact);
}

TEST_CASE("operands from different spectra are rejected") {
  auto w4 = eth_workspace(4, 1.0);
  auto w5 = eth_workspace(5, 1.0);
  CHECK_THROWS_AS(correlation_trace(w4.ens, w5.aeig, w5.aeig, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(infinite_time_average(w4.ens, w4.aeig, w5.aeig),
                  std::invalid_argument);
}
