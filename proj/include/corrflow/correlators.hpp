#pragma once

// Two-point functions from spectral data. Everything is a weighted
// trigonometric sum
//
//   C(t) = sum_{jk} W_jk exp(-i (E_j - E_k) t),
//
// with the weight matrix W fixed by the correlation kind:
//   plain      W_jk = rho_jj A_jk B_kj
//   symmetric  W_jk = (rho_jj + rho_kk)/2 |A_jk|^2
//   kubo       W_jk = (rho_kk - rho_jj)/(E_j - E_k) |A_jk|^2, normalized
//              so the value at t = 0 is 1; degenerate pairs take the
//              analytic limit beta * rho_jj.
//
// The global phase convention is exp(-i (E_j - E_k) t).
//
// Grid evaluation precomputes W once and runs batched real GEMMs against
// cos/sin phase columns, O(d^2) per time step.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "corrflow/spectral.hpp"

namespace corrflow {

enum class CorrelationKind { plain, symmetric, kubo };

/// A correlation function sampled on the grid t_k = k * dt.
struct CorrelationSeries {
  CorrelationKind kind = CorrelationKind::plain;
  double dt = 0.0;
  std::vector<Complex> values;
  double c_infinity = 0.0;  // diagonal (infinite-time) average
  double c_zero = 0.0;      // value at t = 0
  bool autocorrelation = false;
};

enum class TimeAverageScheme { running_mean, trapezoid };

struct FluctuationReport {
  double sigma_c_squared_exact = 0.0;
  double theorem2_bound = 0.0;
  bool gap_degeneracy_flag = false;  // exact formula unreliable if set
  double time_domain_estimate = std::numeric_limits<double>::quiet_NaN();
  double horizon = 0.0;
};

namespace detail {

// Weight matrix for one correlation kind; `normalizer` rescales the raw
// phase sum (1 except for Kubo, where it is the raw t=0 sum).
struct SpectralWeights {
  Eigen::MatrixXcd w;
  double normalizer = 1.0;
  double diagonal_sum = 0.0;  // sum_j W_jj / normalizer
};

inline Eigen::MatrixXd kubo_weight_matrix(const ThermalEnsemble& ens,
                                          const EigenbasisOperator& a) {
  const Eigen::Index d = ens.dim();
  Eigen::MatrixXd kw(d, d);
  const double degeneracy_eps = 1e-12;
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double de = ens.energies[j] - ens.energies[k];
      double kappa = (std::abs(de) < degeneracy_eps)
                         ? ens.beta * ens.weights[j]
                         : (ens.weights[k] - ens.weights[j]) / de;
      kw(j, k) = kappa * std::norm(a.elements(j, k));
    }
  }
  return kw;
}

inline SpectralWeights make_weights(const ThermalEnsemble& ens,
                                    const EigenbasisOperator& a,
                                    const EigenbasisOperator& b,
                                    CorrelationKind kind) {
  require_same_basis(ens, a, "correlators");
  require_same_basis(a, b, "correlators");
  const Eigen::Index d = ens.dim();
  SpectralWeights sw;
  switch (kind) {
    case CorrelationKind::plain:
      sw.w = ens.weights.asDiagonal() *
             a.elements.cwiseProduct(b.elements.transpose());
      break;
    case CorrelationKind::symmetric: {
      Eigen::MatrixXd half(d, d);
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index j = 0; j < d; ++j)
          half(j, k) = 0.5 * (ens.weights[j] + ens.weights[k]) *
                       std::norm(a.elements(j, k));
      sw.w = half.cast<Complex>();
      break;
    }
    case CorrelationKind::kubo: {
      if (!ens.gibbs)
        throw std::invalid_argument(
            "correlators: Kubo kind requires a thermal (Gibbs) ensemble");
      Eigen::MatrixXd kw = kubo_weight_matrix(ens, a);
      long double norm = 0.0L;
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index j = 0; j < d; ++j) norm += kw(j, k);
      if (!(norm > 0.0L))
        throw std::invalid_argument("correlators: Kubo normalization vanishes");
      sw.w = kw.cast<Complex>();
      sw.normalizer = static_cast<double>(norm);
      break;
    }
  }
  long double diag = 0.0L;
  for (Eigen::Index j = 0; j < d; ++j) diag += sw.w(j, j).real();
  sw.diagonal_sum = static_cast<double>(diag / sw.normalizer);
  return sw;
}

// C(t) = x^T W conj(x) with x_j = exp(-i E_j t); one O(d^2) product.
inline Complex phase_sum_at(const SpectralWeights& sw,
                            const Eigen::VectorXd& energies, double t) {
  const Eigen::Index d = energies.size();
  Eigen::VectorXcd x(d);
  for (Eigen::Index j = 0; j < d; ++j)
    x[j] = std::polar(1.0, -energies[j] * t);
  Eigen::VectorXcd y = sw.w * x.conjugate();
  Complex c = (x.transpose() * y).value();
  return c / sw.normalizer;
}

// Batched grid evaluation: real-weight fast path packs cos/sin columns
// into one real GEMM per batch.
inline std::vector<Complex> phase_sum_grid(const SpectralWeights& sw,
                                           const Eigen::VectorXd& energies,
                                           double dt, std::size_t steps) {
  const Eigen::Index d = energies.size();
  const std::size_t n = steps + 1;
  std::vector<Complex> out(n);
  constexpr std::size_t kBatch = 256;

  if (sw.w.imag().isZero(0.0)) {
    Eigen::MatrixXd wr = sw.w.real();
    Eigen::MatrixXd xr(d, 2 * kBatch), y(d, 2 * kBatch);
    for (std::size_t base = 0; base < n; base += kBatch) {
      const std::size_t nb = std::min(kBatch, n - base);
      for (std::size_t b = 0; b < nb; ++b) {
        const double t = static_cast<double>(base + b) * dt;
        xr.col(b) = (energies.array() * t).cos();
        xr.col(nb + b) = (energies.array() * t).sin();
      }
      y.leftCols(2 * nb).noalias() = wr * xr.leftCols(2 * nb);
      for (std::size_t b = 0; b < nb; ++b) {
        // x = c - i s, W conj(x) = yc + i ys
        double re = xr.col(b).dot(y.col(b)) + xr.col(nb + b).dot(y.col(nb + b));
        double im = xr.col(b).dot(y.col(nb + b)) - xr.col(nb + b).dot(y.col(b));
        out[base + b] = Complex(re, im) / sw.normalizer;
      }
    }
  } else {
    Eigen::MatrixXcd x(d, kBatch), y(d, kBatch);
    for (std::size_t base = 0; base < n; base += kBatch) {
      const std::size_t nb = std::min(kBatch, n - base);
      for (std::size_t b = 0; b < nb; ++b) {
        const double t = static_cast<double>(base + b) * dt;
        for (Eigen::Index j = 0; j < d; ++j)
          x(j, b) = std::polar(1.0, -energies[j] * t);
      }
      y.leftCols(nb).noalias() = sw.w * x.leftCols(nb).conjugate();
      for (std::size_t b = 0; b < nb; ++b) {
        Complex c = (x.col(b).transpose() * y.col(b)).value();
        out[base + b] = c / sw.normalizer;
      }
    }
  }
  return out;
}

}  // namespace detail

/// tr{rho A(t) B} as the spectral phase sum.
inline Complex correlation_trace(const ThermalEnsemble& ens,
                                 const EigenbasisOperator& a,
                                 const EigenbasisOperator& b, double t) {
  auto sw = detail::make_weights(ens, a, b, CorrelationKind::plain);
  return detail::phase_sum_at(sw, ens.energies, t);
}

/// (1/2) tr{rho {A, A(t)}}; real by construction.
inline double symmetric_correlation(const ThermalEnsemble& ens,
                                    const EigenbasisOperator& a, double t) {
  auto sw = detail::make_weights(ens, a, a, CorrelationKind::symmetric);
  return detail::phase_sum_at(sw, ens.energies, t).real();
}

/// Kubo linear-response correlation function, normalized to 1 at t = 0.
inline double kubo_correlation(const ThermalEnsemble& ens,
                               const EigenbasisOperator& a, double t) {
  auto sw = detail::make_weights(ens, a, a, CorrelationKind::kubo);
  // Numerator and the t=0 normalizer go through the same code path, so
  // the value at t = 0 is exactly 1.
  Complex num = detail::phase_sum_at(sw, ens.energies, t);
  Complex den = detail::phase_sum_at(sw, ens.energies, 0.0);
  return num.real() / den.real();
}

/// Diagonal-ensemble average sum_k rho_kk A_kk B_kk (the infinite-time
/// limit of the running average for non-degenerate spectra).
inline double infinite_time_average(const ThermalEnsemble& ens,
                                    const EigenbasisOperator& a,
                                    const EigenbasisOperator& b) {
  require_same_basis(ens, a, "infinite_time_average");
  require_same_basis(a, b, "infinite_time_average");
  long double acc = 0.0L;
  for (Eigen::Index k = 0; k < ens.dim(); ++k)
    acc += static_cast<long double>(ens.weights[k]) *
           (a.elements(k, k).real() * b.elements(k, k).real());
  return static_cast<double>(acc);
}

/// Samples C(t) on t_k = k*dt for k = 0..steps.
inline CorrelationSeries evaluate_series(const ThermalEnsemble& ens,
                                         const EigenbasisOperator& a,
                                         const EigenbasisOperator& b,
                                         CorrelationKind kind, double dt,
                                         std::size_t steps) {
  if (!(dt > 0)) throw std::invalid_argument("evaluate_series: dt must be > 0");
  auto sw = detail::make_weights(ens, a, b, kind);
  CorrelationSeries series;
  series.kind = kind;
  series.dt = dt;
  series.values = detail::phase_sum_grid(sw, ens.energies, dt, steps);
  series.c_infinity = sw.diagonal_sum;
  series.c_zero = series.values[0].real();
  series.autocorrelation =
      (&a == &b) || (a.elements.array() == b.elements.array()).all();
  return series;
}

inline CorrelationSeries evaluate_series(const ThermalEnsemble& ens,
                                         const EigenbasisOperator& a,
                                         CorrelationKind kind, double dt,
                                         std::size_t steps) {
  return evaluate_series(ens, a, a, kind, dt, steps);
}

/// Cumulative mean of |C(t_i) - C_inf|^2; element k averages grid points
/// 0..k.
inline std::vector<double> running_time_average(const CorrelationSeries& s) {
  if (s.values.empty())
    throw std::invalid_argument("running_time_average: empty series");
  std::vector<double> out(s.values.size());
  long double acc = 0.0L;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    acc += std::norm(s.values[k] - Complex(s.c_infinity, 0.0));
    out[k] = static_cast<double>(acc / static_cast<long double>(k + 1));
  }
  return out;
}

struct FluctuationOptions {
  double degeneracy_tol = kDefaultDegeneracyTol;
  const DegeneracyReport* audit = nullptr;  // recomputed when null
  bool with_time_domain = false;
  double dt = 5e-3;
  double horizon = 1e4;
  TimeAverageScheme scheme = TimeAverageScheme::running_mean;
};

/// Exact spectral fluctuation variance
///   sigma_C^2 = sum_{j != k} rho_jj rho_kk |A_jk|^2 |B_jk|^2
/// plus the operator-norm bound ||A|| ||B|| max|A_kj B_jk| tr(rho^2),
/// and optionally a finite-horizon time-domain estimate.
inline FluctuationReport fluctuation_variance(
    const ThermalEnsemble& ens, const EigenbasisOperator& a,
    const EigenbasisOperator& b, const FluctuationOptions& opts = {}) {
  require_same_basis(ens, a, "fluctuation_variance");
  require_same_basis(a, b, "fluctuation_variance");
  const Eigen::Index d = ens.dim();

  FluctuationReport rep;
  long double exact = 0.0L;
  double max_offdiag = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j == k) continue;
      double a2 = std::norm(a.elements(j, k));
      double b2 = std::norm(b.elements(j, k));
      exact += static_cast<long double>(ens.weights[j]) * ens.weights[k] *
               (a2 * b2);
      max_offdiag =
          std::max(max_offdiag, std::abs(a.elements(k, j) * b.elements(j, k)));
    }
  }
  rep.sigma_c_squared_exact = static_cast<double>(exact);

  double norm_a = a.elements.selfadjointView<Eigen::Lower>().operatorNorm();
  double norm_b = b.elements.selfadjointView<Eigen::Lower>().operatorNorm();
  rep.theorem2_bound = norm_a * norm_b * max_offdiag * ens.purity;

  if (opts.audit) {
    rep.gap_degeneracy_flag = opts.audit->gaps_degenerate();
  } else {
    Spectrum view;
    view.energies = ens.energies;
    rep.gap_degeneracy_flag =
        audit_degeneracies(view, opts.degeneracy_tol).gaps_degenerate();
  }

  if (opts.with_time_domain) {
    auto steps = static_cast<std::size_t>(std::llround(opts.horizon / opts.dt));
    auto series =
        evaluate_series(ens, a, b, CorrelationKind::plain, opts.dt, steps);
    const Complex cinf(series.c_infinity, 0.0);
    long double acc = 0.0L;
    if (opts.scheme == TimeAverageScheme::running_mean) {
      for (const Complex& v : series.values) {
        Complex dev = v - cinf;
        acc += static_cast<long double>((dev * dev).real());
      }
      acc /= static_cast<long double>(series.values.size());
    } else {
      for (std::size_t i = 0; i < series.values.size(); ++i) {
        Complex dev = series.values[i] - cinf;
        long double f = (dev * dev).real();
        acc += (i == 0 || i + 1 == series.values.size()) ? f / 2 : f;
      }
      acc /= static_cast<long double>(steps);
    }
    rep.time_domain_estimate = static_cast<double>(acc);
    rep.horizon = opts.horizon;
  }
  return rep;
}

}  // namespace corrflow
