#pragma once

// Gap-weight distributions over energy gaps G = E_j - E_k and the window
// statistics built on them:
//
//   xi(x)      largest weight inside any closed window [G_l, G_l + x]
//              anchored at an existing gap value
//   a(eps)     xi(eps)/eps * sigma_G
//   delta(eps) xi(eps)
//   rhs(T)     3*pi*(a/(sigma_G*T) + delta)
//
// Exact xi runs a two-pointer sweep over the sorted entries (linear after
// the sort); a seeded Monte Carlo variant samples window anchors from
// N(mean_gap, sigma_G) and never exceeds the exact value, since any
// real-anchored window is contained in an entry-anchored one of the same
// width.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "corrflow/correlators.hpp"
#include "corrflow/rng.hpp"
#include "corrflow/spectral.hpp"

namespace corrflow {

inline constexpr double kPi = 3.14159265358979323846;

enum class GapKind { plain_v, symmetric_v, kubo_w };

struct GapEntry {
  double gap = 0.0;
  double weight = 0.0;
};

/// Normalized weights over gap values, sorted ascending with exact
/// duplicates merged. `prefix[i]` holds the weight of entries [0, i), so
/// window sums are prefix differences and inherit its monotonicity.
struct GapDistribution {
  GapKind kind = GapKind::plain_v;
  std::vector<GapEntry> entries;
  std::vector<double> prefix;
  double total_weight = 0.0;
  double discarded_weight = 0.0;  // mass dropped by the weight cutoff
  double normalizer = 0.0;        // the kind's C(0) before normalization
  double mean_gap = 0.0;
  double sigma_gap = 0.0;         // moment-formula sigma_G
  bool thermal_source = false;

  std::size_t size() const { return entries.size(); }
  double max_abs_gap() const {
    if (entries.empty()) return 0.0;
    return std::max(std::abs(entries.front().gap),
                    std::abs(entries.back().gap));
  }
  double max_single_weight() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.weight);
    return m;
  }
};

/// Sorts, merges exact-duplicate gap values and fills prefix sums and
/// moments. Entry point for hand-built and generated distributions.
inline GapDistribution make_gap_distribution(std::vector<GapEntry> raw,
                                             GapKind kind,
                                             double normalizer = 1.0,
                                             double discarded = 0.0,
                                             bool thermal = false) {
  std::stable_sort(raw.begin(), raw.end(),
                   [](const GapEntry& a, const GapEntry& b) {
                     return a.gap < b.gap;
                   });
  GapDistribution dist;
  dist.kind = kind;
  dist.normalizer = normalizer;
  dist.discarded_weight = discarded;
  dist.thermal_source = thermal;
  dist.entries.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    long double w = 0.0L;
    const double g = raw[i].gap;
    std::size_t j = i;
    while (j < raw.size() && raw[j].gap == g) {
      w += raw[j].weight;
      ++j;
    }
    dist.entries.push_back({g, static_cast<double>(w)});
    i = j;
  }
  dist.prefix.resize(dist.entries.size() + 1);
  long double acc = 0.0L, m1 = 0.0L, m2 = 0.0L;
  dist.prefix[0] = 0.0;
  for (std::size_t i = 0; i < dist.entries.size(); ++i) {
    const auto& e = dist.entries[i];
    acc += e.weight;
    dist.prefix[i + 1] = static_cast<double>(acc);
    m1 += static_cast<long double>(e.weight) * e.gap;
    m2 += static_cast<long double>(e.weight) * e.gap * e.gap;
  }
  dist.total_weight = dist.entries.empty() ? 0.0 : dist.prefix.back();
  dist.mean_gap = static_cast<double>(m1);
  long double var = m2 - m1 * m1;
  dist.sigma_gap = var > 0.0L ? std::sqrt(static_cast<double>(var)) : 0.0;
  return dist;
}

/// The deviation part of a distribution: the exact zero-gap class is
/// removed and the remaining weights stay C(0)-normalized (the total
/// drops below one). This is the distribution the timescale bounds see:
/// the deviation C(t) - C_inf is a phase sum over nonzero gaps only, and
/// the uniform-average lemma applied to a subnormalized distribution
/// still yields <f>_T <= 3 pi xi(1/T). Both gap moments are unchanged
/// since the zero-gap class contributes to neither.
inline GapDistribution deviation_part(const GapDistribution& dist) {
  std::vector<GapEntry> kept;
  kept.reserve(dist.entries.size());
  for (const auto& e : dist.entries)
    if (e.gap != 0.0) kept.push_back(e);
  return make_gap_distribution(std::move(kept), dist.kind, dist.normalizer,
                               dist.discarded_weight, dist.thermal_source);
}

/// Weight of the exact zero-gap class.
inline double zero_gap_mass(const GapDistribution& dist) {
  for (const auto& e : dist.entries)
    if (e.gap == 0.0) return e.weight;
  return 0.0;
}

/// Enumerates all d^2 level pairs (diagonal included) and assembles the
/// kind's normalized weights. Entries with weight below `weight_cutoff`
/// are dropped into discarded_weight, which downstream turns into a
/// rigorous slack on delta.
inline GapDistribution build_gap_distribution(const ThermalEnsemble& ens,
                                              const EigenbasisOperator& a,
                                              GapKind kind,
                                              double weight_cutoff = 0.0) {
  require_same_basis(ens, a, "build_gap_distribution");
  if (kind == GapKind::kubo_w && !ens.gibbs)
    throw std::invalid_argument(
        "build_gap_distribution: kubo_w requires a thermal ensemble");
  const Eigen::Index d = ens.dim();

  Eigen::MatrixXd w(d, d);
  if (kind == GapKind::kubo_w) {
    w = detail::kubo_weight_matrix(ens, a);
  } else {
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index j = 0; j < d; ++j) {
        double rho = kind == GapKind::plain_v
                         ? ens.weights[j]
                         : 0.5 * (ens.weights[j] + ens.weights[k]);
        w(j, k) = rho * std::norm(a.elements(j, k));
      }
  }

  long double norm = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index j = 0; j < d; ++j) norm += w(j, k);
  if (!(norm > 0.0L))
    throw std::invalid_argument(
        "build_gap_distribution: C(0) vanishes, observable has no weight in "
        "the ensemble");
  const double c0 = static_cast<double>(norm);

  std::vector<GapEntry> raw;
  raw.reserve(static_cast<std::size_t>(d) * d);
  long double discarded = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double p = w(j, k) / c0;
      if (p == 0.0) continue;
      if (p < weight_cutoff) {
        discarded += p;
        continue;
      }
      raw.push_back({ens.energies[j] - ens.energies[k], p});
    }
  }
  return make_gap_distribution(std::move(raw), kind, c0,
                               static_cast<double>(discarded), ens.gibbs);
}

/// Exact window maximum of Definition xi: two-pointer sweep over the
/// sorted entries, inclusive window endpoints.
inline double xi_exact(const GapDistribution& dist, double x) {
  if (x < 0) throw std::invalid_argument("xi_exact: window width must be >= 0");
  const auto& e = dist.entries;
  if (e.empty()) return 0.0;
  double best = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (j < i) j = i;
    const double hi = e[i].gap + x;
    while (j + 1 < e.size() && e[j + 1].gap <= hi) ++j;
    // the window always contains its anchor entry, so its weight is a
    // floor on the prefix difference
    best = std::max(best,
                    std::max(dist.prefix[j + 1] - dist.prefix[i], e[i].weight));
  }
  return best;
}

/// Monte Carlo xi: window anchors are existing gap values G_l selected by
/// normal draws from N(mean_gap, sigma_gap) snapped to the nearest entry.
/// The anchor set is a subset of the exact sweep's, so the estimate never
/// exceeds the exact value. Deterministic for fixed (seed, samples).
inline double xi_monte_carlo(const GapDistribution& dist, double x,
                             std::uint64_t samples, std::uint64_t seed) {
  if (x < 0)
    throw std::invalid_argument("xi_monte_carlo: window width must be >= 0");
  if (samples < 1)
    throw std::invalid_argument("xi_monte_carlo: need at least one sample");
  if (dist.entries.empty())
    throw std::invalid_argument("xi_monte_carlo: empty distribution");

  const auto& e = dist.entries;
  double best = 0.0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    double draw =
        dist.mean_gap + dist.sigma_gap * counter_normal(seed, 0x1a5e, s);
    auto it = std::lower_bound(
        e.begin(), e.end(), draw,
        [](const GapEntry& ge, double v) { return ge.gap < v; });
    std::size_t i;
    if (it == e.begin()) {
      i = 0;
    } else if (it == e.end()) {
      i = e.size() - 1;
    } else {
      std::size_t above = static_cast<std::size_t>(it - e.begin());
      i = (e[above].gap - draw < draw - e[above - 1].gap) ? above : above - 1;
    }
    const double hi = e[i].gap + x;
    auto end = std::upper_bound(
        e.begin() + i, e.end(), hi,
        [](double v, const GapEntry& ge) { return v < ge.gap; });
    auto j = static_cast<std::size_t>(end - e.begin());
    best = std::max(best,
                    std::max(dist.prefix[j] - dist.prefix[i], e[i].weight));
  }
  return best;
}

enum class XiMethod { exact, monte_carlo };

struct WindowStats {
  double epsilon = 0.0;
  double xi_of_epsilon = 0.0;  // includes the discarded-weight slack
  double a = 0.0;
  double delta = 0.0;
  double sigma_g = 0.0;
  XiMethod method = XiMethod::exact;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  bool sigma_g_zero = false;  // a undefined; delta still reported
};

inline WindowStats window_stats(const GapDistribution& dist, double epsilon,
                                XiMethod method = XiMethod::exact,
                                std::uint64_t samples = 10000,
                                std::uint64_t seed = 1) {
  if (!(epsilon > 0))
    throw std::invalid_argument("window_stats: epsilon must be > 0");
  WindowStats ws;
  ws.epsilon = epsilon;
  ws.method = method;
  double xi = method == XiMethod::exact
                  ? xi_exact(dist, epsilon)
                  : xi_monte_carlo(dist, epsilon, samples, seed);
  if (method == XiMethod::monte_carlo) {
    ws.samples = samples;
    ws.seed = seed;
  }
  ws.xi_of_epsilon = xi + dist.discarded_weight;
  ws.delta = ws.xi_of_epsilon;
  ws.sigma_g = dist.sigma_gap;
  if (dist.sigma_gap == 0.0) {
    ws.sigma_g_zero = true;
    ws.a = std::numeric_limits<double>::quiet_NaN();
  } else {
    ws.a = ws.xi_of_epsilon * dist.sigma_gap / epsilon;
  }
  return ws;
}

/// sigma_G through the commutator-trace route: elementwise sums over the
/// eigenbasis matrix elements, independent of the assembled distribution.
/// The first moment of the symmetric and Kubo distributions vanishes by
/// j<->k antisymmetry; that is asserted rather than assumed.
inline double sigma_g_commutator(const ThermalEnsemble& ens,
                                 const EigenbasisOperator& a, GapKind kind) {
  require_same_basis(ens, a, "sigma_g_commutator");
  const Eigen::Index d = ens.dim();
  long double c0 = 0.0L, m1 = 0.0L, m2 = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double g = ens.energies[j] - ens.energies[k];
      const double a2 = std::norm(a.elements(j, k));
      double wjk = 0.0;
      switch (kind) {
        case GapKind::plain_v:
          wjk = ens.weights[j] * a2;
          break;
        case GapKind::symmetric_v:
          wjk = 0.5 * (ens.weights[j] + ens.weights[k]) * a2;
          break;
        case GapKind::kubo_w: {
          if (!ens.gibbs)
            throw std::invalid_argument(
                "sigma_g_commutator: kubo_w requires a thermal ensemble");
          double kappa = (std::abs(g) < 1e-12)
                             ? ens.beta * ens.weights[j]
                             : (ens.weights[k] - ens.weights[j]) / g;
          wjk = kappa * a2;
          break;
        }
      }
      c0 += wjk;
      m1 += static_cast<long double>(wjk) * g;   // tr{rho [H,A] A}-type term
      m2 += static_cast<long double>(wjk) * g * g;  // tr{rho [A,H][H,A]}-type
    }
  }
  if (!(c0 > 0.0L))
    throw std::invalid_argument("sigma_g_commutator: C(0) vanishes");
  long double mean = m1 / c0;
  if (kind != GapKind::plain_v && std::abs(static_cast<double>(mean)) > 1e-10)
    throw std::runtime_error(
        "sigma_g_commutator: first moment expected to vanish, got " +
        std::to_string(static_cast<double>(mean)));
  long double var = m2 / c0 - mean * mean;
  return var > 0.0L ? std::sqrt(static_cast<double>(var)) : 0.0;
}

/// window_stats with the sigma_G cross-check against the commutator
/// route; disagreement beyond `tol` throws.
inline WindowStats window_stats_checked(const GapDistribution& dist,
                                        double epsilon,
                                        const ThermalEnsemble& ens,
                                        const EigenbasisOperator& a,
                                        XiMethod method = XiMethod::exact,
                                        std::uint64_t samples = 10000,
                                        std::uint64_t seed = 1,
                                        double tol = 1e-8) {
  WindowStats ws = window_stats(dist, epsilon, method, samples, seed);
  double commutator = sigma_g_commutator(ens, a, dist.kind);
  if (std::abs(commutator - dist.sigma_gap) > tol)
    throw std::runtime_error(
        "window_stats: sigma_G moment/commutator disagreement: " +
        std::to_string(dist.sigma_gap) + " vs " + std::to_string(commutator));
  return ws;
}

/// Right-hand side of the equilibration bound, 3*pi*(a/(sigma_G T) + delta).
inline double bound_rhs(const WindowStats& stats, double T) {
  if (!(T > 0)) throw std::invalid_argument("bound_rhs: T must be > 0");
  if (stats.sigma_g_zero)
    throw std::invalid_argument(
        "bound_rhs: sigma_G = 0, timescale bound undefined");
  return 3.0 * kPi * (stats.a / (stats.sigma_g * T) + stats.delta);
}

/// Grid comparison of the bound: running average of the normalized
/// squared deviation against rhs(T).
struct BoundReport {
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> rhs;
  double epsilon = 0.0;
  double tightness_ratio = 0.0;  // rhs/lhs at the last grid time
};

// ---------------------------------------------------------------------
// Uniform-average property check, <f>_T <= 3 pi xi(1/T) for
// f(t) = |sum_a p_a exp(i G_a t)|^2.
// ---------------------------------------------------------------------

struct Lemma2Point {
  double T = 0.0;
  double average = 0.0;          // trapezoid quadrature of <f>_T
  double refined_average = 0.0;  // halved step, 0 when not requested
  double bound = 0.0;            // 3 pi xi(1/T)
  bool violated = false;
};

struct Lemma2Report {
  std::vector<Lemma2Point> points;
  bool any_violation = false;
  double max_refinement_change = 0.0;
};

namespace detail {

inline double uniform_average_f(const GapDistribution& dist, double T,
                                double step) {
  const auto& e = dist.entries;
  const std::size_t m = e.size();
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(T / step)));
  const double h = T / static_cast<double>(n);

  std::vector<Complex> z(m, Complex(1.0, 0.0));
  std::vector<Complex> rot(m);
  for (std::size_t i = 0; i < m; ++i)
    rot[i] = std::polar(1.0, e[i].gap * h);

  auto f_now = [&]() {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
      re += e[i].weight * z[i].real();
      im += e[i].weight * z[i].imag();
    }
    return static_cast<double>(re * re + im * im);
  };

  long double acc = f_now() / 2;
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) z[i] *= rot[i];
    acc += f_now();
  }
  for (std::size_t i = 0; i < m; ++i) z[i] *= rot[i];
  acc += f_now() / 2;
  return static_cast<double>(acc / static_cast<long double>(n));
}

}  // namespace detail

inline Lemma2Report lemma2_property_check(const GapDistribution& dist,
                                          const std::vector<double>& t_grid,
                                          bool refine = true) {
  if (dist.entries.empty())
    throw std::invalid_argument("lemma2_property_check: empty distribution");
  if (dist.discarded_weight != 0.0)
    throw std::invalid_argument(
        "lemma2_property_check: requires an uncut distribution");
  const double max_g = dist.max_abs_gap();
  const double step = max_g > 0 ? std::min(0.01, 0.01 / max_g) : 0.01;

  Lemma2Report rep;
  for (double T : t_grid) {
    if (!(T > 0))
      throw std::invalid_argument("lemma2_property_check: T must be > 0");
    Lemma2Point p;
    p.T = T;
    p.average = detail::uniform_average_f(dist, T, step);
    p.bound = 3.0 * kPi * xi_exact(dist, 1.0 / T);
    p.violated = p.average > p.bound;
    if (refine) {
      p.refined_average = detail::uniform_average_f(dist, T, step / 2);
      rep.max_refinement_change = std::max(
          rep.max_refinement_change, std::abs(p.refined_average - p.average));
    }
    rep.any_violation = rep.any_violation || p.violated;
    rep.points.push_back(p);
  }
  return rep;
}

/// Seeded random distribution for the property suite: gap count uniform
/// in [1, max_gaps], gaps uniform in [-gap_range, gap_range], weights
/// Dirichlet-uniform.
inline GapDistribution random_distribution(std::uint64_t seed,
                                           std::uint64_t index,
                                           int max_gaps = 50,
                                           double gap_range = 5.0) {
  if (max_gaps < 1)
    throw std::invalid_argument("random_distribution: max_gaps must be >= 1");
  double u0 = counter_uniform(seed, index, 0);
  int m = 1 + std::min(max_gaps - 1,
                       static_cast<int>(u0 * static_cast<double>(max_gaps)));
  std::vector<GapEntry> raw(m);
  long double wsum = 0.0L;
  for (int i = 0; i < m; ++i) {
    double ug = counter_uniform(seed, index, 1 + 2 * i);
    double uw = counter_uniform(seed, index, 2 + 2 * i);
    raw[i].gap = -gap_range + 2.0 * gap_range * ug;
    raw[i].weight = -std::log(uw);
    wsum += raw[i].weight;
  }
  for (auto& e : raw)
    e.weight = static_cast<double>(e.weight / static_cast<double>(wsum));
  return make_gap_distribution(std::move(raw), GapKind::plain_v);
}

/// kappa(alpha) from the averaged-Gaussian construction, under the two
/// readings of the geometric ratio r. The shipped bound always uses the
/// stated constant 3*pi; this is exposed for inspection only.
enum class KappaReading { r_exp_half_alpha, r_exp_half_alpha_sq };

inline double lemma2_kappa(double alpha, KappaReading reading) {
  if (!(alpha > 0)) throw std::invalid_argument("lemma2_kappa: alpha must be > 0");
  double gamma = std::sqrt(2.0 * kPi) * alpha * std::exp(1.0 / (8 * alpha * alpha));
  double r = reading == KappaReading::r_exp_half_alpha
                 ? std::exp(alpha / 2)
                 : std::exp(alpha * alpha / 2);
  long double s = 0.0L;
  for (int n = 0;; ++n) {
    long double term = std::pow(r, -static_cast<double>(n) * n);
    s += term;
    if (term < 1e-18L) break;
  }
  return static_cast<double>(2.0L * gamma * s);
}

// ---------------------------------------------------------------------
// Coarse-grained histograms.
// ---------------------------------------------------------------------

struct Histogram {
  double g_min = 0.0;
  double g_max = 0.0;
  double bin_width = 0.0;
  std::vector<double> weights;
};

/// Equal-width bins spanning [G_min, G_max]; right-open except the last.
inline Histogram coarse_grain(const GapDistribution& dist, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("coarse_grain: n_bins must be >= 1");
  if (dist.entries.empty())
    throw std::invalid_argument("coarse_grain: empty distribution");
  Histogram h;
  h.g_min = dist.entries.front().gap;
  h.g_max = dist.entries.back().gap;
  h.bin_width = (h.g_max - h.g_min) / n_bins;
  std::vector<long double> acc(n_bins, 0.0L);
  for (const auto& e : dist.entries) {
    int b = h.bin_width > 0
                ? static_cast<int>((e.gap - h.g_min) / h.bin_width)
                : 0;
    b = std::clamp(b, 0, n_bins - 1);
    acc[b] += e.weight;
  }
  h.weights.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) h.weights[i] = static_cast<double>(acc[i]);
  return h;
}

/// Centered moving average, window truncated at the edges.
inline std::vector<double> smooth_histogram(const std::vector<double>& w,
                                            int window = 5) {
  const int n = static_cast<int>(w.size());
  const int half = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    long double s = 0.0L;
    for (int k = lo; k <= hi; ++k) s += w[k];
    out[i] = static_cast<double>(s / (hi - lo + 1));
  }
  return out;
}

/// Nondecreasing up to the global maximum, nonincreasing after, within tol.
inline bool is_unimodal(const std::vector<double>& w, double tol = 1e-12) {
  if (w.empty()) return false;
  std::size_t peak =
      std::max_element(w.begin(), w.end()) - w.begin();
  for (std::size_t i = 0; i < peak; ++i)
    if (w[i] > w[i + 1] + tol) return false;
  for (std::size_t i = peak; i + 1 < w.size(); ++i)
    if (w[i + 1] > w[i] + tol) return false;
  return true;
}

// ---------------------------------------------------------------------
// Epsilon sweeps.
// ---------------------------------------------------------------------

struct SweepPoint {
  double epsilon = 0.0;
  double xi = 0.0;
  double a = 0.0;
  double delta = 0.0;
  double sigma_g = 0.0;
};

/// Log-spaced sweep over [min_factor, max_factor] * sigma_G.
inline std::vector<SweepPoint> epsilon_sweep(const GapDistribution& dist,
                                             double min_factor = 1e-4,
                                             double max_factor = 10.0,
                                             int points = 200) {
  if (dist.sigma_gap <= 0)
    throw std::invalid_argument("epsilon_sweep: requires sigma_G > 0");
  if (points < 2 || !(min_factor > 0) || !(max_factor > min_factor))
    throw std::invalid_argument("epsilon_sweep: bad grid parameters");
  std::vector<SweepPoint> sweep(points);
  const double log_lo = std::log(min_factor * dist.sigma_gap);
  const double log_hi = std::log(max_factor * dist.sigma_gap);
  for (int i = 0; i < points; ++i) {
    double eps = std::exp(log_lo + (log_hi - log_lo) * i / (points - 1));
    WindowStats ws = window_stats(dist, eps);
    sweep[i] = {ws.epsilon, ws.xi_of_epsilon, ws.a, ws.delta, ws.sigma_g};
  }
  return sweep;
}

/// Sweep point with minimal delta; exact ties resolve to the largest
/// epsilon, which minimizes a among the tied points.
inline const SweepPoint& pick_min_delta(const std::vector<SweepPoint>& sweep) {
  if (sweep.empty()) throw std::invalid_argument("pick_min_delta: empty sweep");
  const SweepPoint* best = &sweep.front();
  for (const auto& p : sweep)
    if (p.delta < best->delta ||
        (p.delta == best->delta && p.epsilon > best->epsilon))
      best = &p;
  return *best;
}

/// Verifies the linear envelope xi(x) <= a/sigma_G x + delta on a dense
/// x-grid; returns the largest violation (<= 0 means the envelope holds).
inline double xi_envelope_violation(const GapDistribution& dist,
                                    const WindowStats& stats,
                                    int grid_points = 256) {
  if (stats.sigma_g_zero)
    throw std::invalid_argument("xi_envelope_violation: sigma_G = 0");
  const double span = dist.entries.empty()
                          ? 1.0
                          : dist.entries.back().gap - dist.entries.front().gap;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid_points; ++i) {
    double x = span * i / grid_points;
    double envelope = stats.a / stats.sigma_g * x + stats.delta;
    worst = std::max(worst,
                     xi_exact(dist, x) + dist.discarded_weight - envelope);
  }
  return worst;
}

}  // namespace corrflow
