#pragma once

// Spin-1/2 chain Hamiltonians and local observables as dense Hermitian
// matrices over the computational basis.
//
// Basis convention: site s maps to bit s of the basis-state integer, and
// bit value 0 is spin up (the +1 eigenstate of sigma^z). All sign
// conventions downstream rest on this choice.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace corrflow {

using Complex = std::complex<double>;

// 2^14 is the practical ceiling for dense full-spectrum work.
inline constexpr int kMaxChainLength = 14;

enum class Boundary { open, periodic };
enum class PauliAxis { X, Y, Z };

/// Chain length, the four coupling constants and the boundary convention.
struct SpinChainSpec {
  int length = 2;
  double gamma = 0.0;   // transverse field (X)
  double lambda = 0.0;  // longitudinal field (Z)
  double j1 = 0.0;      // nearest-neighbour ZZ coupling
  double j2 = 0.0;      // next-nearest ZZ coupling
  Boundary boundary = Boundary::open;

  std::size_t dimension() const { return std::size_t{1} << length; }

  void validate(int max_length = kMaxChainLength) const {
    if (length < 2)
      throw std::invalid_argument("SpinChainSpec: length must be >= 2");
    if (length > max_length)
      throw std::invalid_argument("SpinChainSpec: length " +
                                  std::to_string(length) +
                                  " exceeds dense-spectrum maximum " +
                                  std::to_string(max_length));
    if (!std::isfinite(gamma) || !std::isfinite(lambda) ||
        !std::isfinite(j1) || !std::isfinite(j2))
      throw std::invalid_argument("SpinChainSpec: couplings must be finite");
  }
};

/// Tensor product of single-site Pauli operators, one factor per site.
struct PauliString {
  std::vector<std::pair<int, PauliAxis>> factors;

  PauliString() = default;
  PauliString(std::initializer_list<std::pair<int, PauliAxis>> f)
      : factors(f) {}
};

/// Dense complex matrix carrier for H, A, B.
struct DenseOperator {
  Eigen::MatrixXcd matrix;
  bool hermitian = false;

  Eigen::Index dim() const { return matrix.rows(); }
};

inline PauliString single_site(int site, PauliAxis axis) {
  return PauliString{{site, axis}};
}

/// Builds the 2^L-dimensional operator for a Pauli string.
/// Entries are in {0, +-1, +-i}; the result is Hermitian and squares to
/// the identity.
inline DenseOperator build_pauli_string(const PauliString& ps, int L) {
  if (L < 1 || L > kMaxChainLength)
    throw std::invalid_argument("build_pauli_string: bad chain length");
  std::uint64_t flip_mask = 0;  // sites carrying X or Y
  std::uint64_t y_mask = 0;
  std::uint64_t z_mask = 0;
  std::uint64_t seen = 0;
  for (const auto& [site, axis] : ps.factors) {
    if (site < 0 || site >= L)
      throw std::invalid_argument("build_pauli_string: site index out of range");
    std::uint64_t bit = std::uint64_t{1} << site;
    if (seen & bit)
      throw std::invalid_argument("build_pauli_string: duplicate site");
    seen |= bit;
    switch (axis) {
      case PauliAxis::X: flip_mask |= bit; break;
      case PauliAxis::Y: flip_mask |= bit; y_mask |= bit; break;
      case PauliAxis::Z: z_mask |= bit; break;
    }
  }

  const std::size_t d = std::size_t{1} << L;
  DenseOperator op;
  op.matrix = Eigen::MatrixXcd::Zero(d, d);
  op.hermitian = true;
  for (std::size_t n = 0; n < d; ++n) {
    // Z factors: (+1) for bit 0 (up), (-1) for bit 1. Y factors add a
    // factor i*(+1/-1) with the same bit rule.
    int z_parity = __builtin_popcountll(n & z_mask);
    int y_parity = __builtin_popcountll(n & y_mask);
    int y_count = __builtin_popcountll(y_mask);
    double sign = ((z_parity + y_parity) % 2 == 0) ? 1.0 : -1.0;
    Complex phase = sign;
    switch (y_count % 4) {
      case 0: break;
      case 1: phase *= Complex(0, 1); break;
      case 2: phase *= -1.0; break;
      case 3: phase *= Complex(0, -1); break;
    }
    op.matrix(n ^ flip_mask, n) = phase;
  }
  return op;
}

/// Assembles the chain Hamiltonian
///   H = sum_j (gamma X_j + lambda Z_j)
///     + j1 sum_<j,j+1> Z_j Z_{j+1} + j2 sum_<j,j+2> Z_j Z_{j+2},
/// with open boundaries summing L-1 nearest and L-2 next-nearest bonds.
/// The result is real symmetric in the computational basis.
inline DenseOperator build_hamiltonian(const SpinChainSpec& spec,
                                       int max_length = kMaxChainLength) {
  spec.validate(max_length);
  const int L = spec.length;
  const std::size_t d = spec.dimension();

  DenseOperator op;
  op.matrix = Eigen::MatrixXcd::Zero(d, d);
  op.hermitian = true;

  auto z_of = [](std::size_t n, int site) {
    return ((n >> site) & 1u) ? -1.0 : 1.0;
  };

  const bool periodic = spec.boundary == Boundary::periodic;
  const int n_bonds1 = periodic ? L : L - 1;
  const int n_bonds2 = periodic ? L : L - 2;

  for (std::size_t n = 0; n < d; ++n) {
    double diag = 0.0;
    for (int j = 0; j < L; ++j) diag += spec.lambda * z_of(n, j);
    for (int b = 0; b < n_bonds1; ++b)
      diag += spec.j1 * z_of(n, b) * z_of(n, (b + 1) % L);
    for (int b = 0; b < n_bonds2; ++b)
      diag += spec.j2 * z_of(n, b) * z_of(n, (b + 2) % L);
    op.matrix(n, n) = diag;
    for (int j = 0; j < L; ++j)
      op.matrix(n ^ (std::size_t{1} << j), n) += spec.gamma;
  }
  return op;
}

/// The default observable: the X operator on the mid-chain site
/// floor(L/2), sites counted from 0.
inline int mid_chain_site(const SpinChainSpec& spec) {
  return spec.length / 2;
}

inline DenseOperator default_observable(const SpinChainSpec& spec) {
  spec.validate();
  return build_pauli_string(single_site(mid_chain_site(spec), PauliAxis::X),
                            spec.length);
}

inline const char* to_string(Boundary b) {
  return b == Boundary::open ? "open" : "periodic";
}

inline const char* to_string(PauliAxis a) {
  switch (a) {
    case PauliAxis::X: return "X";
    case PauliAxis::Y: return "Y";
    default: return "Z";
  }
}

}  // namespace corrflow
