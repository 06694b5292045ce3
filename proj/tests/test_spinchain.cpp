#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <complex>

#include "corrflow/rng.hpp"
#include "corrflow/spinchain.hpp"

using namespace corrflow;
using Catch::Approx;

namespace {

// Brute-force Kronecker-product oracle, independent of the bit-indexed
// builder. Site 0 is the fastest-varying index, matching bit 0.
Eigen::MatrixXcd kron_oracle(const PauliString& ps, int L) {
  Eigen::Matrix2cd X, Y, Z, I;
  X << 0, 1, 1, 0;
  Y << 0, Complex(0, -1), Complex(0, 1), 0;
  Z << 1, 0, 0, -1;
  I.setIdentity();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Ones(1, 1);
  for (int site = 0; site < L; ++site) {
    Eigen::Matrix2cd factor = I;
    for (const auto& [s, axis] : ps.factors) {
      if (s != site) continue;
      factor = axis == PauliAxis::X ? X : (axis == PauliAxis::Y ? Y : Z);
    }
    Eigen::MatrixXcd next(out.rows() * 2, out.cols() * 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        next.block(r * out.rows(), c * out.cols(), out.rows(), out.cols()) =
            factor(r, c) * out;
    out = next;
  }
  return out;
}

PauliString random_string(std::uint64_t seed, std::uint64_t idx, int L) {
  PauliString ps;
  for (int s = 0; s < L; ++s) {
    double u = counter_uniform(seed, idx, s);
    if (u < 0.25)
      ps.factors.push_back({s, PauliAxis::X});
    else if (u < 0.5)
      ps.factors.push_back({s, PauliAxis::Y});
    else if (u < 0.75)
      ps.factors.push_back({s, PauliAxis::Z});
  }
  return ps;
}

}  // namespace

TEST_CASE("single-site Z on a one-site chain") {
  auto op = build_pauli_string(single_site(0, PauliAxis::Z), 1);
  REQUIRE(op.dim() == 2);
  CHECK(op.matrix(0, 0).real() == 1.0);
  CHECK(op.matrix(1, 1).real() == -1.0);
  CHECK(op.matrix(0, 1) == Complex(0, 0));
}

TEST_CASE("empty string is the identity") {
  auto op = build_pauli_string(PauliString{}, 3);
  REQUIRE(op.dim() == 8);
  CHECK((op.matrix - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("X0 X1 on two sites matches the Kronecker oracle") {
  PauliString ps{{0, PauliAxis::X}, {1, PauliAxis::X}};
  auto op = build_pauli_string(ps, 2);
  auto oracle = kron_oracle(ps, 2);
  CHECK((op.matrix - oracle).cwiseAbs().maxCoeff() == 0.0);
  // anti-diagonal ones
  for (int n = 0; n < 4; ++n) CHECK(op.matrix(3 - n, n) == Complex(1, 0));
  Eigen::MatrixXcd sq = op.matrix * op.matrix;
  CHECK((sq - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pauli strings match the oracle and square to identity") {
  for (std::uint64_t idx = 0; idx < 24; ++idx) {
    int L = 2 + static_cast<int>(idx % 4);
    PauliString ps = random_string(99, idx, L);
    auto op = build_pauli_string(ps, L);
    auto oracle = kron_oracle(ps, L);
    INFO("string " << idx << " L=" << L);
    CHECK((op.matrix - oracle).cwiseAbs().maxCoeff() == 0.0);
    CHECK((op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXcd sq = op.matrix * op.matrix;
    CHECK((sq - Eigen::MatrixXcd::Identity(op.dim(), op.dim()))
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    if (!ps.factors.empty()) CHECK(std::abs(op.matrix.trace()) == 0.0);
  }
}

TEST_CASE("pauli string rejects bad sites") {
  CHECK_THROWS_AS(build_pauli_string(single_site(3, PauliAxis::X), 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_pauli_string(single_site(-1, PauliAxis::X), 3),
                  std::invalid_argument);
  PauliString dup{{1, PauliAxis::X}, {1, PauliAxis::Z}};
  CHECK_THROWS_AS(build_pauli_string(dup, 3), std::invalid_argument);
}

TEST_CASE("two-site ZZ bond Hamiltonian") {
  SpinChainSpec spec{.length = 2, .j1 = 1.0};
  auto h = build_hamiltonian(spec);
  Eigen::Vector4d expected(1, -1, -1, 1);
  CHECK((h.matrix.diagonal().real() - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(h.matrix.cwiseAbs().sum() == 4.0);  // nothing off the diagonal
}

TEST_CASE("ETH chain at L=8 is traceless and real symmetric") {
  SpinChainSpec spec{.length = 8, .gamma = 0.8, .lambda = 0.5, .j1 = 1.0,
                     .j2 = 1.0};
  auto h = build_hamiltonian(spec);
  REQUIRE(h.dim() == 256);
  CHECK(std::abs(h.matrix.trace()) < 1e-12);
  CHECK(h.matrix.imag().isZero(0.0));
  CHECK((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("three free transverse spins have equally spaced levels") {
  SpinChainSpec spec{.length = 3, .gamma = 1.0};
  auto h = build_hamiltonian(spec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h.matrix);
  Eigen::VectorXd expected(8);
  expected << -3, -1, -1, -1, 1, 1, 1, 3;
  CHECK((solver.eigenvalues() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hamiltonian is linear in the couplings") {
  SpinChainSpec one{.length = 5, .gamma = 0.7};
  SpinChainSpec two{.length = 5, .gamma = 1.4};
  auto h1 = build_hamiltonian(one);
  auto h2 = build_hamiltonian(two);
  CHECK((h2.matrix - 2.0 * h1.matrix).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("open-boundary bond counts enter through tr(H^2)") {
  // For a single coupling c on b bonds, tr(H^2)/d = c^2 * b.
  for (int L : {4, 6, 9}) {
    SpinChainSpec nn{.length = L, .j1 = 1.0};
    SpinChainSpec nnn{.length = L, .j2 = 1.0};
    double d = static_cast<double>(nn.dimension());
    CHECK(build_hamiltonian(nn).matrix.trace().real() == 0.0);
    CHECK((build_hamiltonian(nn).matrix.cwiseAbs2().sum() / d) ==
          Approx(L - 1).margin(1e-12));
    CHECK((build_hamiltonian(nnn).matrix.cwiseAbs2().sum() / d) ==
          Approx(L - 2).margin(1e-12));
  }
}

TEST_CASE("periodic boundary adds the wrap-around bonds") {
  SpinChainSpec spec{.length = 5, .j1 = 1.0, .boundary = Boundary::periodic};
  double d = static_cast<double>(spec.dimension());
  CHECK((build_hamiltonian(spec).matrix.cwiseAbs2().sum() / d) ==
        Approx(5.0).margin(1e-12));
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(build_hamiltonian(SpinChainSpec{.length = 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_hamiltonian(SpinChainSpec{.length = 15}),
                  std::invalid_argument);
  SpinChainSpec nan_spec{.length = 4};
  nan_spec.gamma = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(build_hamiltonian(nan_spec), std::invalid_argument);
}

TEST_CASE("default observable sits mid-chain") {
  SpinChainSpec l2{.length = 2};
  auto a2 = default_observable(l2);
  CHECK((a2.matrix - kron_oracle(single_site(1, PauliAxis::X), 2))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  SpinChainSpec l8{.length = 8};
  CHECK(mid_chain_site(l8) == 4);
  auto a8 = default_observable(l8);
  Eigen::MatrixXcd sq = a8.matrix * a8.matrix;
  CHECK((sq - Eigen::MatrixXcd::Identity(256, 256)).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK(std::abs(a8.matrix.trace()) == 0.0);

  SpinChainSpec l3{.length = 3};
  auto a3 = default_observable(l3);  // X on site 1
  PauliString xxx{{0, PauliAxis::X}, {1, PauliAxis::X}, {2, PauliAxis::X}};
  auto all_x = build_pauli_string(xxx, 3);
  CHECK((a3.matrix * all_x.matrix - all_x.matrix * a3.matrix)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}
