#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qbt/baseline.hpp"
#include "qbt/chain_model.hpp"
#include "qbt/errors.hpp"

using namespace qbt;

namespace {

ControlState random_control(const ChainSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ControlState c = ControlState::zeros(spec);
  for (double& j : c.couplings) j = u(rng);
  for (double& l : c.multipliers) l = u(rng);
  return c;
}

}  // namespace

TEST(ChainSpec, RejectsInvalidInstances) {
  EXPECT_THROW(ChainSpec(1, 1.0), PreconditionError);
  EXPECT_THROW(ChainSpec(3, 0.0), PreconditionError);
  EXPECT_THROW(ChainSpec(3, -1.0), PreconditionError);
  EXPECT_THROW(ChainSpec(3, NAN), PreconditionError);
  const ChainSpec spec(5, 2.0);
  EXPECT_EQ(spec.n_bonds(), 4u);
  EXPECT_EQ(spec.n_multipliers(), 6u);
}

TEST(MultiplierIndex, CanonicalOrder) {
  const ChainSpec spec(5, 1.0);
  EXPECT_EQ(multiplier_index(1, 2, spec), 0u);
  EXPECT_EQ(multiplier_index(1, 3, spec), 1u);
  EXPECT_EQ(multiplier_index(1, 4, spec), 2u);
  EXPECT_EQ(multiplier_index(2, 2, spec), 3u);
  EXPECT_EQ(multiplier_index(2, 3, spec), 4u);
  EXPECT_EQ(multiplier_index(3, 2, spec), 5u);
}

TEST(MultiplierIndex, OutOfDomain) {
  const ChainSpec spec(5, 1.0);
  EXPECT_THROW(multiplier_index(0, 2, spec), IndexDomainError);
  EXPECT_THROW(multiplier_index(1, 1, spec), IndexDomainError);
  EXPECT_THROW(multiplier_index(3, 3, spec), IndexDomainError);
  EXPECT_THROW(multiplier_index(4, 2, spec), IndexDomainError);
  EXPECT_THROW(multiplier_pair(6, spec), IndexDomainError);
  EXPECT_THROW(multiplier_index(1, 2, ChainSpec(2, 1.0)), IndexDomainError);
}

TEST(MultiplierIndex, BijectionUpToForty) {
  for (int N = 2; N <= 40; ++N) {
    const ChainSpec spec(N, 1.0);
    std::size_t expected = 0;
    for (int k = 1; k <= N - 1; ++k) {
      for (int n = 2; n <= N - k; ++n) {
        const std::size_t idx = multiplier_index(k, n, spec);
        ASSERT_EQ(idx, expected);
        ASSERT_EQ(multiplier_pair(idx, spec), std::make_pair(k, n));
        ++expected;
      }
    }
    ASSERT_EQ(expected, spec.n_multipliers());
  }
}

TEST(BuildHamiltonian, SingleBond) {
  const ChainSpec spec(3, 1.0);
  const std::vector<double> J{1.0, 0.0};
  const Eigen::MatrixXcd H = build_hamiltonian(J, spec).entries;
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(3, 3);
  expected(0, 1) = expected(1, 0) = 1.0;
  EXPECT_EQ(H, expected);
}

TEST(BuildHamiltonian, SquaredEntriesAreTwiceTheBudget) {
  const ChainSpec spec(3, 1.0);
  const std::vector<double> J{0.6, 0.8};
  EXPECT_NEAR(build_hamiltonian(J, spec).entries.squaredNorm(), 2.0, 1e-15);
}

TEST(BuildHamiltonian, TwoLevel) {
  const ChainSpec spec(2, 1.7);
  const std::vector<double> J{1.7};
  const Eigen::MatrixXcd H = build_hamiltonian(J, spec).entries;
  EXPECT_EQ(H(0, 1), Complex(1.7, 0.0));
  EXPECT_EQ(H(1, 0), Complex(1.7, 0.0));
  EXPECT_EQ(H(0, 0), Complex(0.0, 0.0));
}

TEST(BuildHamiltonian, ShapeMismatch) {
  const std::vector<double> J{1.0};
  EXPECT_THROW(build_hamiltonian(J, ChainSpec(3, 1.0)), ShapeError);
}

TEST(BuildGenerator, ThreeSiteEntries) {
  const ChainSpec spec(3, 1.0);
  ControlState c{{1.0, 0.0}, {-0.816497}};
  const Eigen::MatrixXcd M = build_generator(c, spec).entries;
  const Complex expected(0.0, -0.816497 / std::sqrt(2.0));
  EXPECT_NEAR(std::abs(M(2, 0) - expected), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(M(0, 2) - std::conj(expected)), 0.0, 1e-15);
  EXPECT_EQ(M(0, 1), Complex(1.0, 0.0));
  EXPECT_EQ(M(1, 0), Complex(1.0, 0.0));
}

TEST(BuildGenerator, ZeroControls) {
  const ChainSpec spec(6, 1.0);
  EXPECT_EQ(build_generator(ControlState::zeros(spec), spec).entries.norm(), 0.0);
}

TEST(BuildGenerator, HermitianTracelessForRandomControls) {
  std::mt19937_64 rng(7);
  for (int N = 2; N <= 12; ++N) {
    const ChainSpec spec(N, 1.0);
    for (int draw = 0; draw < 10; ++draw) {
      const ControlState c = random_control(spec, rng);
      const Eigen::MatrixXcd M = build_generator(c, spec).entries;
      EXPECT_EQ((M - M.adjoint()).norm(), 0.0);
      EXPECT_EQ(std::abs(M.trace()), 0.0);
    }
  }
}

TEST(BuildGenerator, TridiagonalBandIsTheHamiltonian) {
  std::mt19937_64 rng(11);
  const ChainSpec spec(7, 1.0);
  const ControlState c = random_control(spec, rng);
  const Eigen::MatrixXcd M = build_generator(c, spec).entries;
  const Eigen::MatrixXcd H = build_hamiltonian(c.couplings, spec).entries;
  for (int r = 0; r < 7; ++r) {
    for (int col = 0; col < 7; ++col) {
      if (std::abs(r - col) <= 1) EXPECT_EQ(M(r, col), H(r, col));
    }
  }
}

TEST(BuildGenerator, ShapeMismatch) {
  const ChainSpec spec(4, 1.0);
  ControlState c = ControlState::zeros(spec);
  c.multipliers.pop_back();
  EXPECT_THROW(build_generator(c, spec), ShapeError);
}

TEST(CouplingNorm, Examples) {
  EXPECT_NEAR(coupling_norm(std::vector<double>{0.6, 0.8}), 1.0, 1e-15);
  EXPECT_EQ(coupling_norm(std::vector<double>{2.5, 0.0, 0.0}), 6.25);
  const double h = std::sqrt(2.0) / 2.0;
  EXPECT_NEAR(coupling_norm(std::vector<double>{h, h}), 1.0, 1e-15);
}

TEST(CouplingNorm, BaselineProfilesMeetTheBudget) {
  for (int N = 2; N <= 40; ++N) {
    for (double j0 : {1.0, 2.5}) {
      const ChainSpec spec(N, j0);
      EXPECT_NEAR(coupling_norm(perfect_transfer_schedule(spec).segments[0].couplings), j0 * j0, 1e-12 * j0 * j0);
      for (const auto& seg : stepwise_schedule(spec).segments) {
        EXPECT_EQ(coupling_norm(seg.couplings), j0 * j0);
      }
    }
  }
}

TEST(WaveState, FirstSiteAndProbability) {
  const ChainSpec spec(4, 1.0);
  const WaveState w = WaveState::first_site(spec);
  EXPECT_EQ(w.norm_squared(), 1.0);
  EXPECT_EQ(w.probability(1), 1.0);
  EXPECT_EQ(w.probability(4), 0.0);
}

TEST(ControlState, CheckRejectsNonFinite) {
  const ChainSpec spec(3, 1.0);
  ControlState c = ControlState::zeros(spec);
  c.couplings[1] = INFINITY;
  EXPECT_THROW(c.check(spec), NumericalError);
}

TEST(IPower, Cycle) {
  EXPECT_EQ(i_power(0), Complex(1, 0));
  EXPECT_EQ(i_power(1), Complex(0, 1));
  EXPECT_EQ(i_power(2), Complex(-1, 0));
  EXPECT_EQ(i_power(3), Complex(0, -1));
  EXPECT_EQ(i_power(-1), Complex(0, -1));
  EXPECT_EQ(i_power(5), Complex(0, 1));
}
