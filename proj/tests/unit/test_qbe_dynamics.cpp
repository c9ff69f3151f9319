#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qbt/errors.hpp"
#include "qbt/oracle.hpp"
#include "qbt/qbe_dynamics.hpp"

using namespace qbt;

namespace {

ControlState random_control(const ChainSpec& spec, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ControlState c = ControlState::zeros(spec);
  for (double& j : c.couplings) j = u(rng);
  for (double& l : c.multipliers) l = u(rng);
  return c;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(QbeRhs, VanishesWithoutMultipliers) {
  std::mt19937_64 rng(3);
  const ChainSpec spec(6, 1.0);
  ControlState c = random_control(spec, rng);
  std::fill(c.multipliers.begin(), c.multipliers.end(), 0.0);
  const ControlRate r = qbe_rhs(c, spec);
  for (double v : r.d_couplings) EXPECT_EQ(v, 0.0);
  for (double v : r.d_multipliers) EXPECT_EQ(v, 0.0);
}

TEST(QbeRhs, ThreeSiteExample) {
  const ChainSpec spec(3, 1.0);
  const ControlState c{{1.0, 0.0}, {-0.816497}};
  const ControlRate r = qbe_rhs(c, spec);
  EXPECT_NEAR(r.d_couplings[0], 0.0, 1e-15);
  EXPECT_NEAR(r.d_couplings[1], 0.816497 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(r.d_couplings[1], 0.577350, 1e-6);
  EXPECT_NEAR(r.d_multipliers[0], 0.0, 1e-15);
}

TEST(QbeRhs, CouplingRateIsOrthogonalToCouplings) {
  std::mt19937_64 rng(5);
  for (int N = 2; N <= 12; ++N) {
    const ChainSpec spec(N, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
      const ControlState c = random_control(spec, rng, 3.0);
      EXPECT_NEAR(dot(c.couplings, qbe_rhs(c, spec).d_couplings), 0.0, 1e-13);
    }
  }
}

TEST(QbeRhs, MultiplierRateIsOrthogonalToMultipliers) {
  std::mt19937_64 rng(6);
  for (int N = 3; N <= 12; ++N) {
    const ChainSpec spec(N, 1.0);
    const ControlState c = random_control(spec, rng);
    EXPECT_NEAR(dot(c.multipliers, qbe_rhs(c, spec).d_multipliers), 0.0, 1e-13);
  }
}

TEST(QbeRhs, ShapeMismatch) {
  const ChainSpec spec(4, 1.0);
  ControlState c = ControlState::zeros(spec);
  c.couplings.push_back(0.0);
  EXPECT_THROW(qbe_rhs(c, spec), ShapeError);
}

TEST(QbeRhs, MatchesCommutatorOracle) {
  std::mt19937_64 rng(8);
  for (int N = 2; N <= 9; ++N) {
    const ChainSpec spec(N, 1.0);
    for (int draw = 0; draw < 10; ++draw) {
      const ControlState c = random_control(spec, rng);
      const ControlRate a = qbe_rhs(c, spec);
      const ControlRate b = commutator_rhs_oracle(c, spec);
      for (std::size_t i = 0; i < a.d_couplings.size(); ++i) EXPECT_NEAR(a.d_couplings[i], b.d_couplings[i], 1e-12);
      for (std::size_t i = 0; i < a.d_multipliers.size(); ++i) {
        EXPECT_NEAR(a.d_multipliers[i], b.d_multipliers[i], 1e-12);
      }
    }
  }
}

TEST(SchrodingerRhs, Examples) {
  const ChainSpec two(2, 1.3);
  const std::vector<Complex> psi{1.0, 0.0};
  const std::vector<double> J{1.3};
  const auto d = schrodinger_rhs(psi, J, two);
  EXPECT_EQ(d[0], Complex(0.0, 0.0));
  EXPECT_EQ(d[1], Complex(0.0, -1.3));

  const ChainSpec three(3, 1.0);
  const std::vector<Complex> mid{0.0, 1.0, 0.0};
  const std::vector<double> J3{1.0, 0.0};
  const auto d3 = schrodinger_rhs(mid, J3, three);
  EXPECT_EQ(d3[0], Complex(0.0, -1.0));
  EXPECT_EQ(d3[1], Complex(0.0, 0.0));
  EXPECT_EQ(d3[2], Complex(0.0, 0.0));

  EXPECT_THROW(schrodinger_rhs(mid, J, three), ShapeError);
}

TEST(SchrodingerRhs, RealGaugeConservesNorm) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int N = 2; N <= 15; ++N) {
    const ChainSpec spec(N, 1.0);
    std::vector<double> phi(N), J(N - 1);
    for (double& v : phi) v = g(rng);
    for (double& v : J) v = g(rng);
    EXPECT_NEAR(dot(phi, schrodinger_rhs_real(phi, J, spec)), 0.0, 1e-13);
  }
}

TEST(SchrodingerRhs, RealGaugeAgreesWithComplexForm) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  const ChainSpec spec(7, 1.0);
  std::vector<double> phi(7), J(6);
  for (double& v : phi) v = g(rng);
  for (double& v : J) v = g(rng);
  const auto dpsi = schrodinger_rhs(from_real_gauge(phi), J, spec);
  const auto dphi = schrodinger_rhs_real(phi, J, spec);
  const auto expected = from_real_gauge(dphi);
  for (int n = 0; n < 7; ++n) EXPECT_NEAR(std::abs(dpsi[n] - expected[n]), 0.0, 1e-14);
}

TEST(Gauge, Examples) {
  const std::vector<Complex> e1{1.0, 0.0, 0.0};
  const auto phi = to_real_gauge(e1);
  EXPECT_EQ(phi, (std::vector<double>{1.0, 0.0, 0.0}));

  const std::vector<double> last{0.0, 0.0, 0.0, 1.0};
  const auto psi = from_real_gauge(last);
  EXPECT_NEAR(std::abs(psi[3] - Complex(0.0, -1.0)), 0.0, 1e-16);

  const std::vector<Complex> bad{1.0, 1.0};
  EXPECT_THROW(to_real_gauge(bad), GaugeError);
}

TEST(Gauge, RoundTrip) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> phi(9);
    for (double& v : phi) v = g(rng);
    const auto back = to_real_gauge(from_real_gauge(phi));
    for (std::size_t i = 0; i < phi.size(); ++i) EXPECT_NEAR(back[i], phi[i], 1e-14);
  }
}

TEST(Integrate, TwoLevelRotation) {
  const ChainSpec spec(2, 1.0);
  const ControlState c{{std::numbers::pi / 2.0}, {}};
  for (Propagation p : {Propagation::real_gauge, Propagation::complex}) {
    IntegrationOptions o;
    o.tol = 1e-12;
    o.propagation = p;
    const Trajectory traj = integrate(c, WaveState::first_site(spec), 1.0, spec, o);
    const WaveState& w = traj.wave_samples.back();
    EXPECT_NEAR(std::abs(w.amplitudes[0]), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(w.amplitudes[1] - Complex(0.0, -1.0)), 0.0, 1e-10);
  }
}

TEST(Integrate, ThreeSiteReferenceData) {
  const ChainSpec spec(3, 1.0);
  const ControlState c{{1.0, 0.0}, {-0.816497}};
  IntegrationOptions o;
  o.samples = 11;
  const Trajectory traj = integrate(c, WaveState::first_site(spec), 2.7207, spec, o);
  EXPECT_GE(traj.wave_samples.back().probability(3), 0.999999);
  EXPECT_EQ(traj.times.front(), 0.0);
  EXPECT_EQ(traj.times.back(), 2.7207);
  for (std::size_t i = 1; i < traj.times.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
  EXPECT_EQ(traj.wave_samples.front().probability(1), 1.0);
}

TEST(Integrate, Preconditions) {
  const ChainSpec spec(3, 1.0);
  const ControlState c = ControlState::zeros(spec);
  IntegrationOptions o;
  EXPECT_THROW(integrate(c, WaveState::first_site(spec), 0.0, spec, o), PreconditionError);
  o.tol = 1e-3;
  EXPECT_THROW(integrate(c, WaveState::first_site(spec), 1.0, spec, o), PreconditionError);
  o.tol = 1e-16;
  EXPECT_THROW(integrate(c, WaveState::first_site(spec), 1.0, spec, o), PreconditionError);
}

TEST(Integrate, InvariantsOnRandomFlows) {
  std::mt19937_64 rng(13);
  for (int N = 3; N <= 12; N += 3) {
    const ChainSpec spec(N, 1.0);
    const ControlState c = random_control(spec, rng);
    const double tol = 1e-10;
    IntegrationOptions o;
    o.tol = tol;
    o.samples = 21;
    const Trajectory traj = integrate(c, WaveState::first_site(spec), 3.0, spec, o);
    const ConservationReport r = conservation_report(traj);
    EXPECT_LE(r.coupling_norm_drift, 100 * tol) << "N=" << N;
    EXPECT_LE(r.multiplier_norm_drift, 100 * tol) << "N=" << N;
    EXPECT_LE(r.wave_norm_drift, 100 * tol) << "N=" << N;
    EXPECT_LE(r.spectrum_drift, 1e-8) << "N=" << N;
  }
}

TEST(Integrate, RealGaugeAndComplexAgree) {
  std::mt19937_64 rng(14);
  const ChainSpec spec(6, 1.0);
  const ControlState c = random_control(spec, rng);
  const double tol = 1e-10;
  IntegrationOptions a, b;
  a.tol = b.tol = tol;
  a.samples = b.samples = 7;
  a.propagation = Propagation::real_gauge;
  b.propagation = Propagation::complex;
  const Trajectory ta = integrate(c, WaveState::first_site(spec), 2.0, spec, a);
  const Trajectory tb = integrate(c, WaveState::first_site(spec), 2.0, spec, b);
  for (std::size_t s = 0; s < ta.times.size(); ++s) {
    for (int n = 1; n <= 6; ++n) {
      EXPECT_NEAR(std::sqrt(ta.wave_samples[s].probability(n)), std::sqrt(tb.wave_samples[s].probability(n)),
                  100 * tol);
    }
  }
}

TEST(Integrate, AutomaticFallsBackToComplex) {
  const ChainSpec spec(3, 1.0);
  const ControlState c{{0.5, 0.5}, {0.1}};
  WaveState w;
  w.amplitudes = {Complex(1.0 / std::sqrt(2.0), 0.0), Complex(1.0 / std::sqrt(2.0), 0.0), 0.0};
  const Trajectory traj = integrate(c, w, 1.0, spec);
  EXPECT_NEAR(traj.wave_samples.back().norm_squared(), 1.0, 1e-8);
}

TEST(Conservation, ZeroControlsHaveNoDrift) {
  const ChainSpec spec(5, 1.0);
  IntegrationOptions o;
  o.samples = 5;
  const ConservationReport r = conservation_report(integrate(ControlState::zeros(spec), WaveState::first_site(spec),
                                                             1.0, spec, o));
  EXPECT_EQ(r.coupling_norm_drift, 0.0);
  EXPECT_EQ(r.multiplier_norm_drift, 0.0);
  EXPECT_EQ(r.wave_norm_drift, 0.0);
  EXPECT_EQ(r.spectrum_drift, 0.0);
}

TEST(QbeField, VjpIsTransposeOfJacobian) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g;
  for (Propagation p : {Propagation::real_gauge, Propagation::complex}) {
    const ChainSpec spec(5, 1.0);
    const QbeField field(spec, p);
    const std::size_t d = field.dimension();
    std::vector<double> y(d), a(d), v(d), out(d), f0(d), f1(d);
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = g(rng);
      a[i] = g(rng);
      v[i] = g(rng);
    }
    field.vjp(y, a, out);
    // The field is bilinear, so a central difference is exact up to rounding.
    const double h = 1e-3;
    std::vector<double> yp(d), ym(d);
    for (std::size_t i = 0; i < d; ++i) {
      yp[i] = y[i] + h * v[i];
      ym[i] = y[i] - h * v[i];
    }
    field.rhs(yp, f1);
    field.rhs(ym, f0);
    double jv = 0.0;
    for (std::size_t i = 0; i < d; ++i) jv += a[i] * (f1[i] - f0[i]) / (2 * h);
    EXPECT_NEAR(dot(out, v), jv, 1e-10);
  }
}
