#include <cmath>

#include <gtest/gtest.h>

#include "qbt/errors.hpp"
#include "qbt/ode.hpp"

using namespace qbt;

namespace {

// y0' = y1, y1' = -y0.
const ode::Rhs oscillator = [](double, std::span<const double> y, std::span<double> dy) {
  dy[0] = y[1];
  dy[1] = -y[0];
};

}  // namespace

TEST(Ode, HarmonicOscillatorForward) {
  std::vector<double> y{1.0, 0.0};
  ode::Options o;
  o.tol = 1e-12;
  const ode::Stats stats = ode::integrate(oscillator, 0.0, 10.0, y, o);
  EXPECT_NEAR(y[0], std::cos(10.0), 1e-10);
  EXPECT_NEAR(y[1], -std::sin(10.0), 1e-10);
  EXPECT_GT(stats.accepted, 0u);
}

TEST(Ode, BackwardRecoversInitialState) {
  std::vector<double> y{0.3, -0.7};
  ode::Options o;
  o.tol = 1e-12;
  ode::integrate(oscillator, 0.0, 5.0, y, o);
  ode::integrate(oscillator, 5.0, 0.0, y, o);
  EXPECT_NEAR(y[0], 0.3, 1e-10);
  EXPECT_NEAR(y[1], -0.7, 1e-10);
}

TEST(Ode, ToleranceControlsError) {
  double previous = 1.0;
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    std::vector<double> y{1.0, 0.0};
    ode::Options o;
    o.tol = tol;
    ode::integrate(oscillator, 0.0, 20.0, y, o);
    const double err = std::hypot(y[0] - std::cos(20.0), y[1] + std::sin(20.0));
    EXPECT_LT(err, 100.0 * tol);
    EXPECT_LE(err, previous);
    previous = err;
  }
}

TEST(Ode, DenseOutputMatchesExactSolution) {
  std::vector<double> times;
  for (int i = 0; i <= 50; ++i) times.push_back(0.2 * i);
  for (bool dense : {false, true}) {
    ode::DenseSampler sampler(times, 2);
    std::vector<double> y{1.0, 0.0};
    sampler.seed(0.0, y);
    ode::Options o;
    o.tol = 1e-12;
    o.dense = dense;
    // Hermite interpolation needs short steps to stay accurate.
    if (!dense) o.max_step = 0.01;
    ode::integrate(oscillator, 0.0, 10.0, y, o, [&](const ode::AcceptedStep& s) { sampler(s); });
    ASSERT_TRUE(sampler.complete());
    for (std::size_t i = 0; i < times.size(); ++i) {
      EXPECT_NEAR(sampler.samples()[i][0], std::cos(times[i]), 1e-9) << "t=" << times[i] << " dense=" << dense;
    }
  }
}

TEST(Ode, DenseRecordEvaluatesAnywhere) {
  ode::DenseRecord record(2);
  std::vector<double> y{1.0, 0.0};
  ode::Options o;
  o.tol = 1e-12;
  o.dense = true;
  ode::integrate(oscillator, 0.0, 3.0, y, o, [&](const ode::AcceptedStep& s) { record(s); });
  std::vector<double> out(2);
  for (double t : {0.0, 0.123, 1.5, 2.9999, 3.0}) {
    record.evaluate(t, out);
    EXPECT_NEAR(out[0], std::cos(t), 1e-10);
    EXPECT_NEAR(out[1], -std::sin(t), 1e-10);
  }
}

TEST(Ode, DenseRecordNeedsDenseSteps) {
  ode::DenseRecord record(2);
  std::vector<double> y{1.0, 0.0};
  ode::Options o;
  EXPECT_THROW(ode::integrate(oscillator, 0.0, 1.0, y, o, [&](const ode::AcceptedStep& s) { record(s); }),
               ShapeError);
}

TEST(Ode, StepBudget) {
  std::vector<double> y{1.0, 0.0};
  ode::Options o;
  o.max_steps = 3;
  o.tol = 1e-12;
  EXPECT_THROW(ode::integrate(oscillator, 0.0, 100.0, y, o), StiffnessError);
}

TEST(Ode, NonFiniteStateIsDivergence) {
  const ode::Rhs poisoned = [](double t, std::span<const double>, std::span<double> dy) {
    dy[0] = t > 0.5 ? NAN : 1.0;
  };
  std::vector<double> y{0.0};
  EXPECT_THROW(ode::integrate(poisoned, 0.0, 1.0, y, ode::Options{}), DivergenceError);
  std::vector<double> bad{NAN, 0.0};
  EXPECT_THROW(ode::integrate(oscillator, 0.0, 1.0, bad, ode::Options{}), DivergenceError);
}

TEST(Ode, ZeroSpanIsNoOp) {
  std::vector<double> y{1.0, 2.0};
  const ode::Stats s = ode::integrate(oscillator, 1.0, 1.0, y, ode::Options{});
  EXPECT_EQ(s.accepted, 0u);
  EXPECT_EQ(y[1], 2.0);
}
