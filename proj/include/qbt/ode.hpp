#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qbt::ode {

/// dy/dt = f(t, y), written into `dy`.
using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

struct Options {
  /// Local error bound per unit of integration time, mixed absolute/relative.
  double tol = 1e-10;
  /// Zero selects an automatic first step.
  double initial_step = 0.0;
  /// Zero leaves the step unbounded.
  double max_step = 0.0;
  std::size_t max_steps = 20'000'000;
  /// Hand the observer the 7th-order continuous extension of every accepted
  /// step (three extra right-hand-side evaluations per step).
  bool dense = false;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// Endpoint data of one accepted step. `dense` holds 8 blocks of y.size()
/// coefficients when Options::dense is set and is empty otherwise.
struct AcceptedStep {
  double t0;
  double t1;
  std::span<const double> y0;
  std::span<const double> f0;
  std::span<const double> y1;
  std::span<const double> f1;
  std::span<const double> dense;
};

using StepObserver = std::function<void(const AcceptedStep&)>;

/// Adaptive Dormand-Prince 8(5,3) with PI step control. Integrates `y` in place
/// from t0 to t1 (t1 < t0 integrates backward). Throws StiffnessError when the
/// step collapses and DivergenceError on non-finite state.
Stats integrate(const Rhs& f, double t0, double t1, std::vector<double>& y, const Options& options,
                const StepObserver& observer = {});

/// Cubic Hermite interpolant of `step` at time t (t between t0 and t1).
void hermite_interpolate(const AcceptedStep& step, double t, std::span<double> out);

/// Continuous extension of `step` at t: the dense coefficients when present,
/// cubic Hermite otherwise.
void interpolate(const AcceptedStep& step, double t, std::span<double> out);

/// Collects interpolated states at a fixed, monotone list of sample times.
class DenseSampler {
 public:
  DenseSampler(std::vector<double> times, std::size_t dimension);

  /// Pass as the StepObserver of an integration running in the direction of `times`.
  void operator()(const AcceptedStep& step);

  /// Fills samples that coincide with the initial time.
  void seed(double t0, std::span<const double> y0);

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& samples() const { return samples_; }
  bool complete() const { return next_ == times_.size(); }

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> samples_;
  std::size_t next_ = 0;
  std::size_t dimension_;
};

/// Keeps the continuous extension of a whole integration so the solution can
/// be evaluated anywhere afterwards. Requires Options::dense.
class DenseRecord {
 public:
  explicit DenseRecord(std::size_t dimension) : dimension_(dimension) {}

  void operator()(const AcceptedStep& step);
  void clear();

  /// y(t) for t inside the recorded span.
  void evaluate(double t, std::span<double> out) const;

  std::size_t steps() const { return starts_.size(); }
  double begin() const { return starts_.front(); }
  double end() const { return ends_.back(); }

 private:
  std::size_t dimension_;
  std::vector<double> starts_;
  std::vector<double> ends_;
  std::vector<double> coefficients_;
};

}  // namespace qbt::ode
