#include "qbt/transfer_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include <Eigen/Dense>

namespace qbt {
namespace {

/// The scaled-time two-point problem for one chain length.
class ScaledProblem {
 public:
  ScaledProblem(const ChainSpec& spec, double tol)
      : spec_(spec), tol_(tol), field_(spec, Propagation::real_gauge) {}

  std::vector<double> initial_state(const ShootingParams& p) const {
    return field_.pack(initial_control(p, spec_), WaveState::first_site(spec_));
  }

  /// State at scaled time 1. With `record`, keeps the continuous extension of
  /// the forward pass for a later gradient_from.
  std::vector<double> propagate(const ShootingParams& p, ode::DenseRecord* record = nullptr) const {
    std::vector<double> y = initial_state(p);
    ode::Options options;
    options.tol = tol_;
    if (record != nullptr) {
      record->clear();
      options.dense = true;
      ode::integrate(rhs(), 0.0, 1.0, y, options, [record](const ode::AcceptedStep& s) { (*record)(s); });
    } else {
      ode::integrate(rhs(), 0.0, 1.0, y, options);
    }
    return y;
  }

  std::vector<double> residual_of(std::span<const double> y1) const {
    const auto w = static_cast<long>(field_.wave_offset());
    return {y1.begin() + w, y1.begin() + w + spec_.n_sites() - 1};
  }

  double infidelity_of(std::span<const double> y1) const {
    const std::vector<double> r = residual_of(y1);
    return std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
  }

  /// Gradient of infidelity_of(y(1)) with respect to the flattened shooting
  /// parameters: the costate runs backward against the recorded forward pass.
  std::vector<double> gradient_from(std::span<const double> y1, const ode::DenseRecord& forward) const {
    const std::size_t d = field_.dimension();
    const std::size_t w = field_.wave_offset();
    const auto n_residual = static_cast<std::size_t>(spec_.n_sites() - 1);

    std::vector<double> a(d, 0.0);
    // The costate equation is linear; integrate a unit-norm terminal costate and rescale.
    double scale = 0.0;
    for (std::size_t k = 0; k < n_residual; ++k) {
      a[w + k] = 2.0 * y1[w + k];
      scale += a[w + k] * a[w + k];
    }
    scale = std::sqrt(scale);
    std::vector<double> grad(n_residual, 0.0);
    if (scale == 0.0) return grad;
    for (std::size_t k = 0; k < n_residual; ++k) a[w + k] /= scale;

    std::vector<double> y(d);
    const ode::Rhs costate = [this, &forward, &y](double t, std::span<const double> s, std::span<double> ds) {
      forward.evaluate(t, y);
      field_.vjp(y, s, ds);
      for (double& v : ds) v = -v;
    };
    ode::Options options;
    options.tol = tol_;
    ode::integrate(costate, 1.0, 0.0, a, options);

    // Initial state depends on p only through J_1 and lambda_{1,q}, which are
    // the first N-2 packed multipliers.
    grad[0] = scale * a[field_.coupling_offset()];
    for (std::size_t q = 1; q < n_residual; ++q) grad[q] = scale * a[field_.multiplier_offset() + q - 1];
    return grad;
  }

  std::size_t dimension() const { return field_.dimension(); }
  const ChainSpec& spec() const { return spec_; }

 private:
  ode::Rhs rhs() const {
    return [this](double, std::span<const double> s, std::span<double> ds) { field_.rhs(s, ds); };
  }

  ChainSpec spec_;
  double tol_;
  QbeField field_;
};

Solution failed_solution(const RawSolve& raw, const ChainSpec& spec, const SolverOptions& options) {
  try {
    return rescale_solution(raw, spec, options);
  } catch (const Error&) {
    Solution s;
    s.spec = spec;
    s.params = raw.params;
    s.residual_norm = raw.residual_norm;
    s.metadata = raw.metadata;
    return s;
  }
}

}  // namespace

void ShootingParams::check(const ChainSpec& spec) const {
  if (lambda_initial.size() != static_cast<std::size_t>(spec.n_sites() - 2)) {
    throw ShapeError("expected " + std::to_string(spec.n_sites() - 2) + " initial multipliers, got " +
                     std::to_string(lambda_initial.size()));
  }
  if (!std::isfinite(j1_initial) ||
      !std::all_of(lambda_initial.begin(), lambda_initial.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericalError("non-finite shooting parameter");
  }
}

std::vector<double> ShootingParams::flatten() const {
  std::vector<double> x{j1_initial};
  x.insert(x.end(), lambda_initial.begin(), lambda_initial.end());
  return x;
}

ShootingParams ShootingParams::unflatten(std::span<const double> x) {
  if (x.empty()) throw ShapeError("empty shooting vector");
  return {x[0], std::vector<double>(x.begin() + 1, x.end())};
}

ShootingParams canonicalize(const ShootingParams& p) {
  ShootingParams c = p;
  c.j1_initial = std::abs(p.j1_initial);
  for (std::size_t i = 0; i < c.lambda_initial.size(); ++i) {
    const double magnitude = std::abs(c.lambda_initial[i]);
    c.lambda_initial[i] = (i % 2 == 0) ? -magnitude : magnitude;
  }
  return c;
}

std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::automatic: return "auto";
    case SolveMethod::shooting: return "shooting";
    case SolveMethod::gradient: return "gradient";
  }
  return "auto";
}

SolveMethod parse_solve_method(const std::string& s) {
  if (s == "auto") return SolveMethod::automatic;
  if (s == "shooting") return SolveMethod::shooting;
  if (s == "gradient") return SolveMethod::gradient;
  throw ParseError("unknown method '" + s + "' (expected auto|shooting|gradient)");
}

ControlState initial_control(const ShootingParams& p, const ChainSpec& spec) {
  p.check(spec);
  ControlState c = ControlState::zeros(spec);
  c.couplings[0] = p.j1_initial;
  // lambda_{1,q} for q = 3..N occupy packed ordinals 0..N-3.
  for (std::size_t i = 0; i < p.lambda_initial.size(); ++i) {
    c.multipliers[multiplier_index(1, static_cast<int>(i) + 2, spec)] = p.lambda_initial[i];
  }
  return c;
}

std::vector<double> shooting_residual(const ShootingParams& p, const ChainSpec& spec, double tol) {
  const ScaledProblem problem(spec, tol);
  return problem.residual_of(problem.propagate(p));
}

double infidelity(const ShootingParams& p, const ChainSpec& spec, double tol) {
  const ScaledProblem problem(spec, tol);
  return problem.infidelity_of(problem.propagate(p));
}

std::pair<double, std::vector<double>> infidelity_gradient(const ShootingParams& p, const ChainSpec& spec,
                                                           double tol) {
  const ScaledProblem problem(spec, tol);
  ode::DenseRecord record(problem.dimension());
  const std::vector<double> y1 = problem.propagate(p, &record);
  return {problem.infidelity_of(y1), problem.gradient_from(y1, record)};
}

std::vector<double> infidelity_gradient_fd(const ShootingParams& p, const ChainSpec& spec, double tol,
                                           double h) {
  const ScaledProblem problem(spec, tol);
  std::vector<double> x = p.flatten();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = problem.infidelity_of(problem.propagate(ShootingParams::unflatten(x)));
    x[i] = saved - step;
    const double fm = problem.infidelity_of(problem.propagate(ShootingParams::unflatten(x)));
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Solution solve_shooting(const ChainSpec& spec, const ShootingParams& guess, const SolverOptions& options) {
  guess.check(spec);
  const ScaledProblem problem(spec, options.integration_tol);
  const auto n = static_cast<Eigen::Index>(spec.n_bonds());

  RawSolve raw;
  raw.metadata.method = "shooting";
  raw.metadata.integration_tol = options.integration_tol;
  raw.metadata.target_tol = options.residual_tol;

  auto evaluate = [&](const Eigen::VectorXd& x) {
    ++raw.metadata.function_evaluations;
    const std::vector<double> r =
        problem.residual_of(problem.propagate(ShootingParams::unflatten({x.data(), static_cast<std::size_t>(n)})));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), n));
  };

  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(guess.flatten().data(), n);
  Eigen::VectorXd r = evaluate(x);
  double mu = -1.0;
  double nu = 2.0;
  bool stalled = false;

  while (raw.metadata.iterations < options.max_iterations) {
    if (r.norm() <= options.residual_tol) break;
    ++raw.metadata.iterations;

    Eigen::MatrixXd jac(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd xp = x;
      const double step = 1e-7 * std::max(1.0, std::abs(x(i)));
      xp(i) += step;
      jac.col(i) = (evaluate(xp) - r) / step;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(1e-13);
    if (qr.rank() < n) {
      throw RankError("singular shooting Jacobian (rank " + std::to_string(qr.rank()) + " of " +
                      std::to_string(n) + ")");
    }

    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd diag = a.diagonal();
    diag = diag.cwiseMax(1e-12 * diag.maxCoeff());
    if (mu < 0.0) mu = 1e-3 * diag.maxCoeff();

    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += mu * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const Eigen::VectorXd x_trial = x + delta;
      Eigen::VectorXd r_trial;
      try {
        r_trial = evaluate(x_trial);
      } catch (const Error&) {
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      const double predicted = delta.dot(mu * diag.cwiseProduct(delta) - g);
      const double rho = (r.squaredNorm() - r_trial.squaredNorm()) / std::max(predicted, 1e-300);
      if (rho > 0.0 && r_trial.norm() < r.norm()) {
        x = x_trial;
        r = r_trial;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        accepted = true;
      } else {
        mu *= nu;
        nu *= 2.0;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }

  raw.params = ShootingParams::unflatten({x.data(), static_cast<std::size_t>(n)});
  raw.residual_norm = r.norm();
  raw.metadata.converged = raw.residual_norm <= options.residual_tol;
  if (!raw.metadata.converged) {
    throw ConvergenceError(std::string("shooting did not converge (") + (stalled ? "stalled" : "iteration limit") +
                               ", residual " + std::to_string(raw.residual_norm) + ")",
                           failed_solution(raw, spec, options));
  }
  return rescale_solution(raw, spec, options);
}

Solution solve_gradient(const ChainSpec& spec, const ShootingParams& guess, const SolverOptions& options) {
  guess.check(spec);
  const ScaledProblem problem(spec, options.integration_tol);
  const auto n = static_cast<Eigen::Index>(spec.n_bonds());

  RawSolve raw;
  raw.metadata.method = "gradient";
  raw.metadata.integration_tol = options.integration_tol;
  raw.metadata.target_tol = options.infidelity_tol;

  auto to_params = [&](const Eigen::VectorXd& v) {
    return ShootingParams::unflatten({v.data(), static_cast<std::size_t>(n)});
  };
  auto to_vector = [&](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), n));
  };

  ode::DenseRecord record(problem.dimension());
  ode::DenseRecord trial_record(problem.dimension());
  Eigen::VectorXd x = to_vector(guess.flatten());
  std::vector<double> y1 = problem.propagate(to_params(x), &record);
  ++raw.metadata.function_evaluations;
  double f = problem.infidelity_of(y1);
  Eigen::VectorXd g = to_vector(problem.gradient_from(y1, record));

  if (options.check_gradient && f > 1e-12) {
    const double check_tol = std::min(options.integration_tol, 1e-13);
    const std::vector<double> fd = infidelity_gradient_fd(to_params(x), spec, check_tol, 1e-5);
    const std::vector<double> adj = infidelity_gradient(to_params(x), spec, check_tol).second;
    const Eigen::VectorXd diff = to_vector(adj) - to_vector(fd);
    const double rel = diff.norm() / std::max(to_vector(fd).norm(), 1e-300);
    if (rel > options.gradient_check_tol) {
      throw AdjointError("adjoint gradient deviates from central differences (relative " + std::to_string(rel) +
                         ")");
    }
  }

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  const double max_step_base = 0.25;

  while (raw.metadata.iterations < options.max_gradient_iterations && f > options.infidelity_floor) {
    ++raw.metadata.iterations;
    Eigen::VectorXd dir = -h_inv * g;
    if (g.dot(dir) >= 0.0) {
      h_inv.setIdentity();
      scaled = false;
      dir = -g;
    }
    const double max_step = max_step_base * std::max(1.0, x.norm());
    if (dir.norm() > max_step) dir *= max_step / dir.norm();

    const double slope = g.dot(dir);
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    std::vector<double> y_new;
    double f_new = f;
    for (int k = 0; k < 40; ++k) {
      x_new = x + alpha * dir;
      try {
        y_new = problem.propagate(to_params(x_new), &trial_record);
        ++raw.metadata.function_evaluations;
        f_new = problem.infidelity_of(y_new);
        if (f_new <= f + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
      } catch (const Error&) {
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd g_new = to_vector(problem.gradient_from(y_new, trial_record));
    std::swap(record, trial_record);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      if (!scaled) {
        h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / yv.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
      h_inv = (i_n - rho * s * yv.transpose()) * h_inv * (i_n - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }

  raw.params = to_params(x);
  raw.residual_norm = std::sqrt(f);
  raw.metadata.converged = f <= options.infidelity_tol;
  if (!raw.metadata.converged) {
    throw ConvergenceError("gradient optimization did not reach infidelity " + std::to_string(options.infidelity_tol) +
                               " (best " + std::to_string(f) + ")",
                           failed_solution(raw, spec, options));
  }
  return rescale_solution(raw, spec, options);
}

Solution solve(const ChainSpec& spec, const ShootingParams& guess, SolveMethod method, const SolverOptions& options) {
  if (method == SolveMethod::automatic) {
    method = spec.n_sites() <= options.shooting_limit ? SolveMethod::shooting : SolveMethod::gradient;
  }
  return method == SolveMethod::shooting ? solve_shooting(spec, guess, options)
                                         : solve_gradient(spec, guess, options);
}

ShootingParams default_guess(const ChainSpec& spec) {
  const int N = spec.n_sites();
  // Multiplier magnitudes at unit budget: a head near lambda_{1,3} and a tail near lambda_{1,N}.
  constexpr double head[] = {0.8818, 0.8133, 0.7985, 0.7951};
  constexpr double tail[] = {kMultiplierPlateau, 0.7812, 0.7918, 0.7940};
  constexpr double middle = 0.7945;
  ShootingParams p;
  p.j1_initial = std::max(1.13045 * N - 0.6677, 1.5);
  for (int q = 3; q <= N; ++q) {
    const int from_start = q - 3;
    const int from_end = N - q;
    double magnitude = middle;
    if (from_end < 4) {
      magnitude = tail[from_end];
    } else if (from_start < 4) {
      magnitude = head[from_start];
    }
    const double sign = (from_start % 2 == 0) ? -1.0 : 1.0;
    p.lambda_initial.push_back(sign * magnitude * p.j1_initial);
  }
  return p;
}

ShootingParams continuation_guess(const Solution& sol) {
  if (!sol.metadata.converged) throw PreconditionError("continuation requires a converged solution");
  ShootingParams p;
  p.j1_initial = sol.params.j1_initial + kTimePerSite;
  std::vector<double> normalized = sol.lambda_normalized;
  const double last_sign = normalized.empty() ? 1.0 : (normalized.back() < 0.0 ? -1.0 : 1.0);
  normalized.push_back(-last_sign * kMultiplierPlateau);
  for (double l : normalized) p.lambda_initial.push_back(l * p.j1_initial);
  return p;
}

ControlState physical_initial_control(const Solution& sol) {
  ShootingParams physical;
  physical.j1_initial = sol.spec.j0();
  for (double l : sol.lambda_normalized) physical.lambda_initial.push_back(l * sol.spec.j0());
  return initial_control(physical, sol.spec);
}

Solution rescale_solution(const RawSolve& raw, const ChainSpec& spec, const SolverOptions& options) {
  raw.params.check(spec);
  Solution sol;
  sol.spec = spec;
  sol.params = canonicalize(raw.params);
  sol.residual_norm = raw.residual_norm;
  sol.metadata = raw.metadata;
  const double j1 = sol.params.j1_initial;
  if (!(j1 > 0.0)) throw NumericalError("non-positive J_1(0) in solve");
  sol.tau = j1 / spec.j0();
  for (double l : sol.params.lambda_initial) sol.lambda_normalized.push_back(l / j1);

  IntegrationOptions verify;
  verify.tol = options.verification_tol;
  verify.samples = std::max<std::size_t>(options.trajectory_samples, 2);
  verify.propagation = Propagation::real_gauge;
  Trajectory traj = integrate(physical_initial_control(sol), WaveState::first_site(spec), sol.tau, spec, verify);

  const WaveState& final_wave = traj.wave_samples.back();
  sol.fidelity = final_wave.probability(spec.n_sites());

  const ControlState& final_control = traj.control_samples.back();
  const int N = spec.n_sites();
  for (int m = 1; m <= N - 2; ++m) {
    sol.diagnostics.max_inner_coupling =
        std::max(sol.diagnostics.max_inner_coupling, std::abs(final_control.couplings[m - 1]) / spec.j0());
  }
  for (std::size_t i = 0; i < final_control.multipliers.size(); ++i) {
    const auto [k, n] = multiplier_pair(i, spec);
    if (k + n == N) continue;
    sol.diagnostics.max_off_pattern_multiplier =
        std::max(sol.diagnostics.max_off_pattern_multiplier, std::abs(final_control.multipliers[i]) / spec.j0());
  }
  if (options.trajectory_samples > 0) sol.trajectory = std::move(traj);
  return sol;
}

ScalingFit fit_scaling(const std::vector<std::pair<int, double>>& points) {
  if (points.size() < 3) throw PreconditionError("scaling fit needs at least 3 points");
  std::map<int, int> seen;
  for (const auto& [n, t] : points) ++seen[n];
  if (seen.size() == 1) throw RankError("degenerate scaling design: every point has N=" + std::to_string(points[0].first));
  for (const auto& [n, t] : points) {
    if (seen[n] > 1) throw PreconditionError("duplicate N=" + std::to_string(n) + " in scaling fit");
  }
  const auto count = static_cast<double>(points.size());
  double mean_n = 0.0, mean_t = 0.0;
  for (const auto& [n, t] : points) {
    mean_n += n;
    mean_t += t;
  }
  mean_n /= count;
  mean_t /= count;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, t] : points) {
    sxx += (n - mean_n) * (n - mean_n);
    sxy += (n - mean_n) * (t - mean_t);
  }
  if (sxx == 0.0) throw RankError("degenerate scaling design");

  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_t - fit.slope * mean_n;
  fit.points = points.size();
  fit.n_min = seen.begin()->first;
  fit.n_max = seen.rbegin()->first;
  for (const auto& [n, t] : points) {
    const double r = t - fit.predict(n);
    fit.residual_sum_squares += r * r;
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
  }
  return fit;
}

}  // namespace qbt
