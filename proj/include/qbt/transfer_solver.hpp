#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbt/chain_model.hpp"
#include "qbt/errors.hpp"
#include "qbt/qbe_dynamics.hpp"

namespace qbt {

/// The N-1 shooting unknowns in scaled time (terminal time fixed to 1):
/// J_1(0) and lambda_{1,3}(0) .. lambda_{1,N}(0). Every other coupling and
/// multiplier starts at zero.
struct ShootingParams {
  double j1_initial = 0.0;
  std::vector<double> lambda_initial;

  void check(const ChainSpec& spec) const;
  std::vector<double> flatten() const;
  static ShootingParams unflatten(std::span<const double> x);
};

/// Shooting parameters are defined up to a diagonal sign gauge
/// (psi_n -> s_n psi_n, s_n = +-1) that leaves every |psi_n| unchanged.
/// Canonical form: J_1(0) > 0 and lambda_{1,q}(0) alternating in sign, starting negative.
ShootingParams canonicalize(const ShootingParams& p);

enum class SolveMethod { automatic, shooting, gradient };

std::string to_string(SolveMethod m);
SolveMethod parse_solve_method(const std::string& s);

struct SolverOptions {
  /// Tolerance of the inner integrations in scaled time.
  double integration_tol = 1e-12;
  /// Shooting stops when the residual norm falls below this.
  double residual_tol = 1e-10;
  /// Gradient solves count as converged below this infidelity.
  double infidelity_tol = 1e-9;
  /// Gradient solves keep polishing until the infidelity reaches this floor or stalls.
  double infidelity_floor = 1e-20;
  int max_iterations = 200;
  int max_gradient_iterations = 3000;
  /// Largest N handled by shooting under SolveMethod::automatic.
  int shooting_limit = 16;
  /// Compare the adjoint gradient with central differences at the first iterate.
  bool check_gradient = true;
  double gradient_check_tol = 1e-5;
  /// Tolerance of the physical-time verification integration.
  double verification_tol = 1e-10;
  /// Samples kept on the physical trajectory; 0 keeps none.
  std::size_t trajectory_samples = 0;
};

struct SolverMetadata {
  std::string method;
  int iterations = 0;
  int function_evaluations = 0;
  double integration_tol = 0.0;
  double target_tol = 0.0;
  bool converged = false;
};

/// Terminal control pattern. At an optimum only J_{N-1}(tau) and the
/// multipliers lambda_{n,N}(tau) survive; both figures are relative to J0.
struct TerminalDiagnostics {
  double max_inner_coupling = 0.0;
  double max_off_pattern_multiplier = 0.0;
};

struct Solution {
  ChainSpec spec{2, 1.0};
  /// Canonical scaled-time parameters; J0-independent.
  ShootingParams params;
  /// lambda_{1,q}(0) / J_1(0): dimensionless multipliers at unit coupling budget.
  std::vector<double> lambda_normalized;
  double tau = 0.0;
  double fidelity = 0.0;
  double residual_norm = 0.0;
  std::optional<Trajectory> trajectory;
  SolverMetadata metadata;
  TerminalDiagnostics diagnostics;
};

/// Thrown when an iteration budget runs out; carries the best iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Solution best) : Error(what), best_(std::move(best)) {}
  const Solution& best() const { return best_; }

 private:
  Solution best_;
};

/// J = (j1, 0, ..., 0); lambda_{1,q} from p; every other multiplier zero.
ControlState initial_control(const ShootingParams& p, const ChainSpec& spec);

/// (phi_1(1), ..., phi_{N-1}(1)) after integrating from phi(0) = e_1 over unit scaled time.
std::vector<double> shooting_residual(const ShootingParams& p, const ChainSpec& spec, double tol);

/// Infidelity sum_{k<N} phi_k(1)^2 (equal to 1 - |psi_N(1)|^2) and its gradient
/// with respect to the flattened shooting parameters, by backward costate integration.
std::pair<double, std::vector<double>> infidelity_gradient(const ShootingParams& p, const ChainSpec& spec,
                                                           double tol);

double infidelity(const ShootingParams& p, const ChainSpec& spec, double tol);

/// Central-difference gradient of `infidelity`; step h * max(1, |p_i|).
std::vector<double> infidelity_gradient_fd(const ShootingParams& p, const ChainSpec& spec, double tol,
                                           double h = 1e-5);

/// Levenberg-Marquardt on the shooting residual with a forward-difference Jacobian.
Solution solve_shooting(const ChainSpec& spec, const ShootingParams& guess, const SolverOptions& options = {});

/// BFGS on the infidelity with adjoint gradients.
Solution solve_gradient(const ChainSpec& spec, const ShootingParams& guess, const SolverOptions& options = {});

/// Dispatches on method; automatic picks shooting for N <= options.shooting_limit.
Solution solve(const ChainSpec& spec, const ShootingParams& guess, SolveMethod method,
               const SolverOptions& options = {});

/// Cold-start guess from the linear time law and the multiplier plateau.
ShootingParams default_guess(const ChainSpec& spec);

/// Guess for N+1 sites from a converged solution for N sites.
ShootingParams continuation_guess(const Solution& sol);

/// Expected tau * J0 increment per added site, used by continuation.
inline constexpr double kTimePerSite = 1.1305;
/// Magnitude of the appended lambda_{1,N}(0) / J0 in continuation.
inline constexpr double kMultiplierPlateau = 0.7235;

/// Converged scaled-time data as produced by the solvers.
struct RawSolve {
  ShootingParams params;
  double residual_norm = 0.0;
  SolverMetadata metadata;
};

/// Maps a scaled-time solve to physical units: tau = j1 / J0, lambda normalized
/// by j1. Runs the physical-time verification integration for fidelity,
/// terminal diagnostics and the optional trajectory.
Solution rescale_solution(const RawSolve& raw, const ChainSpec& spec, const SolverOptions& options = {});

/// Physical-time initial controls: J_1 = J0 and lambda scaled by J0.
ControlState physical_initial_control(const Solution& sol);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_sum_squares = 0.0;
  double max_abs_residual = 0.0;
  int n_min = 0;
  int n_max = 0;
  std::size_t points = 0;

  /// (slope * N + intercept) / j0.
  double predict(int n, double j0 = 1.0) const { return (slope * n + intercept) / j0; }
};

/// Ordinary least squares of tau * J0 on N.
ScalingFit fit_scaling(const std::vector<std::pair<int, double>>& points);

}  // namespace qbt
