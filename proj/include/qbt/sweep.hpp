#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbt/transfer_solver.hpp"

namespace qbt {

struct SweepOptions {
  SolverOptions solver;
  SolveMethod method = SolveMethod::automatic;
  /// Independent continuation chains solved concurrently.
  unsigned jobs = 1;
  /// A solve whose tau is further than this fraction from the continuation
  /// prediction is rejected as a non-minimal extremal.
  double prediction_band = 0.05;
};

struct SweepRow {
  int n_sites = 0;
  double tau = 0.0;
  double fidelity = 0.0;
  std::string method;
  bool converged = false;
  double residual_norm = 0.0;
  int iterations = 0;
  double tau_stepwise = 0.0;
  double tau_perfect = 0.0;
  std::string note;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Converged solutions keyed by N.
  std::map<int, Solution> solutions;
  std::optional<ScalingFit> fit;
};

/// Solves every N in [n_min, n_max] in ascending order. Stored seeds (scaled-time
/// parameters keyed by N) start new continuation chains; every other N is
/// seeded from the solution for N-1. Output is independent of `jobs`.
SweepResult run_sweep(double j0, int n_min, int n_max, const std::map<int, ShootingParams>& seeds,
                      const SweepOptions& options);

/// Solves one N, continuing from the largest seeded N' <= N (or from a cold start at small N).
Solution solve_with_continuation(const ChainSpec& spec, const std::map<int, ShootingParams>& seeds,
                                 const SweepOptions& options);

}  // namespace qbt
