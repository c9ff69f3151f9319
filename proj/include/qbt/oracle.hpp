#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qbt/baseline.hpp"
#include "qbt/chain_model.hpp"
#include "qbt/qbe_dynamics.hpp"

namespace qbt {

/// Independent evaluation of the control dynamics: dense M = -i [H, D] and
/// explicit trace projections onto the A_m and B^e basis matrices. Throws
/// BasisClosureError when M has a component along B^o or the diagonal
/// generators larger than `closure_tol`.
ControlRate commutator_rhs_oracle(const ControlState& c, const ChainSpec& spec, double closure_tol = 1e-12);

/// X_{mn}(z) = (z E_{nm} + z* E_{mn}) / sqrt(2), 1-based indices.
Eigen::MatrixXcd basis_x(int m, int n, Complex z, int n_sites);

struct OracleReport {
  std::string name;
  double max_abs_deviation = 0.0;
  double threshold = 0.0;
  std::size_t cases_run = 0;
  /// JSON of the input that produced the largest deviation.
  std::string worst_case_input;

  bool passed() const { return max_abs_deviation <= threshold; }
};

/// qbe_rhs against commutator_rhs_oracle on random controls (entries uniform in [-1, 1]).
OracleReport compare_rhs_with_oracle(int n_min, int n_max, std::size_t draws_per_n, std::uint64_t seed,
                                     double threshold = 1e-12);

/// Exact propagator of one constant-coupling segment via symmetric eigendecomposition.
class SegmentPropagator {
 public:
  SegmentPropagator(const std::vector<double>& couplings, const ChainSpec& spec);

  /// exp(-i H dt) psi.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi, double dt) const;

  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
};

/// Product of segment exponentials applied to psi0.
WaveState expm_propagate(const Schedule& s, const WaveState& psi0);

struct BruteForceOptions {
  double fidelity_target = 1.0 - 1e-6;
  /// Bisection stops once the bracket is narrower than this.
  double time_tol = 1e-4;
  std::uint64_t seed = 20240501;
  int max_iterations = 300;
  /// Worker threads for restarts; 0 uses hardware concurrency.
  unsigned threads = 0;
};

struct BruteForceResult {
  Schedule schedule;
  double tau = 0.0;
  double fidelity = 0.0;
  bool converged = false;
  std::size_t evaluations = 0;
};

/// Smallest total time for which some schedule of `n_segments` equal-length
/// segments, each on the sphere sum J^2 = J0^2, reaches the fidelity target.
/// Model-free: bisection on time with multistart quasi-Newton fidelity maximization.
BruteForceResult brute_force_min_time(const ChainSpec& spec, int n_segments, int restarts,
                                      const BruteForceOptions& options = {});

/// Fidelity of equal-length segments with couplings J0 u_s / |u_s| and its
/// gradient with respect to the flattened u (exposed for testing).
double segment_fidelity(const ChainSpec& spec, double total_time, const std::vector<double>& u,
                        std::vector<double>* gradient);

}  // namespace qbt
