#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qbt {

using Complex = std::complex<double>;

/// Problem instance: number of sites and the coupling budget J0 (hbar = 1).
class ChainSpec {
 public:
  ChainSpec(int n_sites, double j0);

  int n_sites() const { return n_sites_; }
  double j0() const { return j0_; }

  /// Number of nearest-neighbour bonds, N - 1.
  std::size_t n_bonds() const { return static_cast<std::size_t>(n_sites_ - 1); }
  /// Number of multipliers lambda_{k,k+n} with n >= 2, (N-1)(N-2)/2.
  std::size_t n_multipliers() const;

  bool operator==(const ChainSpec&) const = default;

 private:
  int n_sites_;
  double j0_;
};

/// Couplings J_m (m = 1..N-1) and multipliers lambda_{k,k+n} in packed order.
struct ControlState {
  std::vector<double> couplings;
  std::vector<double> multipliers;

  static ControlState zeros(const ChainSpec& spec);

  /// Throws ShapeError on length mismatch and NumericalError on non-finite entries.
  void check(const ChainSpec& spec) const;
};

/// Single-excitation amplitudes. `gauge_amplitudes` is either empty or holds
/// the real phi_n with psi_n = i^(n-1) phi_n.
struct WaveState {
  std::vector<Complex> amplitudes;
  std::vector<double> gauge_amplitudes;

  /// Excitation on site 1.
  static WaveState first_site(const ChainSpec& spec);

  double norm_squared() const;
  /// |psi_n|^2 with 1-based n.
  double probability(int site) const;
};

/// Dense N x N Hermitian matrix (the Hamiltonian, or Hamiltonian plus multiplier matrix).
struct GeneratorMatrix {
  Eigen::MatrixXcd entries;
};

/// Packed ordinal of lambda_{k,k+n}: k ascending, then n ascending. 1 <= k <= N-1, 2 <= n <= N-k.
std::size_t multiplier_index(int k, int n, const ChainSpec& spec);

/// Inverse of multiplier_index: returns (k, n).
std::pair<int, int> multiplier_pair(std::size_t ordinal, const ChainSpec& spec);

/// Real symmetric tridiagonal matrix with H(m, m+1) = J_m.
GeneratorMatrix build_hamiltonian(std::span<const double> couplings, const ChainSpec& spec);

/// H + D where D = sum lambda_{k,k+q} B^e_{k,k+q} and B^e_{k,k+q} = X_{k,k+q}(i^(q-1)).
GeneratorMatrix build_generator(const ControlState& c, const ChainSpec& spec);

/// Sum of squared couplings.
double coupling_norm(std::span<const double> couplings);

/// i^p for integer p (any sign).
Complex i_power(int p);

}  // namespace qbt
