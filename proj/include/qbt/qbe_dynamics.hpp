#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qbt/chain_model.hpp"
#include "qbt/ode.hpp"

namespace qbt {

/// Time derivative of a ControlState.
struct ControlRate {
  std::vector<double> d_couplings;
  std::vector<double> d_multipliers;
};

/// Structured right-hand side of the brachistochrone system for (J, lambda).
/// Out-of-range couplings and multipliers are treated as zero.
ControlRate qbe_rhs(const ControlState& c, const ChainSpec& spec);

/// d psi_n / dt = -i (J_{n-1} psi_{n-1} + J_n psi_{n+1}).
std::vector<Complex> schrodinger_rhs(std::span<const Complex> psi, std::span<const double> couplings,
                                     const ChainSpec& spec);

/// Real-gauge form: d phi_n / dt = -J_{n-1} phi_{n-1} + J_n phi_{n+1}.
std::vector<double> schrodinger_rhs_real(std::span<const double> phi, std::span<const double> couplings,
                                         const ChainSpec& spec);

/// phi_n = i^{-(n-1)} psi_n; throws GaugeError when an imaginary remainder exceeds `tol`.
std::vector<double> to_real_gauge(std::span<const Complex> psi, double tol = 1e-9);
/// psi_n = i^{n-1} phi_n.
std::vector<Complex> from_real_gauge(std::span<const double> phi);

enum class Propagation {
  automatic,   ///< real gauge when the initial state allows it
  real_gauge,  ///< packed as [J | lambda | phi]
  complex,     ///< packed as [J | lambda | Re psi | Im psi]
};

/// The coupled (J, lambda, wavefunction) vector field as a sparse list of
/// bilinear terms dy[out] += coeff * y[lhs] * y[rhs]. Every term of the
/// system is bilinear, which makes the vector-Jacobian product exact and cheap.
class QbeField {
 public:
  /// `with_wave = false` drops the wavefunction block (controls only).
  QbeField(const ChainSpec& spec, Propagation layout, bool with_wave = true);

  std::size_t dimension() const { return dimension_; }
  std::size_t coupling_offset() const { return 0; }
  std::size_t multiplier_offset() const { return n_bonds_; }
  std::size_t wave_offset() const { return n_bonds_ + n_multipliers_; }
  Propagation layout() const { return layout_; }

  void rhs(std::span<const double> y, std::span<double> dy) const;
  /// out = (dF/dy)^T a.
  void vjp(std::span<const double> y, std::span<const double> a, std::span<double> out) const;

  std::vector<double> pack(const ControlState& c, const WaveState& psi) const;
  ControlState unpack_control(std::span<const double> y) const;
  WaveState unpack_wave(std::span<const double> y) const;

 private:
  struct Term {
    std::uint32_t out;
    std::uint32_t lhs;
    std::uint32_t rhs;
    double coeff;
  };
  std::vector<Term> terms_;
  ChainSpec spec_;
  Propagation layout_;
  bool with_wave_;
  std::size_t n_bonds_;
  std::size_t n_multipliers_;
  std::size_t dimension_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ControlState> control_samples;
  std::vector<WaveState> wave_samples;
  ChainSpec spec;
  ode::Stats stats;
};

struct IntegrationOptions {
  double tol = 1e-10;
  /// Uniform samples including both endpoints; at least 2.
  std::size_t samples = 2;
  Propagation propagation = Propagation::automatic;
};

/// Integrates the coupled control/wavefunction system on [0, t_end].
Trajectory integrate(const ControlState& c0, const WaveState& psi0, double t_end, const ChainSpec& spec,
                     const IntegrationOptions& options = {});

struct ConservationReport {
  double coupling_norm_drift = 0.0;
  double multiplier_norm_drift = 0.0;
  double wave_norm_drift = 0.0;
  double spectrum_drift = 0.0;

  double max() const;
};

ConservationReport conservation_report(const Trajectory& trajectory);

/// Sorted eigenvalues of H + D.
std::vector<double> generator_spectrum(const ControlState& c, const ChainSpec& spec);

}  // namespace qbt
