#include "qbt/qbe_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "qbt/errors.hpp"

namespace qbt {

QbeField::QbeField(const ChainSpec& spec, Propagation layout, bool with_wave)
    : spec_(spec),
      layout_(layout == Propagation::automatic ? Propagation::real_gauge : layout),
      with_wave_(with_wave),
      n_bonds_(spec.n_bonds()),
      n_multipliers_(spec.n_multipliers()) {
  const int N = spec.n_sites();
  const auto n_sites = static_cast<std::size_t>(N);
  std::size_t wave_size = 0;
  if (with_wave_) wave_size = layout_ == Propagation::complex ? 2 * n_sites : n_sites;
  dimension_ = n_bonds_ + n_multipliers_ + wave_size;

  using Slot = std::optional<std::uint32_t>;
  auto coupling = [&](int m) -> Slot {
    if (m < 1 || m > N - 1) return std::nullopt;
    return static_cast<std::uint32_t>(m - 1);
  };
  auto multiplier = [&](int a, int b) -> Slot {
    if (a < 1 || b > N || b - a < 2) return std::nullopt;
    return static_cast<std::uint32_t>(n_bonds_ + multiplier_index(a, b - a, spec));
  };
  auto add = [&](Slot out, Slot lhs, Slot rhs, double coeff) {
    if (out && lhs && rhs) terms_.push_back({*out, *lhs, *rhs, coeff});
  };

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int m = 1; m <= N - 1; ++m) {
    add(coupling(m), coupling(m + 1), multiplier(m, m + 2), inv_sqrt2);
    add(coupling(m), coupling(m - 1), multiplier(m - 1, m + 1), -inv_sqrt2);
  }
  for (int k = 1; k <= N - 2; ++k) {
    for (int n = 2; n <= N - k; ++n) {
      const Slot out = multiplier(k, k + n);
      add(out, coupling(k + n), multiplier(k, k + n + 1), 1.0);
      add(out, coupling(k - 1), multiplier(k - 1, k + n), -1.0);
      add(out, coupling(k + n - 1), multiplier(k, k + n - 1), -1.0);
      add(out, coupling(k), multiplier(k + 1, k + n), 1.0);
    }
  }

  if (!with_wave_) return;
  const std::size_t w = wave_offset();
  auto site = [&](int n, std::size_t block) -> Slot {
    if (n < 1 || n > N) return std::nullopt;
    return static_cast<std::uint32_t>(w + block * n_sites + static_cast<std::size_t>(n - 1));
  };
  for (int n = 1; n <= N; ++n) {
    if (layout_ == Propagation::real_gauge) {
      add(site(n, 0), coupling(n - 1), site(n - 1, 0), -1.0);
      add(site(n, 0), coupling(n), site(n + 1, 0), 1.0);
    } else {
      // Block 0 holds Re psi, block 1 holds Im psi.
      add(site(n, 0), coupling(n - 1), site(n - 1, 1), 1.0);
      add(site(n, 0), coupling(n), site(n + 1, 1), 1.0);
      add(site(n, 1), coupling(n - 1), site(n - 1, 0), -1.0);
      add(site(n, 1), coupling(n), site(n + 1, 0), -1.0);
    }
  }
}

void QbeField::rhs(std::span<const double> y, std::span<double> dy) const {
  std::fill(dy.begin(), dy.end(), 0.0);
  for (const Term& t : terms_) dy[t.out] += t.coeff * y[t.lhs] * y[t.rhs];
}

void QbeField::vjp(std::span<const double> y, std::span<const double> a, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const Term& t : terms_) {
    const double w = t.coeff * a[t.out];
    out[t.lhs] += w * y[t.rhs];
    out[t.rhs] += w * y[t.lhs];
  }
}

std::vector<double> QbeField::pack(const ControlState& c, const WaveState& psi) const {
  c.check(spec_);
  std::vector<double> y(dimension_, 0.0);
  std::copy(c.couplings.begin(), c.couplings.end(), y.begin());
  std::copy(c.multipliers.begin(), c.multipliers.end(), y.begin() + static_cast<long>(n_bonds_));
  if (!with_wave_) return y;
  const auto n_sites = static_cast<std::size_t>(spec_.n_sites());
  const std::size_t w = wave_offset();
  if (layout_ == Propagation::real_gauge) {
    std::vector<double> phi = psi.gauge_amplitudes;
    if (phi.empty()) phi = to_real_gauge(psi.amplitudes);
    if (phi.size() != n_sites) throw ShapeError("wavefunction length does not match chain");
    std::copy(phi.begin(), phi.end(), y.begin() + static_cast<long>(w));
  } else {
    if (psi.amplitudes.size() != n_sites) throw ShapeError("wavefunction length does not match chain");
    for (std::size_t n = 0; n < n_sites; ++n) {
      y[w + n] = psi.amplitudes[n].real();
      y[w + n_sites + n] = psi.amplitudes[n].imag();
    }
  }
  return y;
}

ControlState QbeField::unpack_control(std::span<const double> y) const {
  ControlState c;
  c.couplings.assign(y.begin(), y.begin() + static_cast<long>(n_bonds_));
  c.multipliers.assign(y.begin() + static_cast<long>(n_bonds_),
                       y.begin() + static_cast<long>(n_bonds_ + n_multipliers_));
  return c;
}

WaveState QbeField::unpack_wave(std::span<const double> y) const {
  WaveState psi;
  if (!with_wave_) return psi;
  const auto n_sites = static_cast<std::size_t>(spec_.n_sites());
  const std::size_t w = wave_offset();
  if (layout_ == Propagation::real_gauge) {
    psi.gauge_amplitudes.assign(y.begin() + static_cast<long>(w), y.begin() + static_cast<long>(w + n_sites));
    psi.amplitudes = from_real_gauge(psi.gauge_amplitudes);
  } else {
    psi.amplitudes.resize(n_sites);
    for (std::size_t n = 0; n < n_sites; ++n) psi.amplitudes[n] = {y[w + n], y[w + n_sites + n]};
  }
  return psi;
}

ControlRate qbe_rhs(const ControlState& c, const ChainSpec& spec) {
  const QbeField field(spec, Propagation::real_gauge, /*with_wave=*/false);
  const std::vector<double> y = field.pack(c, WaveState{});
  std::vector<double> dy(y.size());
  field.rhs(y, dy);
  ControlState d = field.unpack_control(dy);
  return {std::move(d.couplings), std::move(d.multipliers)};
}

std::vector<Complex> schrodinger_rhs(std::span<const Complex> psi, std::span<const double> couplings,
                                     const ChainSpec& spec) {
  const auto N = static_cast<std::size_t>(spec.n_sites());
  if (psi.size() != N || couplings.size() != spec.n_bonds()) {
    throw ShapeError("schrodinger_rhs: inconsistent lengths");
  }
  const Complex minus_i{0.0, -1.0};
  std::vector<Complex> d(N);
  for (std::size_t n = 0; n < N; ++n) {
    Complex h{};
    if (n > 0) h += couplings[n - 1] * psi[n - 1];
    if (n + 1 < N) h += couplings[n] * psi[n + 1];
    d[n] = minus_i * h;
  }
  return d;
}

std::vector<double> schrodinger_rhs_real(std::span<const double> phi, std::span<const double> couplings,
                                         const ChainSpec& spec) {
  const auto N = static_cast<std::size_t>(spec.n_sites());
  if (phi.size() != N || couplings.size() != spec.n_bonds()) {
    throw ShapeError("schrodinger_rhs_real: inconsistent lengths");
  }
  std::vector<double> d(N, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    if (n > 0) d[n] -= couplings[n - 1] * phi[n - 1];
    if (n + 1 < N) d[n] += couplings[n] * phi[n + 1];
  }
  return d;
}

std::vector<double> to_real_gauge(std::span<const Complex> psi, double tol) {
  std::vector<double> phi(psi.size());
  for (std::size_t n = 0; n < psi.size(); ++n) {
    const Complex v = psi[n] * i_power(-static_cast<int>(n));
    if (std::abs(v.imag()) > tol) {
      throw GaugeError("amplitude " + std::to_string(n + 1) + " is not real in the i^(n-1) gauge");
    }
    phi[n] = v.real();
  }
  return phi;
}

std::vector<Complex> from_real_gauge(std::span<const double> phi) {
  std::vector<Complex> psi(phi.size());
  for (std::size_t n = 0; n < phi.size(); ++n) psi[n] = phi[n] * i_power(static_cast<int>(n));
  return psi;
}

Trajectory integrate(const ControlState& c0, const WaveState& psi0, double t_end, const ChainSpec& spec,
                     const IntegrationOptions& options) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw PreconditionError("t_end must be positive");
  if (!(options.tol >= 1e-14 && options.tol <= 1e-6)) {
    throw PreconditionError("integration tolerance outside [1e-14, 1e-6]");
  }
  Propagation layout = options.propagation;
  if (layout == Propagation::automatic) {
    layout = Propagation::real_gauge;
    if (psi0.gauge_amplitudes.empty()) {
      try {
        (void)to_real_gauge(psi0.amplitudes);
      } catch (const GaugeError&) {
        layout = Propagation::complex;
      }
    }
  }
  const QbeField field(spec, layout);
  std::vector<double> y = field.pack(c0, psi0);

  const std::size_t n_samples = std::max<std::size_t>(options.samples, 2);
  std::vector<double> times(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    times[i] = t_end * static_cast<double>(i) / static_cast<double>(n_samples - 1);
  }
  times.back() = t_end;
  ode::DenseSampler sampler(times, y.size());
  sampler.seed(0.0, y);

  const ode::Rhs rhs = [&field](double, std::span<const double> s, std::span<double> ds) {
    field.rhs(s, ds);
  };
  ode::Options ode_options;
  ode_options.tol = options.tol;
  ode_options.dense = n_samples > 2;
  const ode::Stats stats =
      ode::integrate(rhs, 0.0, t_end, y, ode_options, [&sampler](const ode::AcceptedStep& s) { sampler(s); });

  Trajectory traj{times, {}, {}, spec, stats};
  traj.control_samples.reserve(n_samples);
  traj.wave_samples.reserve(n_samples);
  for (const auto& s : sampler.samples()) {
    traj.control_samples.push_back(field.unpack_control(s));
    traj.wave_samples.push_back(field.unpack_wave(s));
  }
  return traj;
}

std::vector<double> generator_spectrum(const ControlState& c, const ChainSpec& spec) {
  const GeneratorMatrix g = build_generator(c, spec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(g.entries, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed on H + D");
  const Eigen::VectorXd& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double ConservationReport::max() const {
  return std::max({coupling_norm_drift, multiplier_norm_drift, wave_norm_drift, spectrum_drift});
}

ConservationReport conservation_report(const Trajectory& trajectory) {
  if (trajectory.control_samples.empty()) throw PreconditionError("empty trajectory");
  auto relative = [](double value, double reference) {
    const double d = std::abs(value - reference);
    return reference > 0.0 ? d / reference : d;
  };
  auto multiplier_norm = [](const ControlState& c) {
    double s = 0.0;
    for (double l : c.multipliers) s += l * l;
    return s;
  };
  const ControlState& first = trajectory.control_samples.front();
  const double j_ref = coupling_norm(first.couplings);
  const double l_ref = multiplier_norm(first);
  const std::vector<double> spectrum_ref = generator_spectrum(first, trajectory.spec);

  ConservationReport report;
  for (std::size_t i = 0; i < trajectory.control_samples.size(); ++i) {
    const ControlState& c = trajectory.control_samples[i];
    report.coupling_norm_drift = std::max(report.coupling_norm_drift, relative(coupling_norm(c.couplings), j_ref));
    report.multiplier_norm_drift = std::max(report.multiplier_norm_drift, relative(multiplier_norm(c), l_ref));
    report.wave_norm_drift =
        std::max(report.wave_norm_drift, std::abs(trajectory.wave_samples[i].norm_squared() - 1.0));
    const std::vector<double> spectrum = generator_spectrum(c, trajectory.spec);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      report.spectrum_drift = std::max(report.spectrum_drift, std::abs(spectrum[k] - spectrum_ref[k]));
    }
  }
  return report;
}

}  // namespace qbt
