#include "qbt/chain_model.hpp"

#include <cmath>
#include <string>

#include "qbt/errors.hpp"

namespace qbt {

ChainSpec::ChainSpec(int n_sites, double j0) : n_sites_(n_sites), j0_(j0) {
  if (n_sites < 2) {
    throw PreconditionError("chain needs at least 2 sites, got " + std::to_string(n_sites));
  }
  if (!(j0 > 0.0) || !std::isfinite(j0)) {
    throw PreconditionError("coupling budget j0 must be positive and finite");
  }
}

std::size_t ChainSpec::n_multipliers() const {
  const auto n = static_cast<std::size_t>(n_sites_);
  return (n - 1) * (n - 2) / 2;
}

ControlState ControlState::zeros(const ChainSpec& spec) {
  return {std::vector<double>(spec.n_bonds(), 0.0), std::vector<double>(spec.n_multipliers(), 0.0)};
}

void ControlState::check(const ChainSpec& spec) const {
  if (couplings.size() != spec.n_bonds()) {
    throw ShapeError("expected " + std::to_string(spec.n_bonds()) + " couplings, got " +
                     std::to_string(couplings.size()));
  }
  if (multipliers.size() != spec.n_multipliers()) {
    throw ShapeError("expected " + std::to_string(spec.n_multipliers()) + " multipliers, got " +
                     std::to_string(multipliers.size()));
  }
  for (double v : couplings) {
    if (!std::isfinite(v)) throw NumericalError("non-finite coupling");
  }
  for (double v : multipliers) {
    if (!std::isfinite(v)) throw NumericalError("non-finite multiplier");
  }
}

WaveState WaveState::first_site(const ChainSpec& spec) {
  WaveState w;
  w.amplitudes.assign(static_cast<std::size_t>(spec.n_sites()), Complex{});
  w.amplitudes[0] = 1.0;
  w.gauge_amplitudes.assign(static_cast<std::size_t>(spec.n_sites()), 0.0);
  w.gauge_amplitudes[0] = 1.0;
  return w;
}

double WaveState::norm_squared() const {
  double s = 0.0;
  for (const auto& a : amplitudes) s += std::norm(a);
  return s;
}

double WaveState::probability(int site) const {
  return std::norm(amplitudes.at(static_cast<std::size_t>(site - 1)));
}

std::size_t multiplier_index(int k, int n, const ChainSpec& spec) {
  const int N = spec.n_sites();
  if (k < 1 || k > N - 1 || n < 2 || n > N - k) {
    throw IndexDomainError("multiplier (k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                           ") outside domain for N=" + std::to_string(N));
  }
  // Row j holds N - j - 1 entries.
  std::size_t offset = 0;
  for (int j = 1; j < k; ++j) offset += static_cast<std::size_t>(N - j - 1);
  return offset + static_cast<std::size_t>(n - 2);
}

std::pair<int, int> multiplier_pair(std::size_t ordinal, const ChainSpec& spec) {
  const int N = spec.n_sites();
  std::size_t remaining = ordinal;
  for (int k = 1; k <= N - 2; ++k) {
    const auto row = static_cast<std::size_t>(N - k - 1);
    if (remaining < row) return {k, static_cast<int>(remaining) + 2};
    remaining -= row;
  }
  throw IndexDomainError("multiplier ordinal " + std::to_string(ordinal) + " outside domain for N=" +
                         std::to_string(N));
}

GeneratorMatrix build_hamiltonian(std::span<const double> couplings, const ChainSpec& spec) {
  if (couplings.size() != spec.n_bonds()) {
    throw ShapeError("expected " + std::to_string(spec.n_bonds()) + " couplings, got " +
                     std::to_string(couplings.size()));
  }
  const int N = spec.n_sites();
  GeneratorMatrix h{Eigen::MatrixXcd::Zero(N, N)};
  for (int m = 0; m + 1 < N; ++m) {
    h.entries(m, m + 1) = couplings[static_cast<std::size_t>(m)];
    h.entries(m + 1, m) = couplings[static_cast<std::size_t>(m)];
  }
  return h;
}

Complex i_power(int p) {
  switch (((p % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

GeneratorMatrix build_generator(const ControlState& c, const ChainSpec& spec) {
  c.check(spec);
  GeneratorMatrix g = build_hamiltonian(c.couplings, spec);
  const int N = spec.n_sites();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 1; k <= N - 2; ++k) {
    for (int q = 2; q <= N - k; ++q) {
      const double lambda = c.multipliers[multiplier_index(k, q, spec)];
      const Complex lower = lambda * i_power(q - 1) * inv_sqrt2;
      // 0-based: row k+q-1, column k-1.
      g.entries(k + q - 1, k - 1) = lower;
      g.entries(k - 1, k + q - 1) = std::conj(lower);
    }
  }
  return g;
}

double coupling_norm(std::span<const double> couplings) {
  double s = 0.0;
  for (double j : couplings) s += j * j;
  return s;
}

}  // namespace qbt
