#include "qbt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include <json.hpp>

#include "qbt/errors.hpp"

namespace qbt {
namespace {

Eigen::MatrixXcd commutator(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return a * b - b * a; }

// Tr(B M) for Hermitian B; the imaginary part must vanish for Hermitian M as well.
double projection(const Eigen::MatrixXcd& basis, const Eigen::MatrixXcd& m) { return (basis * m).trace().real(); }

}  // namespace

Eigen::MatrixXcd basis_x(int m, int n, Complex z, int n_sites) {
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(n_sites, n_sites);
  const double s = 1.0 / std::sqrt(2.0);
  // E_{nm} has its unit entry at row n, column m.
  x(n - 1, m - 1) += z * s;
  x(m - 1, n - 1) += std::conj(z) * s;
  return x;
}

ControlRate commutator_rhs_oracle(const ControlState& c, const ChainSpec& spec, double closure_tol) {
  c.check(spec);
  const int N = spec.n_sites();
  const Eigen::MatrixXcd g = build_generator(c, spec).entries;
  const Eigen::MatrixXcd h = build_generator({c.couplings, std::vector<double>(spec.n_multipliers(), 0.0)}, spec).entries;
  const Eigen::MatrixXcd d = g - h;
  const Eigen::MatrixXcd rate = Complex{0.0, -1.0} * commutator(h, d);

  ControlRate out;
  out.d_couplings.resize(spec.n_bonds());
  out.d_multipliers.resize(spec.n_multipliers());
  for (int m = 1; m <= N - 1; ++m) {
    out.d_couplings[static_cast<std::size_t>(m - 1)] = projection(basis_x(m, m + 1, 1.0, N), rate) / std::sqrt(2.0);
  }
  for (int k = 1; k <= N - 2; ++k) {
    for (int q = 2; q <= N - k; ++q) {
      out.d_multipliers[multiplier_index(k, q, spec)] = projection(basis_x(k, k + q, i_power(q - 1), N), rate);
    }
  }

  // Directions outside the closed family: B^o_{m,m+q} = X_{m,m+q}(i^q), q >= 1, and the diagonal generators.
  double leak = 0.0;
  for (int m = 1; m <= N - 1; ++m) {
    for (int q = 1; q <= N - m; ++q) {
      leak = std::max(leak, std::abs(projection(basis_x(m, m + q, i_power(q), N), rate)));
    }
    Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(N, N);
    for (int p = 0; p < m; ++p) diag(p, p) = 1.0;
    diag(m, m) = -double(m);
    diag /= std::sqrt(double(m) * (m + 1));
    leak = std::max(leak, std::abs(projection(diag, rate)));
  }
  if (leak > closure_tol) {
    throw BasisClosureError("commutator leaves the A/B^e family (projection " + std::to_string(leak) + ")");
  }
  return out;
}

OracleReport compare_rhs_with_oracle(int n_min, int n_max, std::size_t draws_per_n, std::uint64_t seed,
                                     double threshold) {
  OracleReport report;
  report.name = "commutator_rhs";
  report.threshold = threshold;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (int n = n_min; n <= n_max; ++n) {
    const ChainSpec spec(n, 1.0);
    for (std::size_t draw = 0; draw < draws_per_n; ++draw) {
      ControlState c = ControlState::zeros(spec);
      for (double& v : c.couplings) v = uniform(rng);
      for (double& v : c.multipliers) v = uniform(rng);
      const ControlRate structured = qbe_rhs(c, spec);
      const ControlRate dense = commutator_rhs_oracle(c, spec);
      double dev = 0.0;
      for (std::size_t i = 0; i < structured.d_couplings.size(); ++i) {
        dev = std::max(dev, std::abs(structured.d_couplings[i] - dense.d_couplings[i]));
      }
      for (std::size_t i = 0; i < structured.d_multipliers.size(); ++i) {
        dev = std::max(dev, std::abs(structured.d_multipliers[i] - dense.d_multipliers[i]));
      }
      ++report.cases_run;
      if (dev >= report.max_abs_deviation) {
        report.max_abs_deviation = dev;
        report.worst_case_input =
            nlohmann::json{{"n_sites", n}, {"couplings", c.couplings}, {"multipliers", c.multipliers}}.dump();
      }
    }
  }
  return report;
}

SegmentPropagator::SegmentPropagator(const std::vector<double>& couplings, const ChainSpec& spec) {
  if (couplings.size() != spec.n_bonds()) throw ShapeError("segment coupling length mismatch");
  const int N = spec.n_sites();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(N, N);
  for (int m = 0; m + 1 < N; ++m) {
    h(m, m + 1) = couplings[static_cast<std::size_t>(m)];
    h(m + 1, m) = couplings[static_cast<std::size_t>(m)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed for segment Hamiltonian");
  values_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
}

Eigen::VectorXcd SegmentPropagator::apply(const Eigen::VectorXcd& psi, double dt) const {
  Eigen::VectorXcd coeffs = vectors_.transpose().cast<Complex>() * psi;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) coeffs(j) *= std::exp(Complex{0.0, -values_(j) * dt});
  return vectors_.cast<Complex>() * coeffs;
}

WaveState expm_propagate(const Schedule& s, const WaveState& psi0) {
  s.validate();
  const auto N = static_cast<Eigen::Index>(s.spec.n_sites());
  if (psi0.amplitudes.size() != static_cast<std::size_t>(N)) throw ShapeError("initial state length mismatch");
  Eigen::VectorXcd psi = Eigen::Map<const Eigen::VectorXcd>(psi0.amplitudes.data(), N);
  for (const Segment& seg : s.segments) psi = SegmentPropagator(seg.couplings, s.spec).apply(psi, seg.duration);
  WaveState out;
  out.amplitudes.assign(psi.data(), psi.data() + N);
  return out;
}

double segment_fidelity(const ChainSpec& spec, double total_time, const std::vector<double>& u,
                        std::vector<double>* gradient) {
  const int N = spec.n_sites();
  const auto bonds = static_cast<std::size_t>(N - 1);
  const std::size_t segments = u.size() / bonds;
  const double dt = total_time / static_cast<double>(segments);

  std::vector<double> radius(segments);
  std::vector<SegmentPropagator> props;
  props.reserve(segments);
  std::vector<Eigen::VectorXcd> states{Eigen::VectorXcd::Zero(N)};
  states[0](0) = 1.0;
  for (std::size_t s = 0; s < segments; ++s) {
    double r = 0.0;
    for (std::size_t m = 0; m < bonds; ++m) r += u[s * bonds + m] * u[s * bonds + m];
    radius[s] = std::max(std::sqrt(r), 1e-300);
    std::vector<double> j(bonds);
    for (std::size_t m = 0; m < bonds; ++m) j[m] = spec.j0() * u[s * bonds + m] / radius[s];
    props.emplace_back(j, spec);
    states.push_back(props.back().apply(states.back(), dt));
  }
  const Complex amplitude = states.back()(N - 1);
  const double fidelity = std::norm(amplitude);
  if (gradient == nullptr) return fidelity;

  gradient->assign(u.size(), 0.0);
  // row = e_N^T U_S ... U_{s+1}, carried backward.
  Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(N);
  row(N - 1) = 1.0;
  for (std::size_t s = segments; s-- > 0;) {
    const Eigen::MatrixXd& v = props[s].eigenvectors();
    const Eigen::VectorXd& lam = props[s].eigenvalues();
    const Eigen::RowVectorXcd a = row * v.cast<Complex>();
    const Eigen::VectorXcd b = v.transpose().cast<Complex>() * states[s];
    // Divided differences of exp(-i x dt) in the eigenbasis (Daleckii-Krein).
    Eigen::MatrixXcd weights(N, N);
    for (int p = 0; p < N; ++p) {
      for (int q = 0; q < N; ++q) {
        const double half = 0.5 * (lam(p) - lam(q)) * dt;
        const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
        const Complex phase = std::exp(Complex{0.0, -0.5 * (lam(p) + lam(q)) * dt});
        weights(p, q) = a(p) * Complex{0.0, -dt} * phase * sinc * b(q);
      }
    }
    const Eigen::MatrixXcd w = v.cast<Complex>() * weights * v.transpose().cast<Complex>();
    std::vector<double> d_j(bonds);
    for (std::size_t m = 0; m < bonds; ++m) {
      const auto mi = static_cast<Eigen::Index>(m);
      const Complex d_amp = w(mi, mi + 1) + w(mi + 1, mi);
      d_j[m] = 2.0 * (std::conj(amplitude) * d_amp).real();
    }
    // Chain rule through J = J0 u / |u|.
    double dot = 0.0;
    for (std::size_t m = 0; m < bonds; ++m) dot += d_j[m] * u[s * bonds + m] / radius[s];
    for (std::size_t m = 0; m < bonds; ++m) {
      (*gradient)[s * bonds + m] = spec.j0() / radius[s] * (d_j[m] - dot * u[s * bonds + m] / radius[s]);
    }
    // Advance the row through U_s.
    Eigen::RowVectorXcd coeffs = a;
    for (int p = 0; p < N; ++p) coeffs(p) *= std::exp(Complex{0.0, -lam(p) * dt});
    row = coeffs * v.transpose().cast<Complex>();
  }
  return fidelity;
}

namespace {

struct LocalResult {
  std::vector<double> u;
  double fidelity = 0.0;
  std::size_t evaluations = 0;
};

// Quasi-Newton maximization of the segment fidelity, stopping early once `target` is met.
LocalResult maximize_fidelity(const ChainSpec& spec, double total_time, std::vector<double> u, double target,
                              int max_iterations) {
  const auto n = static_cast<Eigen::Index>(u.size());
  LocalResult out;
  std::vector<double> grad;
  auto eval = [&](const std::vector<double>& x, std::vector<double>* g) {
    ++out.evaluations;
    const double fidelity = segment_fidelity(spec, total_time, x, g);
    if (g) {
      for (double& v : *g) v = -v;
    }
    return 1.0 - fidelity;
  };
  double f = eval(u, &grad);
  Eigen::VectorXd g = Eigen::Map<Eigen::VectorXd>(grad.data(), n);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iterations && 1.0 - f < target; ++it) {
    if (g.norm() < 1e-13) break;
    Eigen::VectorXd dir = -h_inv * g;
    if (g.dot(dir) >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
    }
    if (dir.norm() > 1.0) dir /= dir.norm();
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial(u.size());
    double f_trial = f;
    for (int k = 0; k < 30; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + alpha * dir(i);
      f_trial = eval(trial, nullptr);
      if (f_trial <= f + 1e-4 * alpha * g.dot(dir)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    f_trial = eval(trial, &grad);
    const Eigen::VectorXd g_new = Eigen::Map<Eigen::VectorXd>(grad.data(), n);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = trial[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(i)];
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (it == 0) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
      h_inv = (i_n - rho * s * y.transpose()) * h_inv * (i_n - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    u = trial;
    f = f_trial;
    g = g_new;
  }
  out.u = std::move(u);
  out.fidelity = 1.0 - f;
  return out;
}

Schedule schedule_from(const ChainSpec& spec, double total_time, const std::vector<double>& u) {
  const std::size_t bonds = spec.n_bonds();
  const std::size_t segments = u.size() / bonds;
  Schedule s{spec, ScheduleKind::custom, {}};
  for (std::size_t k = 0; k < segments; ++k) {
    double r = 0.0;
    for (std::size_t m = 0; m < bonds; ++m) r += u[k * bonds + m] * u[k * bonds + m];
    r = std::sqrt(r);
    Segment seg{total_time / static_cast<double>(segments), std::vector<double>(bonds)};
    for (std::size_t m = 0; m < bonds; ++m) seg.couplings[m] = spec.j0() * u[k * bonds + m] / r;
    s.segments.push_back(std::move(seg));
  }
  return s;
}

}  // namespace

BruteForceResult brute_force_min_time(const ChainSpec& spec, int n_segments, int restarts,
                                      const BruteForceOptions& options) {
  if (spec.n_sites() > 5) throw PreconditionError("brute-force search is limited to N <= 5");
  if (n_segments < 1 || restarts < 1) throw PreconditionError("need at least one segment and one restart");
  const std::size_t dim = spec.n_bonds() * static_cast<std::size_t>(n_segments);
  const unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;

  std::vector<std::vector<double>> starts(static_cast<std::size_t>(restarts), std::vector<double>(dim));
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : starts[static_cast<std::size_t>(r)]) v = normal(rng);
  }

  BruteForceResult result;
  result.schedule.spec = spec;
  std::vector<double> warm;

  // Returns the lowest-index successful local search, trying the previous feasible point first.
  auto feasible = [&](double total_time, LocalResult* found) {
    if (!warm.empty()) {
      LocalResult lr = maximize_fidelity(spec, total_time, warm, options.fidelity_target, options.max_iterations);
      result.evaluations += lr.evaluations;
      if (lr.fidelity >= options.fidelity_target) {
        *found = std::move(lr);
        return true;
      }
    }
    for (int base = 0; base < restarts; base += static_cast<int>(threads)) {
      const int batch = std::min(static_cast<int>(threads), restarts - base);
      std::vector<std::future<LocalResult>> jobs;
      for (int r = base; r < base + batch; ++r) {
        jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, [&, r] {
          return maximize_fidelity(spec, total_time, starts[static_cast<std::size_t>(r)], options.fidelity_target,
                                   options.max_iterations);
        }));
      }
      std::vector<LocalResult> done;
      for (auto& j : jobs) done.push_back(j.get());
      for (auto& lr : done) {
        result.evaluations += lr.evaluations;
        if (lr.fidelity >= options.fidelity_target) {
          *found = std::move(lr);
          return true;
        }
      }
    }
    return false;
  };

  double hi = (spec.n_sites() - 1) * std::numbers::pi / (2.0 * spec.j0());
  LocalResult best;
  bool have_hi = false;
  for (int expand = 0; expand < 6 && !have_hi; ++expand) {
    have_hi = feasible(hi, &best);
    if (!have_hi) hi *= 1.25;
  }
  if (!have_hi) {
    result.tau = hi;
    result.converged = false;
    return result;
  }
  warm = best.u;
  double lo = 0.0;
  while (hi - lo > options.time_tol) {
    const double mid = 0.5 * (lo + hi);
    LocalResult lr;
    if (feasible(mid, &lr)) {
      hi = mid;
      best = std::move(lr);
      warm = best.u;
    } else {
      lo = mid;
    }
  }
  result.tau = hi;
  result.fidelity = best.fidelity;
  result.schedule = schedule_from(spec, hi, best.u);
  result.converged = true;
  return result;
}

}  // namespace qbt
