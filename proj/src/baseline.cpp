#include "qbt/baseline.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qbt/errors.hpp"
#include "qbt/oracle.hpp"

namespace qbt {

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::stepwise: return "stepwise";
    case ScheduleKind::perfect: return "perfect";
    case ScheduleKind::custom: return "custom";
  }
  return "custom";
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "stepwise") return ScheduleKind::stepwise;
  if (s == "perfect") return ScheduleKind::perfect;
  if (s == "custom") return ScheduleKind::custom;
  throw ParseError("unknown schedule label '" + s + "'");
}

double Schedule::total_duration() const {
  double t = 0.0;
  for (const auto& seg : segments) t += seg.duration;
  return t;
}

void Schedule::validate() const {
  if (segments.empty()) throw PreconditionError("schedule has no segments");
  const double budget = spec.j0() * spec.j0() + 1e-12;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
      throw PreconditionError("segment " + std::to_string(i) + " has non-positive duration");
    }
    if (seg.couplings.size() != spec.n_bonds()) {
      throw ShapeError("segment " + std::to_string(i) + " has " + std::to_string(seg.couplings.size()) +
                       " couplings, expected " + std::to_string(spec.n_bonds()));
    }
    if (coupling_norm(seg.couplings) > budget) {
      throw PreconditionError("segment " + std::to_string(i) + " exceeds the coupling budget");
    }
  }
}

double stepwise_time(const ChainSpec& spec) {
  return (spec.n_sites() - 1) * std::numbers::pi / (2.0 * spec.j0());
}

double perfect_transfer_time(const ChainSpec& spec) {
  const double n = spec.n_sites();
  return std::numbers::pi / spec.j0() * std::sqrt(n * (n * n - 1.0) / 24.0);
}

Schedule stepwise_schedule(const ChainSpec& spec) {
  Schedule s{spec, ScheduleKind::stepwise, {}};
  const double dt = std::numbers::pi / (2.0 * spec.j0());
  for (std::size_t m = 0; m < spec.n_bonds(); ++m) {
    Segment seg{dt, std::vector<double>(spec.n_bonds(), 0.0)};
    seg.couplings[m] = spec.j0();
    s.segments.push_back(std::move(seg));
  }
  return s;
}

Schedule perfect_transfer_schedule(const ChainSpec& spec) {
  const int N = spec.n_sites();
  const double n = N;
  const double gamma = spec.j0() * std::sqrt(24.0 / (n * (n * n - 1.0)));
  Segment seg{std::numbers::pi / gamma, {}};
  for (int m = 1; m <= N - 1; ++m) seg.couplings.push_back(gamma * std::sqrt(double(m) * (N - m)) / 2.0);
  return Schedule{spec, ScheduleKind::perfect, {std::move(seg)}};
}

const std::vector<double>& couplings_at(const Schedule& s, double t) {
  double start = 0.0;
  for (const auto& seg : s.segments) {
    if (t < start + seg.duration) return seg.couplings;
    start += seg.duration;
  }
  return s.segments.back().couplings;
}

ScheduleSimulation simulate_schedule(const Schedule& s, std::size_t samples) {
  s.validate();
  samples = std::max<std::size_t>(samples, 2);
  const int N = s.spec.n_sites();
  const double total = s.total_duration();

  ScheduleSimulation sim;
  auto record = [&](double t, const Eigen::VectorXcd& psi) {
    sim.times.push_back(t);
    std::vector<double> p(static_cast<std::size_t>(N));
    double position = 0.0;
    for (int n = 0; n < N; ++n) {
      p[static_cast<std::size_t>(n)] = std::norm(psi(n));
      position += (n + 1) * p[static_cast<std::size_t>(n)];
    }
    sim.fidelity.push_back(p.back());
    sim.position.push_back(position);
    sim.probabilities.push_back(std::move(p));
  };

  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(N);
  psi(0) = 1.0;
  std::size_t next = 0;
  auto sample_time = [&](std::size_t i) {
    return i + 1 == samples ? total : total * static_cast<double>(i) / static_cast<double>(samples - 1);
  };

  double start = 0.0;
  for (std::size_t k = 0; k < s.segments.size(); ++k) {
    const Segment& seg = s.segments[k];
    const SegmentPropagator prop(seg.couplings, s.spec);
    const double end = (k + 1 == s.segments.size()) ? total : start + seg.duration;
    while (next < samples && (sample_time(next) < end || k + 1 == s.segments.size())) {
      const double dt = sample_time(next) - start;
      record(sample_time(next), dt == 0.0 ? psi : prop.apply(psi, dt));
      ++next;
    }
    psi = prop.apply(psi, seg.duration);
    start += seg.duration;
  }
  sim.final_state.amplitudes.assign(psi.data(), psi.data() + N);
  return sim;
}

}  // namespace qbt
