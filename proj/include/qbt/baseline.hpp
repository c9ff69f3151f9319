#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qbt/chain_model.hpp"

namespace qbt {

enum class ScheduleKind { stepwise, perfect, custom };

std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

/// Constant couplings held for `duration`.
struct Segment {
  double duration = 0.0;
  std::vector<double> couplings;
};

/// Piecewise-constant coupling protocol.
struct Schedule {
  ChainSpec spec{2, 1.0};
  ScheduleKind label = ScheduleKind::custom;
  std::vector<Segment> segments;

  double total_duration() const;
  /// Positive durations, correct lengths, and sum J^2 <= J0^2 + 1e-12 per segment.
  void validate() const;
};

/// (N-1) pi / (2 J0).
double stepwise_time(const ChainSpec& spec);
/// (pi / J0) sqrt(N (N^2 - 1) / 24).
double perfect_transfer_time(const ChainSpec& spec);

/// N-1 swaps of duration pi/(2 J0), one bond at a time at full budget.
Schedule stepwise_schedule(const ChainSpec& spec);

/// Static profile J_m = gamma sqrt(m (N - m)) / 2 with gamma fixed by sum J^2 = J0^2.
Schedule perfect_transfer_schedule(const ChainSpec& spec);

struct ScheduleSimulation {
  std::vector<double> times;
  std::vector<double> fidelity;  ///< |psi_N(t)|^2
  std::vector<double> position;  ///< sum_n n |psi_n(t)|^2, sites numbered from 1
  std::vector<std::vector<double>> probabilities;
  WaveState final_state;
};

/// Exact propagation from psi(0) = e_1, sampled at `samples` uniform times including both ends.
ScheduleSimulation simulate_schedule(const Schedule& s, std::size_t samples);

/// Coupling vector in force at time t (the later segment at a boundary).
const std::vector<double>& couplings_at(const Schedule& s, double t);

}  // namespace qbt
