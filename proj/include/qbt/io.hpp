#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbt/baseline.hpp"
#include "qbt/oracle.hpp"
#include "qbt/sweep.hpp"
#include "qbt/transfer_solver.hpp"

namespace qbt::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Environment variable naming the default seed store.
inline constexpr const char* kSeedStoreEnv = "QBT_SEED_STORE";

/// Fixed formatting used for every file the library writes.
std::string dump(const json& j);

json to_json(const Solution& s);
/// Trajectories are not serialized; the returned Solution has none.
Solution solution_from_json(const json& j);

json to_json(const Schedule& s);
Schedule schedule_from_json(const json& j);

json to_json(const OracleReport& r);
json to_json(const ScalingFit& f);
json to_json(const ConservationReport& r);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// 64-bit FNV-1a over the compact serialization, as 16 hex digits.
std::string checksum(const json& j);

/// Persisted canonical solution summary for one chain length.
struct SeedEntry {
  int n_sites = 0;
  ShootingParams params;
  /// tau * J0 (the scaled-time J_1(0)).
  double tau_j0 = 0.0;
  double fidelity = 0.0;
  SolverMetadata metadata;
};

/// One canonical entry per N, checksummed per entry. Loading never repairs a
/// mismatching checksum.
class SeedStore {
 public:
  static SeedStore load(const std::filesystem::path& path);
  /// Empty store when the file does not exist.
  static SeedStore load_or_empty(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  json to_json() const;
  static SeedStore from_json(const json& j);

  void put(const Solution& s);
  void put(const SeedEntry& e);
  const SeedEntry* find(int n_sites) const;
  std::map<int, ShootingParams> seeds() const;
  const std::map<int, SeedEntry>& entries() const { return entries_; }

 private:
  std::map<int, SeedEntry> entries_;
};

/// Settings shared by the command-line front end.
struct RunConfig {
  int n_sites = 0;
  double j0 = 1.0;
  double integration_tol = 1e-12;
  double residual_tol = 1e-10;
  double infidelity_tol = 1e-9;
  SolveMethod method = SolveMethod::automatic;
  std::size_t samples = 0;
  unsigned jobs = 1;
  std::filesystem::path out;
  std::optional<std::filesystem::path> seed_store;

  /// Tolerances must lie in [1e-14, 1e-6]; jobs >= 1.
  void validate() const;
  SolverOptions solver_options() const;
};

/// Path named by QBT_SEED_STORE, if set and non-empty.
std::optional<std::filesystem::path> default_seed_store();

std::string format_number(double x);

/// t, J_1..J_{N-1}, P_1..P_N, x_mean.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_schedule_csv(std::ostream& os, const Schedule& s, const ScheduleSimulation& sim);

/// n, tau, fidelity, method, converged, tau_stepwise, tau_perfect, ratio_stepwise, ratio_perfect, residual_norm, iterations.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

/// Reads (N, tau*J0) pairs from a CSV whose header contains columns `n` and `tau`.
std::vector<std::pair<int, double>> read_fit_points_csv(std::istream& is, double j0 = 1.0);

}  // namespace qbt::io
