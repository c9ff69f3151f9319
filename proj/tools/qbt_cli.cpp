// Command-line front end: solve, sweep, baseline, simulate, fit, verify, export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qbt/baseline.hpp"
#include "qbt/io.hpp"
#include "qbt/oracle.hpp"
#include "qbt/sweep.hpp"
#include "qbt/transfer_solver.hpp"

namespace fs = std::filesystem;
using namespace qbt;
using io::json;

namespace {

constexpr int kExitConvergence = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

// Solutions at or above this fidelity are written back to the seed store.
constexpr double kStoreFidelity = 1.0 - 1e-8;

struct Flags {
  io::RunConfig config;
  std::string method = "auto";
  std::string seed_store;
  std::string input;
  std::string kind = "stepwise";
  int n_min = 0;
  int n_max = 0;
  bool update_store = false;
};

void finish_config(Flags& f) {
  f.config.method = parse_solve_method(f.method);
  if (!f.seed_store.empty()) {
    f.config.seed_store = f.seed_store;
  } else {
    f.config.seed_store = io::default_seed_store();
  }
  f.config.validate();
}

io::SeedStore open_store(const io::RunConfig& c) {
  return c.seed_store ? io::SeedStore::load_or_empty(*c.seed_store) : io::SeedStore{};
}

void emit(const fs::path& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_text_file(out, text);
  }
}

void print_line(const json& j) { std::cout << j.dump() << std::endl; }

json summary(const Solution& s) {
  return {{"n", s.spec.n_sites()},       {"j0", s.spec.j0()},
          {"tau", s.tau},                {"fidelity", s.fidelity},
          {"residual_norm", s.residual_norm}, {"method", s.metadata.method},
          {"converged", s.metadata.converged}};
}

int cmd_solve(Flags& f) {
  finish_config(f);
  const auto& c = f.config;
  const ChainSpec spec(c.n_sites, c.j0);
  io::SeedStore store = open_store(c);
  SweepOptions options;
  options.solver = c.solver_options();
  options.method = c.method;
  const fs::path out = c.out.empty() ? fs::path("solution_n" + std::to_string(c.n_sites) + ".json") : c.out;

  int status = 0;
  Solution sol;
  try {
    sol = solve_with_continuation(spec, store.seeds(), options);
  } catch (const ConvergenceError& e) {
    sol = e.best();
    sol.metadata.converged = false;
    std::cerr << "qbt: " << e.what() << "\n";
    status = kExitConvergence;
  }
  io::write_text_file(out, io::dump(io::to_json(sol)));
  if (sol.trajectory) {
    std::ostringstream csv;
    io::write_trajectory_csv(csv, *sol.trajectory);
    fs::path traj = out;
    io::write_text_file(traj.replace_extension(".trajectory.csv"), csv.str());
  }
  if (status == 0 && c.seed_store && sol.fidelity >= kStoreFidelity) {
    store.put(sol);
    store.save(*c.seed_store);
  }
  print_line(summary(sol));
  return status;
}

int cmd_sweep(Flags& f) {
  finish_config(f);
  const auto& c = f.config;
  if (f.n_min < 2 || f.n_max <= f.n_min) throw PreconditionError("sweep needs 2 <= --n-min < --n-max");
  io::SeedStore store = open_store(c);
  SweepOptions options;
  options.solver = c.solver_options();
  options.method = c.method;
  options.jobs = c.jobs;
  const SweepResult result = run_sweep(c.j0, f.n_min, f.n_max, store.seeds(), options);

  std::ostringstream csv;
  io::write_sweep_csv(csv, result);
  emit(c.out.empty() ? fs::path("sweep.csv") : c.out, csv.str());

  if (f.update_store && c.seed_store) {
    for (const auto& [n, sol] : result.solutions) {
      if (sol.fidelity >= kStoreFidelity) store.put(sol);
    }
    store.save(*c.seed_store);
  }

  json line = {{"rows", result.rows.size()}, {"solved", result.solutions.size()}};
  line["fit"] = result.fit ? io::to_json(*result.fit) : json(nullptr);
  print_line(line);
  for (const auto& row : result.rows) {
    if (!row.converged) return kExitConvergence;
  }
  return 0;
}

int cmd_baseline(Flags& f) {
  finish_config(f);
  const ChainSpec spec(f.config.n_sites, f.config.j0);
  const ScheduleKind kind = parse_schedule_kind(f.kind);
  if (kind == ScheduleKind::custom) throw PreconditionError("baseline kind must be stepwise or perfect");
  const Schedule s = kind == ScheduleKind::stepwise ? stepwise_schedule(spec) : perfect_transfer_schedule(spec);
  const WaveState final_state = expm_propagate(s, WaveState::first_site(spec));
  emit(f.config.out.empty() ? fs::path(f.kind + "_n" + std::to_string(spec.n_sites()) + ".json") : f.config.out,
       io::dump(io::to_json(s)));
  print_line({{"n", spec.n_sites()},
              {"kind", f.kind},
              {"tau", s.total_duration()},
              {"fidelity", final_state.probability(spec.n_sites())}});
  return 0;
}

int cmd_simulate(Flags& f) {
  finish_config(f);
  const json j = io::read_json_file(f.input);
  const std::size_t samples = std::max<std::size_t>(f.config.samples, 2);
  std::ostringstream csv;
  if (j.is_object() && j.value("kind", "") == "schedule") {
    const Schedule s = io::schedule_from_json(j);
    io::write_schedule_csv(csv, s, simulate_schedule(s, samples));
  } else {
    const Solution sol = io::solution_from_json(j);
    IntegrationOptions opts;
    opts.tol = std::max(f.config.integration_tol, 1e-12);
    opts.samples = samples;
    opts.propagation = Propagation::real_gauge;
    const Trajectory traj =
        integrate(physical_initial_control(sol), WaveState::first_site(sol.spec), sol.tau, sol.spec, opts);
    io::write_trajectory_csv(csv, traj);
  }
  emit(f.config.out, csv.str());
  return 0;
}

int cmd_fit(Flags& f) {
  finish_config(f);
  std::ifstream in(f.input);
  if (!in) throw ParseError("cannot open " + f.input);
  auto points = io::read_fit_points_csv(in, f.config.j0);
  if (f.n_min > 0 || f.n_max > 0) {
    std::erase_if(points, [&](const auto& p) {
      return (f.n_min > 0 && p.first < f.n_min) || (f.n_max > 0 && p.first > f.n_max);
    });
  }
  const ScalingFit fit = fit_scaling(points);
  const json j = io::to_json(fit);
  if (!f.config.out.empty()) io::write_text_file(f.config.out, io::dump(j));
  print_line(j);
  return 0;
}

int cmd_verify(Flags& f) {
  finish_config(f);
  const auto& c = f.config;
  const fs::path dir = c.out.empty() ? fs::path("verify") : c.out;
  bool ok = true;

  const OracleReport rhs = compare_rhs_with_oracle(3, 8, 100, 20240501, 1e-12);
  io::write_text_file(dir / "oracle_rhs.json", io::dump(io::to_json(rhs)));
  ok = ok && rhs.passed();
  print_line({{"report", rhs.name}, {"max_abs_deviation", rhs.max_abs_deviation}, {"passed", rhs.passed()}});

  for (const ScheduleKind kind : {ScheduleKind::stepwise, ScheduleKind::perfect}) {
    OracleReport r;
    r.name = to_string(kind) + "_fidelity";
    r.threshold = 1e-10;
    for (int n = 2; n <= 40; ++n) {
      const ChainSpec spec(n, c.j0);
      const Schedule s = kind == ScheduleKind::stepwise ? stepwise_schedule(spec) : perfect_transfer_schedule(spec);
      const double loss = 1.0 - expm_propagate(s, WaveState::first_site(spec)).probability(n);
      ++r.cases_run;
      if (loss > r.max_abs_deviation || r.worst_case_input.empty()) {
        r.max_abs_deviation = std::max(loss, 0.0);
        r.worst_case_input = io::to_json(s).dump();
      }
    }
    io::write_text_file(dir / (r.name + ".json"), io::dump(io::to_json(r)));
    ok = ok && r.passed();
    print_line({{"report", r.name}, {"max_abs_deviation", r.max_abs_deviation}, {"passed", r.passed()}});
  }

  const int n_conservation = c.n_sites > 0 ? c.n_sites : 15;
  SweepOptions options;
  options.solver = c.solver_options();
  options.solver.verification_tol = 1e-10;
  options.solver.trajectory_samples = std::max<std::size_t>(c.samples, 1001);
  options.method = c.method;
  const Solution sol = solve_with_continuation(ChainSpec(n_conservation, c.j0), open_store(c).seeds(), options);
  const ConservationReport drift = conservation_report(*sol.trajectory);
  const bool conserved = drift.max() <= 1e-8;
  json cj = io::to_json(drift);
  cj["n_sites"] = n_conservation;
  cj["threshold"] = 1e-8;
  cj["passed"] = conserved;
  io::write_text_file(dir / "conservation.json", io::dump(cj));
  ok = ok && conserved;
  print_line({{"report", "conservation"}, {"max_drift", drift.max()}, {"passed", conserved}});

  return ok ? 0 : kExitValidation;
}

// Tabulates a seed store: one row per N with the scaled-time parameters.
int cmd_export(Flags& f) {
  finish_config(f);
  if (!f.config.seed_store) throw PreconditionError("export needs --seed-store or QBT_SEED_STORE");
  const io::SeedStore store = io::SeedStore::load(*f.config.seed_store);
  std::size_t width = 0;
  for (const auto& [n, e] : store.entries()) width = std::max(width, e.params.lambda_initial.size());
  std::ostringstream csv;
  csv << "n,tau,fidelity,method,j1_initial";
  for (std::size_t q = 0; q < width; ++q) csv << ",lambda_1_" << q + 3;
  csv << '\n';
  for (const auto& [n, e] : store.entries()) {
    csv << n << ',' << io::format_number(e.tau_j0 / f.config.j0) << ',' << io::format_number(e.fidelity) << ','
        << e.metadata.method << ',' << io::format_number(e.params.j1_initial);
    for (std::size_t q = 0; q < width; ++q) {
      csv << ',';
      if (q < e.params.lambda_initial.size()) csv << io::format_number(e.params.lambda_initial[q]);
    }
    csv << '\n';
  }
  emit(f.config.out, csv.str());
  return 0;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--j0", f.config.j0, "Coupling budget J0")->capture_default_str();
  cmd->add_option("--tol", f.config.integration_tol, "Integration tolerance")->capture_default_str();
  cmd->add_option("--method", f.method, "auto|shooting|gradient")
      ->check(CLI::IsMember({"auto", "shooting", "gradient"}))
      ->capture_default_str();
  cmd->add_option("--seed-store", f.seed_store, std::string("Seed store path (default $") + io::kSeedStoreEnv + ")");
  cmd->add_option("--samples", f.config.samples, "Trajectory samples");
  cmd->add_option("--out", f.config.out, "Output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-optimal single-excitation transfer on a qubit chain"};
  app.require_subcommand(1);
  Flags f;

  auto* solve_cmd = app.add_subcommand("solve", "Solve one chain length");
  add_common(solve_cmd, f);
  solve_cmd->add_option("--n", f.config.n_sites, "Number of sites")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Solve a range of chain lengths by continuation");
  add_common(sweep_cmd, f);
  sweep_cmd->add_option("--n-min", f.n_min)->required();
  sweep_cmd->add_option("--n-max", f.n_max)->required();
  sweep_cmd->add_option("--jobs", f.config.jobs, "Concurrent continuation chains")->capture_default_str();
  sweep_cmd->add_flag("--update-store", f.update_store, "Write converged solutions to the seed store");

  auto* baseline_cmd = app.add_subcommand("baseline", "Write a reference protocol schedule");
  add_common(baseline_cmd, f);
  baseline_cmd->add_option("--n", f.config.n_sites)->required();
  baseline_cmd->add_option("--kind", f.kind, "stepwise|perfect")
      ->check(CLI::IsMember({"stepwise", "perfect"}))
      ->capture_default_str();

  auto* simulate_cmd = app.add_subcommand("simulate", "Trajectory CSV from a solution or schedule file");
  add_common(simulate_cmd, f);
  simulate_cmd->add_option("input", f.input, "Solution or schedule JSON")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Linear fit of tau against N from a sweep CSV");
  add_common(fit_cmd, f);
  fit_cmd->add_option("input", f.input, "Sweep CSV")->required();
  fit_cmd->add_option("--n-min", f.n_min);
  fit_cmd->add_option("--n-max", f.n_max);

  auto* verify_cmd = app.add_subcommand("verify", "Oracle, baseline and conservation reports");
  add_common(verify_cmd, f);
  verify_cmd->add_option("--n", f.config.n_sites, "Chain length for the conservation check (default 15)");

  auto* export_cmd = app.add_subcommand("export", "Seed store as a CSV table");
  add_common(export_cmd, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*solve_cmd) return cmd_solve(f);
    if (*sweep_cmd) return cmd_sweep(f);
    if (*baseline_cmd) return cmd_baseline(f);
    if (*simulate_cmd) return cmd_simulate(f);
    if (*fit_cmd) return cmd_fit(f);
    if (*verify_cmd) return cmd_verify(f);
    if (*export_cmd) return cmd_export(f);
  } catch (const ParseError& e) {
    std::cerr << "qbt: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "qbt: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    std::cerr << "qbt: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const Error& e) {
    std::cerr << "qbt: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
