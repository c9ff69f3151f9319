#include "qbt/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qbt/errors.hpp"

namespace qbt::io {
namespace {

// Field access that reports the offending path on failure.
template <typename T>
T field(const json& j, const std::string& key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(context + ": invalid field '" + key + "'");
  }
}

void check_header(const json& j, const std::string& kind) {
  const auto version = field<int>(j, "format_version", kind);
  if (version != kFormatVersion) {
    throw ParseError(kind + ": unsupported format_version " + std::to_string(version));
  }
  if (field<std::string>(j, "kind", kind) != kind) throw ParseError(kind + ": field 'kind' is not '" + kind + "'");
}

json metadata_json(const SolverMetadata& m) {
  return {{"method", m.method},
          {"iterations", m.iterations},
          {"function_evaluations", m.function_evaluations},
          {"integration_tol", m.integration_tol},
          {"target_tol", m.target_tol},
          {"converged", m.converged}};
}

SolverMetadata metadata_from(const json& j, const std::string& context) {
  SolverMetadata m;
  m.method = field<std::string>(j, "method", context);
  m.iterations = field<int>(j, "iterations", context);
  m.function_evaluations = field<int>(j, "function_evaluations", context);
  m.integration_tol = field<double>(j, "integration_tol", context);
  m.target_tol = field<double>(j, "target_tol", context);
  m.converged = field<bool>(j, "converged", context);
  return m;
}

json params_json(const ShootingParams& p) {
  return {{"j1_initial", p.j1_initial}, {"lambda_initial", p.lambda_initial}};
}

ShootingParams params_from(const json& j, const std::string& context) {
  return {field<double>(j, "j1_initial", context), field<std::vector<double>>(j, "lambda_initial", context)};
}

json entry_json(const SeedEntry& e) {
  return {{"n_sites", e.n_sites},
          {"params", params_json(e.params)},
          {"tau_j0", e.tau_j0},
          {"fidelity", e.fidelity},
          {"metadata", metadata_json(e.metadata)}};
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void RunConfig::validate() const {
  const auto in_range = [](double t) { return t >= 1e-14 && t <= 1e-6; };
  if (!in_range(integration_tol)) throw PreconditionError("integration tolerance outside [1e-14, 1e-6]");
  if (!in_range(residual_tol)) throw PreconditionError("residual tolerance outside [1e-14, 1e-6]");
  if (!in_range(infidelity_tol)) throw PreconditionError("infidelity tolerance outside [1e-14, 1e-6]");
  if (!(j0 > 0.0) || !std::isfinite(j0)) throw PreconditionError("j0 must be positive");
  if (jobs == 0) throw PreconditionError("jobs must be at least 1");
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.integration_tol = integration_tol;
  o.residual_tol = residual_tol;
  o.infidelity_tol = infidelity_tol;
  o.trajectory_samples = samples;
  return o;
}

std::optional<std::filesystem::path> default_seed_store() {
  const char* env = std::getenv(kSeedStoreEnv);
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json to_json(const Solution& s) {
  return {{"format_version", kFormatVersion},
          {"kind", "solution"},
          {"n_sites", s.spec.n_sites()},
          {"j0", s.spec.j0()},
          {"tau", s.tau},
          {"fidelity", s.fidelity},
          {"residual_norm", s.residual_norm},
          {"converged", s.metadata.converged},
          {"params", params_json(s.params)},
          {"lambda_normalized", s.lambda_normalized},
          {"metadata", metadata_json(s.metadata)},
          {"diagnostics",
           {{"max_inner_coupling", s.diagnostics.max_inner_coupling},
            {"max_off_pattern_multiplier", s.diagnostics.max_off_pattern_multiplier}}}};
}

Solution solution_from_json(const json& j) {
  const std::string ctx = "solution";
  check_header(j, ctx);
  Solution s;
  try {
    s.spec = ChainSpec(field<int>(j, "n_sites", ctx), field<double>(j, "j0", ctx));
  } catch (const PreconditionError& e) {
    throw ParseError(ctx + ": invalid field 'n_sites' or 'j0' (" + e.what() + ")");
  }
  s.tau = field<double>(j, "tau", ctx);
  s.fidelity = field<double>(j, "fidelity", ctx);
  s.residual_norm = field<double>(j, "residual_norm", ctx);
  s.params = params_from(field<json>(j, "params", ctx), ctx + ".params");
  s.lambda_normalized = field<std::vector<double>>(j, "lambda_normalized", ctx);
  s.metadata = metadata_from(field<json>(j, "metadata", ctx), ctx + ".metadata");
  if (field<bool>(j, "converged", ctx) != s.metadata.converged) {
    throw ParseError(ctx + ": field 'converged' disagrees with metadata");
  }
  const json d = field<json>(j, "diagnostics", ctx);
  s.diagnostics.max_inner_coupling = field<double>(d, "max_inner_coupling", ctx + ".diagnostics");
  s.diagnostics.max_off_pattern_multiplier = field<double>(d, "max_off_pattern_multiplier", ctx + ".diagnostics");
  try {
    s.params.check(s.spec);
  } catch (const Error& e) {
    throw ParseError(ctx + ": invalid field 'params' (" + e.what() + ")");
  }
  if (s.lambda_normalized.size() != s.params.lambda_initial.size()) {
    throw ParseError(ctx + ": invalid field 'lambda_normalized' (length)");
  }
  if (!(s.tau > 0.0)) throw ParseError(ctx + ": invalid field 'tau'");
  return s;
}

json to_json(const Schedule& s) {
  json segments = json::array();
  for (const auto& seg : s.segments) segments.push_back({{"duration", seg.duration}, {"couplings", seg.couplings}});
  return {{"format_version", kFormatVersion},
          {"kind", "schedule"},
          {"n_sites", s.spec.n_sites()},
          {"j0", s.spec.j0()},
          {"label", to_string(s.label)},
          {"segments", segments}};
}

Schedule schedule_from_json(const json& j) {
  const std::string ctx = "schedule";
  check_header(j, ctx);
  Schedule s;
  try {
    s.spec = ChainSpec(field<int>(j, "n_sites", ctx), field<double>(j, "j0", ctx));
  } catch (const PreconditionError& e) {
    throw ParseError(ctx + ": invalid field 'n_sites' or 'j0' (" + e.what() + ")");
  }
  try {
    s.label = parse_schedule_kind(field<std::string>(j, "label", ctx));
  } catch (const ParseError&) {
    throw ParseError(ctx + ": invalid field 'label'");
  }
  const json segments = field<json>(j, "segments", ctx);
  if (!segments.is_array()) throw ParseError(ctx + ": invalid field 'segments'");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::string sctx = ctx + ".segments[" + std::to_string(i) + "]";
    s.segments.push_back({field<double>(segments[i], "duration", sctx),
                          field<std::vector<double>>(segments[i], "couplings", sctx)});
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw ParseError(ctx + ": invalid field 'segments' (" + e.what() + ")");
  }
  return s;
}

json to_json(const OracleReport& r) {
  json worst = nullptr;
  if (!r.worst_case_input.empty()) worst = json::parse(r.worst_case_input);
  return {{"format_version", kFormatVersion},
          {"kind", "oracle_report"},
          {"name", r.name},
          {"max_abs_deviation", r.max_abs_deviation},
          {"threshold", r.threshold},
          {"cases_run", r.cases_run},
          {"passed", r.passed()},
          {"worst_case_input", worst}};
}

json to_json(const ScalingFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"residual_sum_squares", f.residual_sum_squares},
          {"max_abs_residual", f.max_abs_residual},
          {"n_min", f.n_min},
          {"n_max", f.n_max},
          {"points", f.points}};
}

json to_json(const ConservationReport& r) {
  return {{"coupling_norm_drift", r.coupling_norm_drift},
          {"multiplier_norm_drift", r.multiplier_norm_drift},
          {"wave_norm_drift", r.wave_norm_drift},
          {"spectrum_drift", r.spectrum_drift}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    out << text;
    if (!out) throw ParseError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string checksum(const json& j) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

SeedStore SeedStore::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

SeedStore SeedStore::load_or_empty(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return load(path);
}

void SeedStore::save(const std::filesystem::path& path) const { write_text_file(path, dump(to_json())); }

json SeedStore::to_json() const {
  json entries = json::array();
  for (const auto& [n, e] : entries_) {
    json body = entry_json(e);
    body["checksum"] = checksum(entry_json(e));
    entries.push_back(std::move(body));
  }
  return {{"format_version", kFormatVersion}, {"kind", "seed_store"}, {"entries", entries}};
}

SeedStore SeedStore::from_json(const json& j) {
  const std::string ctx = "seed_store";
  check_header(j, ctx);
  const json entries = field<json>(j, "entries", ctx);
  if (!entries.is_array()) throw ParseError(ctx + ": invalid field 'entries'");
  SeedStore store;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string ectx = ctx + ".entries[" + std::to_string(i) + "]";
    const json& raw = entries[i];
    SeedEntry e;
    e.n_sites = field<int>(raw, "n_sites", ectx);
    e.params = params_from(field<json>(raw, "params", ectx), ectx + ".params");
    e.tau_j0 = field<double>(raw, "tau_j0", ectx);
    e.fidelity = field<double>(raw, "fidelity", ectx);
    e.metadata = metadata_from(field<json>(raw, "metadata", ectx), ectx + ".metadata");
    const auto stored = field<std::string>(raw, "checksum", ectx);
    if (stored != checksum(entry_json(e))) throw ParseError(ectx + ": checksum mismatch");
    if (e.n_sites < 2) throw ParseError(ectx + ": invalid field 'n_sites'");
    try {
      e.params.check(ChainSpec(e.n_sites, 1.0));
    } catch (const Error& err) {
      throw ParseError(ectx + ": invalid field 'params' (" + err.what() + ")");
    }
    if (!(e.tau_j0 > 0.0) || !(e.fidelity >= 0.0 && e.fidelity <= 1.0 + 1e-12)) {
      throw ParseError(ectx + ": invalid field 'tau_j0' or 'fidelity'");
    }
    if (store.entries_.count(e.n_sites) != 0) {
      throw ParseError(ectx + ": duplicate entry for N=" + std::to_string(e.n_sites));
    }
    store.entries_.emplace(e.n_sites, std::move(e));
  }
  return store;
}

void SeedStore::put(const Solution& s) {
  SeedEntry e;
  e.n_sites = s.spec.n_sites();
  e.params = s.params;
  e.tau_j0 = s.tau * s.spec.j0();
  e.fidelity = s.fidelity;
  e.metadata = s.metadata;
  put(e);
}

void SeedStore::put(const SeedEntry& e) { entries_[e.n_sites] = e; }

const SeedEntry* SeedStore::find(int n_sites) const {
  const auto it = entries_.find(n_sites);
  return it == entries_.end() ? nullptr : &it->second;
}

std::map<int, ShootingParams> SeedStore::seeds() const {
  std::map<int, ShootingParams> out;
  for (const auto& [n, e] : entries_) out.emplace(n, e.params);
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int N = traj.spec.n_sites();
  os << "t";
  for (int m = 1; m < N; ++m) os << ",J_" << m;
  for (int n = 1; n <= N; ++n) os << ",P_" << n;
  os << ",x_mean\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << format_number(traj.times[i]);
    for (double j : traj.control_samples[i].couplings) os << ',' << format_number(j);
    double x = 0.0;
    for (int n = 1; n <= N; ++n) {
      const double p = traj.wave_samples[i].probability(n);
      x += n * p;
      os << ',' << format_number(p);
    }
    os << ',' << format_number(x) << '\n';
  }
}

void write_schedule_csv(std::ostream& os, const Schedule& s, const ScheduleSimulation& sim) {
  const int N = s.spec.n_sites();
  os << "t";
  for (int m = 1; m < N; ++m) os << ",J_" << m;
  for (int n = 1; n <= N; ++n) os << ",P_" << n;
  os << ",x_mean\n";
  for (std::size_t i = 0; i < sim.times.size(); ++i) {
    os << format_number(sim.times[i]);
    for (double j : couplings_at(s, sim.times[i])) os << ',' << format_number(j);
    for (double p : sim.probabilities[i]) os << ',' << format_number(p);
    os << ',' << format_number(sim.position[i]) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "n,tau,fidelity,method,converged,tau_stepwise,tau_perfect,ratio_stepwise,ratio_perfect,residual_norm,"
        "iterations\n";
  for (const auto& r : sweep.rows) {
    const double rs = r.tau > 0.0 ? r.tau_stepwise / r.tau : 0.0;
    const double rp = r.tau > 0.0 ? r.tau_perfect / r.tau : 0.0;
    os << r.n_sites << ',' << format_number(r.tau) << ',' << format_number(r.fidelity) << ',' << r.method << ','
       << (r.converged ? "true" : "false") << ',' << format_number(r.tau_stepwise) << ','
       << format_number(r.tau_perfect) << ',' << format_number(rs) << ',' << format_number(rp) << ','
       << format_number(r.residual_norm) << ',' << r.iterations << '\n';
  }
}

std::vector<std::pair<int, double>> read_fit_points_csv(std::istream& is, double j0) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("fit input: empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError("fit input: missing column '" + name + "'");
  };
  const std::size_t n_col = col("n");
  const std::size_t tau_col = col("tau");
  std::optional<std::size_t> converged_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "converged") converged_col = i;
  }
  std::vector<std::pair<int, double>> points;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) throw ParseError("fit input: short row at line " + std::to_string(line_no));
    if (converged_col && cells[*converged_col] != "true") continue;
    try {
      points.emplace_back(std::stoi(cells[n_col]), std::stod(cells[tau_col]) * j0);
    } catch (const std::exception&) {
      throw ParseError("fit input: invalid field 'n' or 'tau' at line " + std::to_string(line_no));
    }
  }
  return points;
}

}  // namespace qbt::io
