#include "qbt/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "qbt/baseline.hpp"

namespace qbt {
namespace {

struct ChainOutcome {
  std::vector<SweepRow> rows;
  std::vector<Solution> solutions;
};

SweepRow row_for(const ChainSpec& spec) {
  SweepRow row;
  row.n_sites = spec.n_sites();
  row.tau_stepwise = stepwise_time(spec);
  row.tau_perfect = perfect_transfer_time(spec);
  return row;
}

// Solves N = first..last, each seeded from its predecessor unless a stored seed exists.
ChainOutcome run_chain(double j0, int first, int last, const std::map<int, ShootingParams>& seeds,
                       const SweepOptions& options, const Solution* predecessor) {
  ChainOutcome out;
  std::optional<Solution> previous;
  if (predecessor != nullptr) previous = *predecessor;
  for (int n = first; n <= last; ++n) {
    const ChainSpec spec(n, j0);
    SweepRow row = row_for(spec);
    ShootingParams guess;
    if (auto it = seeds.find(n); it != seeds.end()) {
      guess = it->second;
    } else if (previous && previous->spec.n_sites() == n - 1) {
      guess = continuation_guess(*previous);
    } else {
      guess = default_guess(spec);
    }
    std::optional<double> predicted;
    if (previous && previous->spec.n_sites() == n - 1) predicted = previous->tau + kTimePerSite / j0;

    try {
      Solution sol = solve(spec, guess, options.method, options.solver);
      row.tau = sol.tau;
      row.fidelity = sol.fidelity;
      row.method = sol.metadata.method;
      row.residual_norm = sol.residual_norm;
      row.iterations = sol.metadata.iterations;
      row.converged = true;
      if (predicted && std::abs(sol.tau - *predicted) > options.prediction_band * *predicted) {
        row.converged = false;
        row.note = "rejected: tau far from continuation prediction";
        previous.reset();
      } else {
        previous = sol;
        out.solutions.push_back(std::move(sol));
      }
    } catch (const ConvergenceError& e) {
      const Solution& best = e.best();
      row.tau = best.tau;
      row.fidelity = best.fidelity;
      row.method = best.metadata.method;
      row.residual_norm = best.residual_norm;
      row.iterations = best.metadata.iterations;
      row.note = e.what();
      previous.reset();
    } catch (const Error& e) {
      row.method = to_string(options.method);
      row.note = e.what();
      previous.reset();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

SweepResult run_sweep(double j0, int n_min, int n_max, const std::map<int, ShootingParams>& seeds,
                      const SweepOptions& options) {
  if (n_min < 2 || n_max <= n_min) throw PreconditionError("sweep needs 2 <= n_min < n_max");

  // Every chain begins at n_min or at a seeded N.
  std::vector<std::pair<int, int>> chains;
  int start = n_min;
  for (int n = n_min + 1; n <= n_max; ++n) {
    if (seeds.count(n) != 0) {
      chains.emplace_back(start, n - 1);
      start = n;
    }
  }
  chains.emplace_back(start, n_max);

  const unsigned jobs = std::max(1u, options.jobs);
  std::vector<ChainOutcome> outcomes(chains.size());
  for (std::size_t base = 0; base < chains.size(); base += jobs) {
    std::vector<std::future<ChainOutcome>> running;
    const std::size_t end = std::min(chains.size(), base + jobs);
    for (std::size_t c = base; c < end; ++c) {
      running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, [&, c] {
        return run_chain(j0, chains[c].first, chains[c].second, seeds, options, nullptr);
      }));
    }
    for (std::size_t c = base; c < end; ++c) outcomes[c] = running[c - base].get();
  }

  SweepResult result;
  std::vector<std::pair<int, double>> points;
  for (auto& outcome : outcomes) {
    for (auto& row : outcome.rows) result.rows.push_back(std::move(row));
    for (auto& sol : outcome.solutions) {
      points.emplace_back(sol.spec.n_sites(), sol.tau * j0);
      result.solutions.emplace(sol.spec.n_sites(), std::move(sol));
    }
  }
  if (points.size() >= 3) result.fit = fit_scaling(points);
  return result;
}

Solution solve_with_continuation(const ChainSpec& spec, const std::map<int, ShootingParams>& seeds,
                                 const SweepOptions& options) {
  const int n = spec.n_sites();
  if (auto it = seeds.find(n); it != seeds.end()) {
    return solve(spec, it->second, options.method, options.solver);
  }
  if (n <= 4) return solve(spec, default_guess(spec), options.method, options.solver);

  int start = 3;
  for (const auto& [seeded_n, params] : seeds) {
    if (seeded_n < n && seeded_n >= 3) start = std::max(start, seeded_n);
  }
  const ChainOutcome chain = run_chain(spec.j0(), start, n - 1, seeds, options, nullptr);
  if (chain.solutions.empty() || chain.solutions.back().spec.n_sites() != n - 1) {
    const std::string note = chain.rows.empty() ? "" : chain.rows.back().note;
    throw PreconditionError("continuation chain broke before N=" + std::to_string(n) + ": " + note);
  }
  return solve(spec, continuation_guess(chain.solutions.back()), options.method, options.solver);
}

}  // namespace qbt
