#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "passbf/baselines.hpp"
#include "passbf/io.hpp"
#include "passbf/kkt.hpp"
#include "passbf/mmpdd.hpp"

namespace passbf {

enum class Method { mmpdd, kdl_search, fd_mimo, uniform, oracle, transformer };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::mmpdd: return "mmpdd";
    case Method::kdl_search: return "kdl_search";
    case Method::fd_mimo: return "fd_mimo";
    case Method::uniform: return "uniform";
    case Method::oracle: return "oracle";
    case Method::transformer: return "transformer";
  }
  return "?";
}

/// Accepts both the CLI spelling (kdl-search) and the record spelling (kdl_search).
inline Method method_from_string(std::string s) {
  for (auto& c : s)
    if (c == '-') c = '_';
  for (Method m : {Method::mmpdd, Method::kdl_search, Method::fd_mimo, Method::uniform, Method::oracle,
                   Method::transformer})
    if (s == to_string(m)) return m;
  throw InvalidInput("unknown method '" + s + "'");
}

struct RunRecord {
  int scenario_id = 0;
  std::uint64_t seed = 0;
  Method method = Method::mmpdd;
  double sum_rate = 0.0;
  std::vector<double> per_user_rates;
  double wall_time_s = 0.0;
  bool converged = false;
  double residual_inf = 0.0;
  int iterations = 0;
  std::string error;  // empty on success
};

struct BatchOptions {
  SolverConfig solver;
  WmmseOptions wmmse;
  GridOptions grid;
  int search_budget = 2000;
  int threads = 1;
};

struct RunOutput {
  RunRecord record;
  std::optional<io::SolutionEntry> solution;
  std::vector<TraceRow> trace;
};

/// Worker count: explicit value if positive, else PASSBF_THREADS, else 1.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PASSBF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw InvalidInput("PASSBF_THREADS must be a positive integer");
  }
  return 1;
}

inline void fill_rates(RunRecord& rec, const Scenario& s, const Placement* x, const TransmitBeam& beam,
                       const MatC* fd_h = nullptr) {
  const MatC h = fd_h ? *fd_h : effective_channel_direct(s, *x);
  const RateReport r = rates_from_received(h.adjoint() * beam.d, s.noise_power);
  rec.per_user_rates.assign(r.rate.data(), r.rate.data() + r.rate.size());
  rec.sum_rate = r.sum_rate;
}

/// Runs one method on one scenario. Exceptions become an error row.
inline RunOutput run_one(const io::ScenarioFile& file, size_t index, Method method, const BatchOptions& opt) {
  RunOutput out;
  RunRecord& rec = out.record;
  const auto& entry = file.scenarios.at(index);
  rec.scenario_id = entry.id;
  rec.seed = entry.seed;
  rec.method = method;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario s = file.scenario(index);
    io::SolutionEntry sol;
    sol.scenario_id = entry.id;
    switch (method) {
      case Method::mmpdd: {
        const SolveResult r = solve(s, opt.solver, entry.seed);
        sol.x = r.x;
        sol.beam = r.d;
        rec.converged = r.converged();
        rec.residual_inf = r.residual_inf;
        rec.iterations = r.outer_iterations;
        out.trace = r.trace;
        fill_rates(rec, s, &sol.x, sol.beam);
        break;
      }
      case Method::kdl_search: {
        const DualSearchResult r = dual_search(s, opt.search_budget, entry.seed);
        sol.x = r.best.x;
        sol.beam = r.best.beam;
        rec.converged = true;
        rec.iterations = r.evaluations;
        fill_rates(rec, s, &sol.x, sol.beam);
        break;
      }
      case Method::fd_mimo: {
        const BaselineResult r = fd_wmmse(s, opt.wmmse);
        sol.beam = r.beam;
        rec.converged = r.converged;
        rec.iterations = r.iterations;
        const MatC h = fd_channel(s);
        fill_rates(rec, s, nullptr, sol.beam, &h);
        break;
      }
      case Method::uniform: {
        const BaselineResult r = uniform_pass(s, opt.wmmse);
        sol.x = r.x;
        sol.beam = r.beam;
        rec.converged = r.converged;
        rec.iterations = r.iterations;
        fill_rates(rec, s, &sol.x, sol.beam);
        break;
      }
      case Method::oracle: {
        GridOptions g = opt.grid;
        g.threads = 1;  // parallelism lives at the batch level
        const BaselineResult r = grid_oracle(s, g);
        sol.x = r.x;
        sol.beam = r.beam;
        rec.converged = r.converged;
        rec.iterations = r.iterations;
        fill_rates(rec, s, &sol.x, sol.beam);
        break;
      }
      case Method::transformer:
        throw InvalidInput("transformer results come from eval, not solve");
    }
    if (method != Method::fd_mimo) out.solution = std::move(sol);
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.sum_rate = 0.0;
    rec.per_user_rates.clear();
    rec.converged = false;
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Scenarios are distributed round-robin over workers; results are stored by
/// index so the output order never depends on scheduling.
inline std::vector<RunOutput> run_batch(const io::ScenarioFile& file, Method method, const BatchOptions& opt) {
  const size_t n = file.scenarios.size();
  std::vector<RunOutput> out(n);
  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(std::max<size_t>(n, 1))));
  auto work = [&](int tid) {
    for (size_t i = tid; i < n; i += threads) out[i] = run_one(file, i, method, opt);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---- CSV ----

inline constexpr const char* kRunRecordHeader =
    "scenario_id,seed,method,sum_rate,per_user_rates,wall_time_s,converged,residual_inf,iterations,error";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Error text is kept on one line and free of the CSV delimiter.
inline std::string sanitize_field(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return s;
}

inline std::string csv_row(const RunRecord& r) {
  std::ostringstream os;
  os << r.scenario_id << ',' << r.seed << ',' << to_string(r.method) << ',' << format_double(r.sum_rate) << ',';
  for (size_t k = 0; k < r.per_user_rates.size(); ++k) os << (k ? ";" : "") << format_double(r.per_user_rates[k]);
  os << ',' << format_double(r.wall_time_s) << ',' << (r.converged ? 1 : 0) << ',' << format_double(r.residual_inf)
     << ',' << r.iterations << ',' << sanitize_field(r.error);
  return os.str();
}

inline std::string records_to_csv(const std::vector<RunRecord>& recs) {
  std::string s = std::string(kRunRecordHeader) + "\n";
  for (const auto& r : recs) s += csv_row(r) + "\n";
  return s;
}

inline constexpr const char* kTraceHeader = "outer_iter,inner_sweeps,sum_rate,al_value,residual_inf,rho";

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string s = std::string(kTraceHeader) + "\n";
  for (const auto& t : trace)
    s += std::to_string(t.outer_iter) + "," + std::to_string(t.inner_sweeps) + "," + format_double(t.sum_rate) + "," +
         format_double(t.al_value) + "," + format_double(t.residual_inf) + "," + format_double(t.rho) + "\n";
  return s;
}

struct BatchSummary {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
  int errors = 0;
};

/// Mean and sample standard deviation of sum_rate over rows without errors.
inline BatchSummary summarize(const std::vector<RunRecord>& recs) {
  BatchSummary b;
  double sum = 0.0;
  for (const auto& r : recs) {
    if (!r.error.empty()) {
      ++b.errors;
      continue;
    }
    sum += r.sum_rate;
    ++b.count;
  }
  if (b.count == 0) return b;
  b.mean = sum / b.count;
  double ss = 0.0;
  for (const auto& r : recs)
    if (r.error.empty()) ss += (r.sum_rate - b.mean) * (r.sum_rate - b.mean);
  b.stddev = b.count > 1 ? std::sqrt(ss / (b.count - 1)) : 0.0;
  return b;
}


// ---- scoring external solutions ----

/// Scores an externally supplied (X, D). Shape errors and constraint violations
/// are reported in the error field; the rate is still computed when shapes match.
inline RunRecord eval_solution(const io::ScenarioFile& file, const io::SolutionEntry& sol, Method label) {
  RunRecord rec;
  rec.method = label;
  rec.scenario_id = sol.scenario_id;
  size_t index = file.scenarios.size();
  for (size_t i = 0; i < file.scenarios.size(); ++i)
    if (file.scenarios[i].id == sol.scenario_id) index = i;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (index == file.scenarios.size()) throw InvalidInput("unknown scenario_id " + std::to_string(sol.scenario_id));
    rec.seed = file.scenarios[index].seed;
    const Scenario s = file.scenario(index);
    if (sol.x.x.rows() != s.n_waveguides || sol.x.x.cols() != s.pas_per_waveguide)
      throw InvalidInput("placement shape does not match scenario");
    if (sol.beam.d.rows() != s.n_waveguides || sol.beam.d.cols() != s.n_users)
      throw InvalidInput("beam shape does not match scenario");
    fill_rates(rec, s, &sol.x, sol.beam);
    const FeasibilityReport fr = check_feasibility(s, sol.x, sol.beam);
    rec.converged = fr.feasible();
    if (!fr.feasible()) rec.error = "infeasible: " + fr.describe();
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.sum_rate = 0.0;
    rec.per_user_rates.clear();
    rec.converged = false;
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Decodes projected KktParams into (X, D) for the matching scenario.
inline io::SolutionEntry solution_from_kkt(const io::ScenarioFile& file, const io::KktEntry& e) {
  for (size_t i = 0; i < file.scenarios.size(); ++i)
    if (file.scenarios[i].id == e.scenario_id) {
      const Scenario s = file.scenario(i);
      const int N = s.n_waveguides, L = s.pas_per_waveguide, K = s.n_users;
      if (e.params.lambda.size() != K || e.params.mu.size() != K || e.params.x_end.size() != N ||
          e.params.omega.rows() != N || e.params.omega.cols() != L)
        throw InvalidInput("KKT parameter shapes do not match scenario " + std::to_string(e.scenario_id));
      const DecodedSolution d = decode_params(e.params, s);
      return io::SolutionEntry{e.scenario_id, d.x, d.beam};
    }
  throw InvalidInput("unknown scenario_id " + std::to_string(e.scenario_id));
}

}  // namespace passbf
