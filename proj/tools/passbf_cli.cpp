#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "passbf/batch.hpp"
#include "passbf/io.hpp"
#include "passbf/report.hpp"

namespace {

using namespace passbf;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNotConverged = 3;

void print_summary(const std::vector<RunRecord>& recs, std::string_view method) {
  const BatchSummary b = summarize(recs);
  std::cerr << method << ": " << b.count << " ok, " << b.errors << " errors, mean sum rate " << b.mean << " (std "
            << b.stddev << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beamforming and pinching-antenna placement for PASS downlink"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate seeded scenarios");
  ScenarioParams params;
  int count = 64;
  std::uint64_t master_seed = 1;
  std::string gen_out, beta = "paper_linear";
  gen->add_option("--count", count, "Number of scenarios")->capture_default_str();
  gen->add_option("--master-seed", master_seed, "Master seed")->capture_default_str();
  gen->add_option("--users", params.n_users, "Users K (also the number of waveguides)")->capture_default_str();
  gen->add_option("--pas", params.pas_per_waveguide, "PAs per waveguide L")->capture_default_str();
  gen->add_option("--span-x", params.span_x, "Waveguide span along x [m]")->capture_default_str();
  gen->add_option("--span-y", params.span_y, "Area width along y [m]")->capture_default_str();
  gen->add_option("--height", params.pass_height, "PA height [m]")->capture_default_str();
  gen->add_option("--freq", params.carrier_freq, "Carrier frequency [Hz]")->capture_default_str();
  gen->add_option("--neff", params.refractive_index, "Waveguide refractive index")->capture_default_str();
  gen->add_option("--power-dbm", params.power_dbm, "Transmit power budget [dBm]")->capture_default_str();
  gen->add_option("--noise-dbm", params.noise_dbm, "Noise power [dBm]")->capture_default_str();
  gen->add_option("--min-spacing", params.min_spacing, "Minimum PA spacing [m], <= 0 for half a wavelength")
      ->capture_default_str();
  gen->add_option("--beta", beta, "Path-gain convention: paper_linear | squared")->capture_default_str();
  gen->add_option("--out", gen_out, "Output scenario file (JSON)")->required();

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Run a method over a scenario file");
  std::string scen_path, method_name = "mmpdd", solve_out, solutions_out, trace_dir;
  int threads = 0;
  bool strict = false;
  BatchOptions bopt;
  solve_cmd->add_option("--scenarios", scen_path, "Scenario file")->required();
  solve_cmd->add_option("--method", method_name, "mmpdd | kdl-search | fd-mimo | uniform | oracle")
      ->check(CLI::IsMember({"mmpdd", "kdl-search", "fd-mimo", "uniform", "oracle"}))
      ->capture_default_str();
  solve_cmd->add_option("--out", solve_out, "Result CSV")->required();
  solve_cmd->add_option("--solutions", solutions_out, "Also write (X, D) per scenario (JSON)");
  solve_cmd->add_option("--trace-dir", trace_dir, "Write per-scenario mmpdd traces here");
  solve_cmd->add_option("--threads", threads, "Worker threads (default: PASSBF_THREADS or 1)");
  solve_cmd->add_flag("--strict", strict, "Exit 3 if any scenario fails to converge");
  solve_cmd->add_option("--rho0", bopt.solver.rho0, "Initial penalty")->capture_default_str();
  solve_cmd->add_option("--max-outer", bopt.solver.max_outer, "Outer iteration cap")->capture_default_str();
  solve_cmd->add_option("--max-inner", bopt.solver.max_inner, "Inner sweep cap")->capture_default_str();
  solve_cmd->add_option("--budget", bopt.search_budget, "kdl-search evaluation budget")->capture_default_str();
  solve_cmd->add_option("--grid", bopt.grid.resolution, "Oracle grid resolution [m]")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Score externally supplied (X, D) or KKT parameters");
  std::string eval_scen, eval_solution, eval_kkt, eval_out, eval_label = "transformer";
  eval->add_option("--scenarios", eval_scen, "Scenario file")->required();
  auto* sol_opt = eval->add_option("--solution", eval_solution, "(X, D) file");
  auto* kkt_opt = eval->add_option("--kkt", eval_kkt, "KKT parameter file");
  sol_opt->excludes(kkt_opt);
  eval->add_option("--out", eval_out, "Result CSV")->required();
  eval->add_option("--label", eval_label, "Method recorded in the CSV")->capture_default_str();

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Export the trainer dataset");
  std::string ds_scen, ds_out;
  dataset->add_option("--scenarios", ds_scen, "Scenario file")->required();
  dataset->add_option("--out", ds_out, "Dataset file (JSON)")->required();

  // report
  auto* report = app.add_subcommand("report", "Aggregate result CSVs into (x, mean, std) series");
  std::vector<std::string> series;
  std::string report_out;
  report->add_option("series", series, "Inputs as x:path (bare paths get their position as x)");
  report->add_option("--out", report_out, "Series CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*gen) {
      params.beta_convention = beta_convention_from_string(beta);
      io::write_json(gen_out, io::to_json(io::gen_scenarios(count, params, master_seed)));
      return kExitOk;
    }

    if (*solve_cmd) {
      const io::ScenarioFile file = io::read_scenarios(scen_path);
      const Method method = method_from_string(method_name);
      bopt.threads = resolve_threads(threads);
      const auto outputs = run_batch(file, method, bopt);
      std::vector<RunRecord> recs;
      std::vector<io::SolutionEntry> sols;
      for (const auto& o : outputs) {
        recs.push_back(o.record);
        if (o.solution) sols.push_back(*o.solution);
      }
      io::write_text(solve_out, records_to_csv(recs));
      if (!solutions_out.empty()) io::write_json(solutions_out, io::to_json(sols));
      if (!trace_dir.empty() && method == Method::mmpdd) {
        std::filesystem::create_directories(trace_dir);
        for (const auto& o : outputs)
          io::write_text((std::filesystem::path(trace_dir) / ("trace_" + std::to_string(o.record.scenario_id) + ".csv"))
                             .string(),
                         trace_to_csv(o.trace));
      }
      print_summary(recs, to_string(method));
      if (strict)
        for (const auto& r : recs)
          if (!r.converged) return kExitNotConverged;
      return kExitOk;
    }

    if (*eval) {
      if (eval_solution.empty() == eval_kkt.empty()) throw InvalidInput("eval needs exactly one of --solution or --kkt");
      const io::ScenarioFile file = io::read_scenarios(eval_scen);
      const Method label = method_from_string(eval_label);
      std::vector<io::SolutionEntry> sols;
      if (!eval_solution.empty()) {
        sols = io::solutions_from_json(io::read_json(eval_solution));
      } else {
        for (const auto& e : io::kkt_from_json(io::read_json(eval_kkt))) sols.push_back(solution_from_kkt(file, e));
      }
      std::vector<RunRecord> recs;
      for (const auto& s : sols) recs.push_back(passbf::eval_solution(file, s, label));
      io::write_text(eval_out, records_to_csv(recs));
      print_summary(recs, to_string(label));
      return kExitOk;
    }

    if (*dataset) {
      io::write_json(ds_out, io::export_dataset(io::read_scenarios(ds_scen)));
      return kExitOk;
    }

    if (*report) {
      std::vector<SeriesInput> inputs;
      for (size_t i = 0; i < series.size(); ++i) inputs.push_back(parse_series_arg(series[i], i));
      const std::string csv = series_to_csv(build_series(inputs));
      if (report_out.empty())
        std::cout << csv;
      else
        io::write_text(report_out, csv);
      return kExitOk;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
