#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "passbf/batch.hpp"
#include "passbf/io.hpp"
#include "passbf/report.hpp"
#include "test_util.hpp"

using namespace passbf;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("passbf_io_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PASSBF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

/// Drops the wall_time_s column, which is the only nondeterministic field.
std::string without_wall_time(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    auto f = split_csv_line(line);
    f.erase(f.begin() + 5);
    for (size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << "\n";
  }
  return out.str();
}

ScenarioParams small_params(int K = 2, int L = 2) {
  ScenarioParams p;
  p.n_users = K;
  p.pas_per_waveguide = L;
  return p;
}

}  // namespace

// ---- scenario generation ----

TEST(Gen, DeterministicAndOrderIndependent) {
  const io::ScenarioFile a = io::gen_scenarios(64, small_params(), 7);
  const io::ScenarioFile b = io::gen_scenarios(64, small_params(), 7);
  ASSERT_EQ(a.scenarios.size(), 64u);
  EXPECT_EQ(io::to_json(a), io::to_json(b));
  // regenerating a single entry does not depend on its predecessors
  const io::ScenarioEntry e = io::make_entry(small_params(), 7, 41);
  EXPECT_EQ(e.seed, a.scenarios[41].seed);
  EXPECT_EQ(e.users[1].x, a.scenarios[41].users[1].x);
  EXPECT_NE(io::gen_scenarios(1, small_params(), 8).scenarios[0].seed, a.scenarios[0].seed);
}

TEST(Gen, UsersInsideServiceArea) {
  const io::ScenarioFile f = io::gen_scenarios(200, small_params(4, 1), 3);
  for (const auto& e : f.scenarios)
    for (const auto& u : e.users) {
      EXPECT_GE(u.x, 0.0);
      EXPECT_LT(u.x, f.params.span_x);
      EXPECT_GE(u.y, 0.0);
      EXPECT_LT(u.y, f.params.span_y);
    }
}

TEST(Gen, InvalidParametersRejected) {
  ScenarioParams p = small_params();
  p.span_x = -1.0;
  EXPECT_THROW(io::gen_scenarios(4, p, 1), InvalidInput);
  EXPECT_THROW(io::gen_scenarios(-1, small_params(), 1), InvalidInput);
  ScenarioParams q = small_params(1, 500);
  q.min_spacing = 0.5;
  EXPECT_THROW(io::gen_scenarios(4, q, 1), InvalidInput);
}

// ---- JSON round trips ----

TEST(Json, ScenarioFileRoundTrip) {
  TempDir tmp;
  ScenarioParams p = small_params(3, 4);
  p.power_dbm = 17.5;
  p.beta_convention = BetaConvention::squared;
  const io::ScenarioFile f = io::gen_scenarios(5, p, 99);
  io::write_json(tmp.file("s.json"), io::to_json(f));
  const io::ScenarioFile g = io::read_scenarios(tmp.file("s.json"));
  EXPECT_EQ(io::to_json(g), io::to_json(f));
  EXPECT_EQ(g.scenario(2).users[0].x, f.scenarios[2].users[0].x);
  EXPECT_EQ(g.params.beta_convention, BetaConvention::squared);
}

TEST(Json, WrongSchemaOrMissingFileRejected) {
  TempDir tmp;
  io::write_text(tmp.file("bad.json"), "{\"schema\": \"passbf.kkt\", \"version\": 1}");
  EXPECT_THROW(io::read_scenarios(tmp.file("bad.json")), InvalidInput);
  io::write_text(tmp.file("garbage.json"), "{not json");
  EXPECT_THROW(io::read_scenarios(tmp.file("garbage.json")), InvalidInput);
  EXPECT_THROW(io::read_scenarios(tmp.file("missing.json")), InvalidInput);
}

TEST(Json, SolutionRoundTripIsExact) {
  std::mt19937_64 g(1);
  const Scenario s = fixtures::random_scenario(g, 2, 3);
  std::vector<io::SolutionEntry> sols{{4, fixtures::random_placement(g, s), fixtures::random_beam(g, s)}};
  const auto back = io::solutions_from_json(io::to_json(sols));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].scenario_id, 4);
  EXPECT_EQ(back[0].x.x, sols[0].x.x);
  EXPECT_EQ(back[0].beam.d, sols[0].beam.d);
}

TEST(Json, KktRoundTripIsExact) {
  std::mt19937_64 g(2);
  const Scenario s = fixtures::random_scenario(g, 2, 3);
  VecR raw(raw_dimension(s));
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < raw.size(); ++i) raw(i) = n(g);
  std::vector<io::KktEntry> e{{0, project_raw(raw, s)}};
  const auto back = io::kkt_from_json(io::to_json(e));
  EXPECT_EQ(back[0].params.lambda, e[0].params.lambda);
  EXPECT_EQ(back[0].params.mu, e[0].params.mu);
  EXPECT_EQ(back[0].params.x_end, e[0].params.x_end);
  EXPECT_EQ(back[0].params.omega, e[0].params.omega);
}

// ---- trainer dataset ----

TEST(Dataset, FeatureLayoutAndExactRoundTrip) {
  const io::ScenarioFile f = io::gen_scenarios(10, small_params(3, 4), 5);
  const auto j = io::export_dataset(f);
  EXPECT_EQ(j.at("feature_dim").get<int>(), 6);
  EXPECT_EQ(j.at("field_order").get<std::string>(), "x_1..x_K,y_1..y_K");
  ASSERT_EQ(j.at("records").size(), 10u);
  const auto z = j.at("records")[3].at("z").get<std::vector<double>>();
  EXPECT_EQ(z[1], f.scenarios[3].users[1].x);
  EXPECT_EQ(z[4], f.scenarios[3].users[1].y);
  EXPECT_EQ(j.at("constants").at("waveguide_y").size(), 3u);
  const io::ScenarioFile back = io::dataset_to_scenarios(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(io::to_json(back), io::to_json(f));
}

// ---- batch execution ----

TEST(Batch, RerunIsIdenticalAndThreadCountIrrelevant) {
  const io::ScenarioFile f = io::gen_scenarios(4, small_params(2, 2), 11);
  BatchOptions one, three;
  three.threads = 3;
  const auto a = run_batch(f, Method::mmpdd, one);
  const auto b = run_batch(f, Method::mmpdd, one);
  const auto c = run_batch(f, Method::mmpdd, three);
  std::vector<RunRecord> ra, rb, rc;
  for (size_t i = 0; i < a.size(); ++i) {
    ra.push_back(a[i].record);
    rb.push_back(b[i].record);
    rc.push_back(c[i].record);
  }
  EXPECT_EQ(without_wall_time(records_to_csv(ra)), without_wall_time(records_to_csv(rb)));
  EXPECT_EQ(without_wall_time(records_to_csv(ra)), without_wall_time(records_to_csv(rc)));
}

TEST(Batch, RecordInvariantsHold) {
  const io::ScenarioFile f = io::gen_scenarios(3, small_params(2, 2), 12);
  for (Method m : {Method::mmpdd, Method::kdl_search, Method::fd_mimo, Method::uniform}) {
    BatchOptions opt;
    opt.search_budget = 200;
    for (const auto& o : run_batch(f, m, opt)) {
      EXPECT_TRUE(o.record.error.empty()) << o.record.error;
      EXPECT_EQ(o.record.method, m);
      ASSERT_EQ(o.record.per_user_rates.size(), 2u);
      EXPECT_NEAR(o.record.sum_rate, o.record.per_user_rates[0] + o.record.per_user_rates[1], 1e-9);
      EXPECT_EQ(o.solution.has_value(), m != Method::fd_mimo);
      if (o.solution) {
        const Scenario s = f.scenario(o.record.scenario_id);
        EXPECT_TRUE(check_feasibility(s, o.solution->x, o.solution->beam).feasible());
      }
    }
  }
}

TEST(Batch, SummaryMeanMatchesManualAverage) {
  const io::ScenarioFile f = io::gen_scenarios(5, small_params(2, 4), 13);
  std::vector<RunRecord> recs;
  for (const auto& o : run_batch(f, Method::uniform, {})) recs.push_back(o.record);
  double sum = 0.0;
  for (const auto& r : recs) sum += r.sum_rate;
  const BatchSummary b = summarize(recs);
  EXPECT_EQ(b.count, 5);
  EXPECT_NEAR(b.mean, sum / 5, 1e-12);
  EXPECT_GT(b.stddev, 0.0);
}

TEST(Batch, OversizedOracleYieldsErrorRows) {
  const io::ScenarioFile f = io::gen_scenarios(2, small_params(2, 4), 14);
  std::vector<RunRecord> recs;
  for (const auto& o : run_batch(f, Method::oracle, {})) {
    EXPECT_FALSE(o.record.error.empty());
    EXPECT_FALSE(o.record.converged);
    recs.push_back(o.record);
  }
  EXPECT_EQ(summarize(recs).errors, 2);
  EXPECT_EQ(summarize(recs).count, 0);
  const std::string csv = records_to_csv(recs);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kRunRecordHeader);
  EXPECT_NE(csv.find("grid oracle limited"), std::string::npos);
}

TEST(Batch, MethodNames) {
  EXPECT_EQ(method_from_string("kdl-search"), Method::kdl_search);
  EXPECT_EQ(to_string(Method::fd_mimo), "fd_mimo");
  EXPECT_THROW(method_from_string("nope"), InvalidInput);
}

TEST(Batch, ThreadResolutionPrefersFlagThenEnvironment) {
  ::setenv("PASSBF_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(2), 2);
  EXPECT_EQ(resolve_threads(0), 5);
  ::unsetenv("PASSBF_THREADS");
  EXPECT_EQ(resolve_threads(0), 1);
}

// ---- scoring external solutions ----

TEST(Eval, KktParametersScoreAsDecoded) {
  const io::ScenarioFile f = io::gen_scenarios(3, small_params(2, 3), 15);
  std::mt19937_64 g(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (size_t i = 0; i < 3; ++i) {
    const Scenario s = f.scenario(i);
    VecR raw(raw_dimension(s));
    for (int j = 0; j < raw.size(); ++j) raw(j) = n(g);
    const io::KktEntry e{static_cast<int>(i), project_raw(raw, s)};
    const RunRecord r = eval_solution(f, solution_from_kkt(f, e), Method::transformer);
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.sum_rate, decode_params(e.params, s).sum_rate, 1e-12);
  }
}

TEST(Eval, InfeasibleAndMisshapenSolutionsFlagged) {
  const io::ScenarioFile f = io::gen_scenarios(1, small_params(2, 2), 16);
  const Scenario s = f.scenario(0);
  io::SolutionEntry sol{0, centered_placement(s), TransmitBeam{MatC::Constant(2, 2, 1.0)}};
  RunRecord r = eval_solution(f, sol, Method::transformer);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.error.rfind("infeasible", 0), 0u);
  EXPECT_GT(r.sum_rate, 0.0);
  sol.beam.d = MatC::Zero(3, 2);
  r = eval_solution(f, sol, Method::transformer);
  EXPECT_NE(r.error.find("shape"), std::string::npos);
  sol.scenario_id = 9;
  EXPECT_NE(eval_solution(f, sol, Method::transformer).error.find("unknown"), std::string::npos);
  io::KktEntry bad{0, KktParams{VecR::Ones(3), VecR::Ones(2), VecR::Ones(2), MatR::Ones(2, 2)}};
  EXPECT_THROW(solution_from_kkt(f, bad), InvalidInput);
}

// ---- CSV and report ----

TEST(Csv, RowFormatting) {
  RunRecord r;
  r.scenario_id = 3;
  r.seed = 18446744073709551615ULL;
  r.method = Method::uniform;
  r.sum_rate = 0.1;
  r.per_user_rates = {0.25, 1.0 / 3.0};
  r.error = "bad, \"quoted\"\nline";
  const std::string row = csv_row(r);
  EXPECT_EQ(row.rfind("3,18446744073709551615,uniform,0.10000000000000001,0.25;0.33333333333333331,", 0), 0u);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
  EXPECT_EQ(std::count(row.begin(), row.end(), '\n'), 0);
}

TEST(Report, MeanAndSampleStdPerMethod) {
  TempDir tmp;
  std::vector<RunRecord> recs(3);
  const double rates[] = {1.0, 2.0, 4.0};
  for (int i = 0; i < 3; ++i) {
    recs[i].scenario_id = i;
    recs[i].method = Method::mmpdd;
    recs[i].sum_rate = rates[i];
    recs[i].per_user_rates = {rates[i]};
  }
  RunRecord err;
  err.method = Method::mmpdd;
  err.error = "x";
  recs.push_back(err);
  io::write_text(tmp.file("a.csv"), records_to_csv(recs));
  const auto pts = build_series({parse_series_arg("10:" + tmp.file("a.csv"), 0)});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].method, "mmpdd");
  EXPECT_EQ(pts[0].x, "10");
  EXPECT_EQ(pts[0].count, 3);
  EXPECT_NEAR(pts[0].mean, 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(pts[0].stddev, std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) +
                                        (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0),
              1e-12);
}

TEST(Report, PowerSweepSeries) {
  TempDir tmp;
  std::vector<SeriesInput> inputs;
  for (int i = 0; i < 8; ++i) {
    std::vector<RunRecord> recs(2);
    for (int j = 0; j < 2; ++j) {
      recs[j].method = j ? Method::uniform : Method::mmpdd;
      recs[j].sum_rate = i + j;
      recs[j].per_user_rates = {double(i + j)};
    }
    const std::string path = tmp.file("p" + std::to_string(i) + ".csv");
    io::write_text(path, records_to_csv(recs));
    inputs.push_back(parse_series_arg(std::to_string(5 * i) + ":" + path, i));
  }
  const auto pts = build_series(inputs);
  ASSERT_EQ(pts.size(), 16u);
  const std::string csv = series_to_csv(pts);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSeriesHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
  EXPECT_EQ(parse_series_arg(tmp.file("p0.csv"), 3).x, "3");
}

TEST(Report, EmptyInputGivesHeaderOnlyAndBadHeaderThrows) {
  TempDir tmp;
  io::write_text(tmp.file("empty.csv"), "");
  EXPECT_EQ(series_to_csv(build_series({parse_series_arg(tmp.file("empty.csv"), 0)})),
            std::string(kSeriesHeader) + "\n");
  EXPECT_EQ(series_to_csv(build_series({})), std::string(kSeriesHeader) + "\n");
  io::write_text(tmp.file("bad.csv"), "a,b,c\n1,2,3\n");
  EXPECT_THROW(build_series({parse_series_arg(tmp.file("bad.csv"), 0)}), InvalidInput);
}

// ---- command line ----

TEST(Cli, EndToEndAndExitCodes) {
  TempDir tmp;
  const std::string scen = tmp.file("s.json");
  ASSERT_EQ(run_cli("gen --count 3 --users 2 --pas 2 --master-seed 4 --out " + scen), 0);
  EXPECT_EQ(run_cli("solve --scenarios " + scen + " --method uniform --out " + tmp.file("u.csv") + " --solutions " +
                    tmp.file("u.json")),
            0);
  EXPECT_EQ(run_cli("eval --scenarios " + scen + " --solution " + tmp.file("u.json") + " --out " + tmp.file("e.csv")),
            0);
  // re-scoring the uniform solutions reproduces their rates
  const auto su = split_csv_line(slurp(tmp.file("u.csv")).substr(slurp(tmp.file("u.csv")).find('\n') + 1));
  const auto se = split_csv_line(slurp(tmp.file("e.csv")).substr(slurp(tmp.file("e.csv")).find('\n') + 1));
  EXPECT_EQ(su[3], se[3]);
  EXPECT_EQ(se[2], "transformer");

  EXPECT_EQ(run_cli("solve --scenarios " + tmp.file("missing.json") + " --out " + tmp.file("x.csv")), 2);
  EXPECT_EQ(run_cli("solve --scenarios " + scen + " --method bogus --out " + tmp.file("x.csv")), 2);
  EXPECT_EQ(run_cli("gen --count 2 --span-x -1 --out " + tmp.file("bad.json")), 2);
  EXPECT_EQ(run_cli("solve --scenarios " + scen + " --method mmpdd --strict --max-outer 1 --max-inner 1 --out " +
                    tmp.file("m.csv")),
            3);
  EXPECT_EQ(run_cli("report " + tmp.file("u.csv") + " --out " + tmp.file("r.csv")), 0);
  EXPECT_EQ(slurp(tmp.file("r.csv")).substr(0, slurp(tmp.file("r.csv")).find('\n')), kSeriesHeader);
}

TEST(Cli, KktEvalMatchesDecodedRate) {
  TempDir tmp;
  const io::ScenarioFile f = io::gen_scenarios(2, small_params(2, 3), 21);
  io::write_json(tmp.file("s.json"), io::to_json(f));
  std::vector<io::KktEntry> entries;
  for (size_t i = 0; i < 2; ++i) {
    const Scenario s = f.scenario(i);
    entries.push_back({static_cast<int>(i), project_raw(VecR::Constant(raw_dimension(s), 0.3 * (i + 1)), s)});
  }
  io::write_json(tmp.file("k.json"), io::to_json(entries));
  ASSERT_EQ(run_cli("eval --scenarios " + tmp.file("s.json") + " --kkt " + tmp.file("k.json") + " --out " +
                    tmp.file("e.csv")),
            0);
  std::stringstream in(slurp(tmp.file("e.csv")));
  std::string line;
  std::getline(in, line);
  for (size_t i = 0; i < 2; ++i) {
    std::getline(in, line);
    const auto fields = split_csv_line(line);
    EXPECT_NEAR(std::stod(fields[3]), decode_params(entries[i].params, f.scenario(i)).sum_rate, 1e-12);
  }
  EXPECT_EQ(run_cli("eval --scenarios " + tmp.file("s.json") + " --out " + tmp.file("e.csv")), 2);
}

TEST(Cli, DatasetExport) {
  TempDir tmp;
  ASSERT_EQ(run_cli("gen --count 4 --users 3 --out " + tmp.file("s.json")), 0);
  ASSERT_EQ(run_cli("dataset --scenarios " + tmp.file("s.json") + " --out " + tmp.file("d.json")), 0);
  const auto j = io::read_json(tmp.file("d.json"));
  EXPECT_EQ(j.at("schema"), "passbf.dataset");
  EXPECT_EQ(j.at("records").size(), 4u);
  EXPECT_EQ(io::to_json(io::dataset_to_scenarios(j)), io::to_json(io::read_scenarios(tmp.file("s.json"))));
}
