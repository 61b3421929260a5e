#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "passbf/kkt.hpp"
#include "passbf/rng.hpp"
#include "passbf/scenario.hpp"

namespace passbf::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ScenarioEntry {
  int id = 0;
  std::uint64_t seed = 0;
  std::vector<UserPosition> users;
};

struct ScenarioFile {
  ScenarioParams params;
  std::uint64_t master_seed = 0;
  std::vector<ScenarioEntry> scenarios;

  Scenario scenario(size_t i) const { return make_scenario(params, scenarios.at(i).users); }
};

/// Per-scenario seed and user drop. Users are i.i.d. uniform over the area:
/// x_k = S_x * U(seed, 2k), y_k = S_y * U(seed, 2k + 1).
inline ScenarioEntry make_entry(const ScenarioParams& p, std::uint64_t master_seed, int index) {
  ScenarioEntry e;
  e.id = index;
  e.seed = SplitMix64::value(master_seed, static_cast<std::uint64_t>(index));
  e.users.resize(p.n_users);
  for (int k = 0; k < p.n_users; ++k) {
    e.users[k].x = p.span_x * SplitMix64::uniform(e.seed, 2 * k);
    e.users[k].y = p.span_y * SplitMix64::uniform(e.seed, 2 * k + 1);
  }
  return e;
}

inline ScenarioFile gen_scenarios(int count, const ScenarioParams& params, std::uint64_t master_seed) {
  if (count < 0) throw InvalidInput("scenario count must be non-negative");
  params.validate();
  ScenarioFile f;
  f.params = params;
  f.master_seed = master_seed;
  for (int i = 0; i < count; ++i) f.scenarios.push_back(make_entry(params, master_seed, i));
  if (count > 0) f.scenario(0);  // validates derived quantities (spacing vs span)
  return f;
}

inline json params_to_json(const ScenarioParams& p) {
  return json{{"n_users", p.n_users},
              {"pas_per_waveguide", p.pas_per_waveguide},
              {"span_x", p.span_x},
              {"span_y", p.span_y},
              {"pass_height", p.pass_height},
              {"carrier_freq", p.carrier_freq},
              {"refractive_index", p.refractive_index},
              {"power_dbm", p.power_dbm},
              {"noise_dbm", p.noise_dbm},
              {"min_spacing", p.min_spacing},
              {"beta_convention", std::string(to_string(p.beta_convention))}};
}

inline ScenarioParams params_from_json(const json& j) {
  ScenarioParams p;
  p.n_users = j.at("n_users").get<int>();
  p.pas_per_waveguide = j.at("pas_per_waveguide").get<int>();
  p.span_x = j.at("span_x").get<double>();
  p.span_y = j.at("span_y").get<double>();
  p.pass_height = j.at("pass_height").get<double>();
  p.carrier_freq = j.at("carrier_freq").get<double>();
  p.refractive_index = j.at("refractive_index").get<double>();
  p.power_dbm = j.at("power_dbm").get<double>();
  p.noise_dbm = j.at("noise_dbm").get<double>();
  p.min_spacing = j.at("min_spacing").get<double>();
  p.beta_convention = beta_convention_from_string(j.at("beta_convention").get<std::string>());
  p.validate();
  return p;
}

inline void check_schema(const json& j, const std::string& schema) {
  if (!j.is_object() || j.value("schema", "") != schema)
    throw InvalidInput("expected schema '" + schema + "'");
  if (j.value("version", -1) != kSchemaVersion)
    throw InvalidInput("unsupported " + schema + " version");
}

inline json to_json(const ScenarioFile& f) {
  json arr = json::array();
  for (const auto& e : f.scenarios) {
    json users = json::array();
    for (const auto& u : e.users) users.push_back({u.x, u.y});
    arr.push_back({{"id", e.id}, {"seed", e.seed}, {"users", users}});
  }
  return json{{"schema", "passbf.scenarios"},
              {"version", kSchemaVersion},
              {"master_seed", f.master_seed},
              {"params", params_to_json(f.params)},
              {"scenarios", arr}};
}

inline ScenarioFile scenario_file_from_json(const json& j) {
  check_schema(j, "passbf.scenarios");
  ScenarioFile f;
  f.params = params_from_json(j.at("params"));
  f.master_seed = j.at("master_seed").get<std::uint64_t>();
  for (const auto& s : j.at("scenarios")) {
    ScenarioEntry e;
    e.id = s.at("id").get<int>();
    e.seed = s.at("seed").get<std::uint64_t>();
    for (const auto& u : s.at("users")) e.users.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
    if (static_cast<int>(e.users.size()) != f.params.n_users) throw InvalidInput("user count does not match params");
    f.scenarios.push_back(std::move(e));
  }
  return f;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("malformed JSON in '" + path + "': " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

inline ScenarioFile read_scenarios(const std::string& path) {
  try {
    return scenario_file_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw InvalidInput("bad scenario file '" + path + "': " + e.what());
  }
}

// ---- matrices ----

inline json matrix_to_json(const MatR& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline MatR matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j.at(0).size()) : 0;
  MatR m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j.at(i).size()) != cols) throw InvalidInput("ragged matrix");
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

inline json vector_to_json(const VecR& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }
inline VecR vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VecR>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---- (X, D) solutions ----

struct SolutionEntry {
  int scenario_id = 0;
  Placement x;
  TransmitBeam beam;
};

inline json to_json(const std::vector<SolutionEntry>& sols) {
  json arr = json::array();
  for (const auto& s : sols)
    arr.push_back({{"scenario_id", s.scenario_id},
                   {"x", matrix_to_json(s.x.x)},
                   {"d_re", matrix_to_json(s.beam.d.real())},
                   {"d_im", matrix_to_json(s.beam.d.imag())}});
  return json{{"schema", "passbf.solution"}, {"version", kSchemaVersion}, {"solutions", arr}};
}

inline std::vector<SolutionEntry> solutions_from_json(const json& j) {
  check_schema(j, "passbf.solution");
  std::vector<SolutionEntry> out;
  for (const auto& e : j.at("solutions")) {
    SolutionEntry s;
    s.scenario_id = e.at("scenario_id").get<int>();
    s.x.x = matrix_from_json(e.at("x"));
    const MatR re = matrix_from_json(e.at("d_re")), im = matrix_from_json(e.at("d_im"));
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw InvalidInput("d_re/d_im shape mismatch");
    s.beam.d = re.cast<cplx>() + kI * im.cast<cplx>();
    out.push_back(std::move(s));
  }
  return out;
}

// ---- KKT parameters ----

struct KktEntry {
  int scenario_id = 0;
  KktParams params;
};

inline json to_json(const std::vector<KktEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries)
    arr.push_back({{"scenario_id", e.scenario_id},
                   {"lambda", vector_to_json(e.params.lambda)},
                   {"mu", vector_to_json(e.params.mu)},
                   {"x_end", vector_to_json(e.params.x_end)},
                   {"omega", matrix_to_json(e.params.omega)}});
  return json{{"schema", "passbf.kkt"}, {"version", kSchemaVersion}, {"entries", arr}};
}

inline std::vector<KktEntry> kkt_from_json(const json& j) {
  check_schema(j, "passbf.kkt");
  std::vector<KktEntry> out;
  for (const auto& e : j.at("entries")) {
    KktEntry k;
    k.scenario_id = e.at("scenario_id").get<int>();
    k.params.lambda = vector_from_json(e.at("lambda"));
    k.params.mu = vector_from_json(e.at("mu"));
    k.params.x_end = vector_from_json(e.at("x_end"));
    k.params.omega = matrix_from_json(e.at("omega"));
    out.push_back(std::move(k));
  }
  return out;
}

// ---- trainer dataset ----

inline constexpr const char* kDatasetFieldOrder = "x_1..x_K,y_1..y_K";

inline json export_dataset(const ScenarioFile& f) {
  json recs = json::array();
  for (const auto& e : f.scenarios) {
    std::vector<double> z;
    for (const auto& u : e.users) z.push_back(u.x);
    for (const auto& u : e.users) z.push_back(u.y);
    recs.push_back({{"scenario_id", e.id}, {"seed", e.seed}, {"z", z}});
  }
  ScenarioParams p = f.params;
  json constants = params_to_json(p);
  const Scenario ref = make_scenario(p, std::vector<UserPosition>(p.n_users, UserPosition{0.0, 0.0}));
  constants["n_waveguides"] = ref.n_waveguides;
  constants["max_power_w"] = ref.max_power;
  constants["noise_power_w"] = ref.noise_power;
  constants["min_spacing_m"] = ref.min_spacing;
  constants["path_gain_beta"] = ref.path_gain_beta();
  constants["waveguide_y"] = ref.waveguide_y;
  return json{{"schema", "passbf.dataset"},
              {"version", kSchemaVersion},
              {"field_order", kDatasetFieldOrder},
              {"feature_dim", 2 * p.n_users},
              {"master_seed", f.master_seed},
              {"constants", constants},
              {"records", recs}};
}

/// Inverse of export_dataset, used for round-trip checks.
inline ScenarioFile dataset_to_scenarios(const json& j) {
  check_schema(j, "passbf.dataset");
  ScenarioFile f;
  f.params = params_from_json(j.at("constants"));
  f.master_seed = j.at("master_seed").get<std::uint64_t>();
  const int K = f.params.n_users;
  for (const auto& r : j.at("records")) {
    ScenarioEntry e;
    e.id = r.at("scenario_id").get<int>();
    e.seed = r.at("seed").get<std::uint64_t>();
    const auto z = r.at("z").get<std::vector<double>>();
    if (static_cast<int>(z.size()) != 2 * K) throw InvalidInput("dataset record has wrong feature length");
    for (int k = 0; k < K; ++k) e.users.push_back({z[k], z[K + k]});
    f.scenarios.push_back(std::move(e));
  }
  return f;
}

}  // namespace passbf::io
