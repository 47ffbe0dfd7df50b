#pragma once

// Scenario files (JSON) and the CSV/JSON result formats.
//
// A scenario file fully determines a run:
//
//   {
//     "schema_version": 1,
//     "notice": "free text",
//     "companies": {
//       "a": {"fleet_size": 460, "num_categories": 3, "retention": [0, 0, 0],
//             "initial_state": [400, 50, 10], "ordering": "descending"},
//       "b": {...}
//     },
//     "profiles": {"beta": [...], "epsilon": [...],
//                  "q": [q0, q1, ...] or [[q0_0, q0_1, q0_2], ...],
//                  "raw": {"requests": [...], "revenue_per_trip": [...],
//                          "energy_price": [...], "charge_demand": [...]}},
//     "solver": {"gamma_bar": 0.05, "eta": 0.5, "tol": 0.01, "maxiter": 20000,
//                "max_outer": 40, "inner_tol": 1e-4, "warm_start": false},
//     "horizon": {"T": 9, "T_total": 9}
//   }
//
// "ordering" states how initial_state and retention are listed; internally
// categories are always ascending (index 0 = critical battery). "raw",
// "inner_tol" and "warm_start" are optional.

#include "fleetgame/horizon_runner.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fleetgame {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class StateOrdering { ascending, descending };

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string notice;
  FleetParams fleet_a;
  FleetParams fleet_b;
  StateOrdering ordering_a = StateOrdering::ascending;
  StateOrdering ordering_b = StateOrdering::ascending;
  ScenarioProfile profile;
  bool q_broadcast = false;  ///< q was given as one value per interval
  SolverConfig solver;
  Index horizon = 0;
  Index total_frame = 0;

  const FleetParams& fleet(Company c) const { return c == Company::a ? fleet_a : fleet_b; }
};

namespace io_detail {

inline const Json& member(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(path + "." + key, "missing");
  return *it;
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path, "expected a number, got " + std::string(v.type_name()));
  return v.get<double>();
}

inline long long integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ValidationError(path, "expected an integer, got " + std::string(v.type_name()));
  return v.get<long long>();
}

inline Vector numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path, "expected an array, got " + std::string(v.type_name()));
  Vector out(static_cast<Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Json to_json(const Matrix& M) {
  Json arr = Json::array();
  for (Index r = 0; r < M.rows(); ++r) arr.push_back(to_json(Vector(M.row(r).transpose())));
  return arr;
}

inline Matrix matrix(const Json& v, Index cols, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path, "expected an array, got " + std::string(v.type_name()));
  Matrix out(static_cast<Index>(v.size()), cols);
  for (size_t r = 0; r < v.size(); ++r) {
    const std::string p = path + "[" + std::to_string(r) + "]";
    const Vector row = numbers(v[r], p);
    require(row.size() == cols, p, "expected " + std::to_string(cols) + " entries, got " + std::to_string(row.size()));
    out.row(static_cast<Index>(r)) = row.transpose();
  }
  return out;
}

inline void check_length(Index got, Index expected, const std::string& path) {
  require(got == expected, path,
          "length " + std::to_string(got) + " differs from horizon.T_total = " + std::to_string(expected));
}

inline StateOrdering ordering(const Json& obj, const std::string& path) {
  auto it = obj.find("ordering");
  if (it == obj.end()) return StateOrdering::ascending;
  if (!it->is_string()) throw ValidationError(path + ".ordering", "expected \"ascending\" or \"descending\"");
  const std::string s = it->get<std::string>();
  if (s == "ascending") return StateOrdering::ascending;
  if (s == "descending") return StateOrdering::descending;
  throw ValidationError(path + ".ordering", "expected \"ascending\" or \"descending\", got \"" + s + "\"");
}

inline FleetParams fleet(const Json& obj, const std::string& path, StateOrdering& order) {
  FleetParams f;
  f.fleet_size = number(member(obj, "fleet_size", path), path + ".fleet_size");
  const long long m = integer(member(obj, "num_categories", path), path + ".num_categories");
  require(m >= 2 && m <= 64, path + ".num_categories", "must lie in [2, 64], got " + std::to_string(m));
  f.num_categories = static_cast<int>(m);
  f.retention = numbers(member(obj, "retention", path), path + ".retention");
  f.initial_state = numbers(member(obj, "initial_state", path), path + ".initial_state");
  order = ordering(obj, path);
  if (order == StateOrdering::descending) {
    f.retention.reverseInPlace();
    f.initial_state.reverseInPlace();
  }
  f.validate(path);
  return f;
}

inline Json fleet_json(const FleetParams& f, StateOrdering order) {
  Vector retention = f.retention, x0 = f.initial_state;
  if (order == StateOrdering::descending) {
    retention.reverseInPlace();
    x0.reverseInPlace();
  }
  Json j;
  j["fleet_size"] = f.fleet_size;
  j["num_categories"] = f.num_categories;
  j["retention"] = to_json(retention);
  j["initial_state"] = to_json(x0);
  j["ordering"] = order == StateOrdering::ascending ? "ascending" : "descending";
  return j;
}

inline std::string read_file(const std::string& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(field, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace io_detail

/// Builds and validates a scenario from parsed JSON.
inline Scenario parse_scenario(const Json& doc) {
  using namespace io_detail;
  Scenario sc;
  const long long version = integer(member(doc, "schema_version", "scenario"), "schema_version");
  require(version == kSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(version) + " (expected " + std::to_string(kSchemaVersion) + ")");
  sc.schema_version = static_cast<int>(version);
  if (auto it = doc.find("notice"); it != doc.end()) {
    require(it->is_string(), "notice", "expected a string");
    sc.notice = it->get<std::string>();
  }

  const Json& hz = member(doc, "horizon", "scenario");
  const long long T_total = integer(member(hz, "T_total", "horizon"), "horizon.T_total");
  require(T_total >= 1, "horizon.T_total", "must be at least 1");
  const long long T = integer(member(hz, "T", "horizon"), "horizon.T");
  require(T >= 1 && T <= T_total, "horizon.T",
          "must lie in [1, T_total = " + std::to_string(T_total) + "], got " + std::to_string(T));
  sc.total_frame = T_total;
  sc.horizon = T;

  const Json& companies = member(doc, "companies", "scenario");
  sc.fleet_a = fleet(member(companies, "a", "companies"), "companies.a", sc.ordering_a);
  sc.fleet_b = fleet(member(companies, "b", "companies"), "companies.b", sc.ordering_b);
  require(sc.fleet_a.num_categories == sc.fleet_b.num_categories, "companies.b.num_categories",
          "must equal companies.a.num_categories");
  const Index m = sc.fleet_a.num_categories;

  const Json& prof = member(doc, "profiles", "scenario");
  ScenarioProfile& p = sc.profile;
  p.beta = numbers(member(prof, "beta", "profiles"), "profiles.beta");
  check_length(p.beta.size(), T_total, "profiles.beta");
  p.epsilon = numbers(member(prof, "epsilon", "profiles"), "profiles.epsilon");
  check_length(p.epsilon.size(), T_total, "profiles.epsilon");

  const Json& q = member(prof, "q", "profiles");
  if (!q.is_array()) throw ValidationError("profiles.q", "expected an array");
  check_length(static_cast<Index>(q.size()), T_total, "profiles.q");
  sc.q_broadcast = q.empty() || !q.front().is_array();
  if (sc.q_broadcast) {
    const Vector qs = numbers(q, "profiles.q");
    p.q = qs.replicate(1, m);
  } else {
    p.q = matrix(q, m, "profiles.q");
  }

  if (auto it = prof.find("raw"); it != prof.end()) {
    RawProfile raw;
    raw.requests = numbers(member(*it, "requests", "profiles.raw"), "profiles.raw.requests");
    raw.revenue_per_trip = numbers(member(*it, "revenue_per_trip", "profiles.raw"), "profiles.raw.revenue_per_trip");
    raw.charge_demand = numbers(member(*it, "charge_demand", "profiles.raw"), "profiles.raw.charge_demand");
    const Json& price = member(*it, "energy_price", "profiles.raw");
    if (price.is_array() && !price.empty() && !price.front().is_array())
      raw.energy_price = numbers(price, "profiles.raw.energy_price").replicate(1, m);
    else
      raw.energy_price = matrix(price, m, "profiles.raw.energy_price");
    p.raw = std::move(raw);
  }
  p.validate_and_normalize("profiles");

  const Json& sv = member(doc, "solver", "scenario");
  SolverConfig& c = sc.solver;
  c.gamma_bar = number(member(sv, "gamma_bar", "solver"), "solver.gamma_bar");
  c.eta = number(member(sv, "eta", "solver"), "solver.eta");
  c.tol = number(member(sv, "tol", "solver"), "solver.tol");
  const long long maxiter = integer(member(sv, "maxiter", "solver"), "solver.maxiter");
  const long long max_outer = integer(member(sv, "max_outer", "solver"), "solver.max_outer");
  require(maxiter >= 1 && maxiter <= 100000000, "solver.maxiter", "must lie in [1, 1e8]");
  require(max_outer >= 1 && max_outer <= 1000, "solver.max_outer", "must lie in [1, 1000]");
  c.maxiter = static_cast<int>(maxiter);
  c.max_outer = static_cast<int>(max_outer);
  if (auto it = sv.find("inner_tol"); it != sv.end()) c.inner_tol = number(*it, "solver.inner_tol");
  if (auto it = sv.find("warm_start"); it != sv.end()) {
    require(it->is_boolean(), "solver.warm_start", "expected true or false");
    c.warm_start = it->get<bool>();
  }
  c.validate();
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError("scenario", std::string("parse error: ") + e.what());
  }
  return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario_text(io_detail::read_file(path, "scenario")); }

inline Json scenario_to_json(const Scenario& sc) {
  using io_detail::to_json;
  Json doc;
  doc["schema_version"] = sc.schema_version;
  if (!sc.notice.empty()) doc["notice"] = sc.notice;
  doc["companies"]["a"] = io_detail::fleet_json(sc.fleet_a, sc.ordering_a);
  doc["companies"]["b"] = io_detail::fleet_json(sc.fleet_b, sc.ordering_b);
  const ScenarioProfile& p = sc.profile;
  doc["profiles"]["beta"] = to_json(p.beta);
  doc["profiles"]["epsilon"] = to_json(p.epsilon);
  doc["profiles"]["q"] = sc.q_broadcast ? to_json(Vector(p.q.col(0))) : to_json(p.q);
  if (p.raw) {
    Json raw;
    raw["requests"] = to_json(p.raw->requests);
    raw["revenue_per_trip"] = to_json(p.raw->revenue_per_trip);
    raw["energy_price"] = to_json(p.raw->energy_price);
    raw["charge_demand"] = to_json(p.raw->charge_demand);
    doc["profiles"]["raw"] = raw;
  }
  Json sv;
  sv["gamma_bar"] = sc.solver.gamma_bar;
  sv["eta"] = sc.solver.eta;
  sv["tol"] = sc.solver.tol;
  sv["maxiter"] = sc.solver.maxiter;
  sv["max_outer"] = sc.solver.max_outer;
  if (sc.solver.inner_tol) sv["inner_tol"] = *sc.solver.inner_tol;
  sv["warm_start"] = sc.solver.warm_start;
  doc["solver"] = sv;
  doc["horizon"]["T"] = sc.horizon;
  doc["horizon"]["T_total"] = sc.total_frame;
  return doc;
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << scenario_to_json(sc).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Result files

/// 17 significant digits, enough to round-trip any double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* kTrajectoryHeader = "k,company,category,x,u,phi,revenue,charge_cost,profit,lost_profit_cum";
inline const char* kSummaryHeader = "horizon,profit_a,profit_b,lost_profit";
inline const char* kSolvesHeader =
    "start,horizon,applied,delta_a,delta_b,step_used,outer_passes,inner_iterations,converged";

/// One row per (interval, company, category); categories ascending from 0
/// (critical). Interval-level columns repeat on every category row.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  out << kTrajectoryHeader << '\n';
  for (const IntervalRecord& iv : log.intervals) {
    for (Company c : {Company::a, Company::b}) {
      const bool a = c == Company::a;
      const Vector& x = a ? iv.x_a : iv.x_b;
      const Vector& u = a ? iv.u_a : iv.u_b;
      for (Index j = 0; j < x.size(); ++j) {
        out << iv.k << ',' << to_string(c) << ',' << j << ',' << fmt17(x[j]) << ',' << fmt17(u[j]) << ','
            << fmt17(a ? iv.phi_a : iv.phi_b) << ',' << fmt17(a ? iv.revenue_a : iv.revenue_b) << ','
            << fmt17(a ? iv.cost_a : iv.cost_b) << ',' << fmt17(a ? iv.profit_a() : iv.profit_b()) << ','
            << fmt17(iv.cum_lost) << '\n';
      }
    }
  }
}

struct SummaryRow {
  Index horizon = 0;
  double profit_a = 0.0;
  double profit_b = 0.0;
  double lost_profit = 0.0;
};

inline SummaryRow summarize(const TrajectoryLog& log) {
  return {log.horizon, log.total_profit_a(), log.total_profit_b(), log.total_lost()};
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows)
    out << r.horizon << ',' << fmt17(r.profit_a) << ',' << fmt17(r.profit_b) << ',' << fmt17(r.lost_profit) << '\n';
}

inline void write_solves_csv(std::ostream& out, const TrajectoryLog& log) {
  out << kSolvesHeader << '\n';
  for (const SolveRecord& s : log.solves)
    out << s.start << ',' << s.horizon << ',' << s.applied << ',' << fmt17(s.delta_a) << ',' << fmt17(s.delta_b)
        << ',' << fmt17(s.step_used) << ',' << s.outer_passes << ',' << s.inner_iterations << ','
        << (s.converged ? 1 : 0) << '\n';
}

/// A joint plan together with the window it was solved for, so that it can
/// be re-verified without the run that produced it.
struct SolutionFile {
  Index window_start = 0;
  Vector initial_state_a;  ///< ascending
  Vector initial_state_b;
  JointStrategy joint;
};

inline Json strategy_json(const Strategy& s) {
  Json j;
  j["phi"] = io_detail::to_json(s.phi);
  j["u"] = io_detail::to_json(s.u);
  return j;
}

inline Json solution_to_json(const SolutionFile& sol) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["window_start"] = sol.window_start;
  doc["horizon"] = sol.joint.a.horizon();
  doc["initial_state_a"] = io_detail::to_json(sol.initial_state_a);
  doc["initial_state_b"] = io_detail::to_json(sol.initial_state_b);
  doc["a"] = strategy_json(sol.joint.a);
  doc["b"] = strategy_json(sol.joint.b);
  return doc;
}

/// The final solve of a run: its window start, the states it started from and its plan.
inline SolutionFile final_solution(const TrajectoryLog& log) {
  require(log.last_plan.has_value() && !log.solves.empty(), "log", "run produced no plan");
  SolutionFile sol;
  sol.window_start = log.solves.back().start;
  const IntervalRecord& first = log.intervals.at(static_cast<size_t>(sol.window_start));
  sol.initial_state_a = first.x_a;
  sol.initial_state_b = first.x_b;
  sol.joint = *log.last_plan;
  return sol;
}

inline SolutionFile parse_solution(const Json& doc, Index num_categories) {
  using namespace io_detail;
  SolutionFile sol;
  const long long start = integer(member(doc, "window_start", "solution"), "solution.window_start");
  require(start >= 0, "solution.window_start", "must be non-negative");
  sol.window_start = start;
  sol.initial_state_a = numbers(member(doc, "initial_state_a", "solution"), "solution.initial_state_a");
  sol.initial_state_b = numbers(member(doc, "initial_state_b", "solution"), "solution.initial_state_b");
  for (const char* c : {"a", "b"}) {
    const std::string path = std::string("solution.") + c;
    const Json& s = member(doc, c, "solution");
    Strategy st;
    st.phi = numbers(member(s, "phi", path), path + ".phi");
    st.u = matrix(member(s, "u", path), num_categories, path + ".u");
    require(st.u.rows() == st.phi.size(), path + ".u", "needs one row per entry of phi");
    (c[0] == 'a' ? sol.joint.a : sol.joint.b) = std::move(st);
  }
  require(sol.joint.a.horizon() == sol.joint.b.horizon(), "solution.b", "horizon differs from solution.a");
  return sol;
}

inline SolutionFile load_solution(const std::string& path, Index num_categories) {
  Json doc;
  try {
    doc = Json::parse(io_detail::read_file(path, "solution"));
  } catch (const Json::parse_error& e) {
    throw ValidationError("solution", std::string("parse error: ") + e.what());
  }
  return parse_solution(doc, num_categories);
}

}  // namespace fleetgame
