#pragma once

// Run manifests: what went in (hashed), how the solver was configured, and
// how each solve went. Requires linking OpenSSL's libcrypto.

#include "fleetgame/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <iomanip>

namespace fleetgame {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline Json solver_config_json(const SolverConfig& c) {
  Json j;
  j["gamma_bar"] = c.gamma_bar;
  j["eta"] = c.eta;
  j["tol"] = c.tol;
  j["maxiter"] = c.maxiter;
  j["max_outer"] = c.max_outer;
  j["inner_tol"] = c.inner_threshold();
  j["warm_start"] = c.warm_start;
  j["activity_tol"] = c.activity_tol;
  return j;
}

inline Json diagnostics_json(const TrajectoryLog& log) {
  Json solves = Json::array();
  for (const SolveRecord& s : log.solves) {
    Json j;
    j["start"] = s.start;
    j["horizon"] = s.horizon;
    j["applied"] = s.applied;
    j["delta_a"] = s.delta_a;
    j["delta_b"] = s.delta_b;
    j["step_used"] = s.step_used;
    j["outer_passes"] = s.outer_passes;
    j["inner_iterations"] = s.inner_iterations;
    j["converged"] = s.converged;
    solves.push_back(j);
  }
  Json d;
  d["horizon"] = log.horizon;
  d["total_frame"] = log.total_frame;
  d["solves"] = solves;
  d["profit_a"] = log.total_profit_a();
  d["profit_b"] = log.total_profit_b();
  d["lost_profit"] = log.total_lost();
  return d;
}

/// Manifest skeleton; callers add command-specific results under "results".
inline Json make_manifest(const std::string& command, const std::string& scenario_path,
                          const std::string& scenario_bytes, const SolverConfig& config) {
  Json m;
  m["command"] = command;
  m["scenario_path"] = scenario_path;
  m["inputs_sha256"] = sha256_hex(scenario_bytes);
  m["config"] = solver_config_json(config);
  m["created_utc"] = utc_timestamp();
  return m;
}

}  // namespace fleetgame
