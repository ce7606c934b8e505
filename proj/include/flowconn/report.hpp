#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "flowconn/core.hpp"
#include "flowconn/estimators.hpp"

namespace flowconn {

/// Resolved configuration (defaults included) carried into every report for
/// provenance.
using ConfigMap = std::map<std::string, std::string>;

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json report_to_json(const TheoremReport& r, const ConfigMap& config) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"i", e.i},
                       {"j", e.j},
                       {"lhs", e.lhs},
                       {"rhs", e.rhs},
                       {"rhs_se", e.rhs_se},
                       {"components",
                        {{"dpsi_ij", e.dpsi_ij},
                         {"dpsi_ji", e.dpsi_ji},
                         {"q_circulation", e.q_circulation},
                         {"boundary_ij", e.boundary_ij},
                         {"boundary_ji", e.boundary_ji}}},
                       {"residual", e.residual},
                       {"pass", e.pass}});
  }
  return nlohmann::json{{"manifold", r.manifold},
                        {"curve", r.curve_spec},
                        {"mode", r.mode},
                        {"paths", r.paths},
                        {"dt", r.dt},
                        {"h", r.h},
                        {"N", r.segments},
                        {"seed", r.seed},
                        {"bias_allowance", r.bias_allowance},
                        {"config", config},
                        {"entries", entries}};
}

inline std::string report_to_csv(const TheoremReport& r, const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += "# " + k + "=" + v + "\n";
  out += "i,j,lhs,rhs,rhs_se,dpsi_ij,dpsi_ji,q_circulation,boundary_ij,boundary_ji,residual,pass\n";
  for (const auto& e : r.entries) {
    out += std::to_string(e.i) + "," + std::to_string(e.j) + "," +
           format_real(e.lhs) + "," + format_real(e.rhs) + "," +
           format_real(e.rhs_se) + "," + format_real(e.dpsi_ij) + "," +
           format_real(e.dpsi_ji) + "," + format_real(e.q_circulation) + "," +
           format_real(e.boundary_ij) + "," + format_real(e.boundary_ji) + "," +
           format_real(e.residual) + "," + (e.pass ? "1" : "0") + "\n";
  }
  return out;
}

inline void write_report(const TheoremReport& r, const ConfigMap& config,
                         const std::string& path, const std::string& format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open output file '" + path + "'");
  if (format == "json") {
    os << report_to_json(r, config).dump(2) << "\n";
  } else if (format == "csv") {
    os << report_to_csv(r, config);
  } else {
    throw ConfigError("unknown report format '" + format + "' (use json|csv)");
  }
}

}  // namespace flowconn
