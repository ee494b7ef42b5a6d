#include "rwg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rwg {

namespace {

using json = nlohmann::json;

void only_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "' in " + where);
  }
}

void positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

}  // namespace

RunConfig config_from_json(const json& j) {
  only_keys(j, "config", {"schema", "geometry", "fem", "constants", "peak", "compare", "sweep"});
  if (!j.contains("schema") || j.at("schema") != "rwg-1") throw ConfigError("config schema must be \"rwg-1\"");
  RunConfig c;
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    only_keys(g, "geometry", {"l", "omega", "d", "r0", "epsilon"});
    read(g, "l", c.geom.l, "geometry");
    read(g, "omega", c.geom.omega, "geometry");
    read(g, "d", c.geom.d, "geometry");
    read(g, "r0", c.geom.r0, "geometry");
    read(g, "epsilon", c.geom.epsilon, "geometry");
  }
  if (j.contains("fem")) {
    const json& f = j.at("fem");
    only_keys(f, "fem", {"h_max", "grading", "r_ref", "order", "r_trunc"});
    read(f, "h_max", c.fem.h_max, "fem");
    read(f, "grading", c.fem.grading, "fem");
    read(f, "r_ref", c.fem.r_ref, "fem");
    read(f, "order", c.fem.order, "fem");
    read(f, "r_trunc", c.r_trunc, "fem");
  }
  if (j.contains("constants")) {
    const json& k = j.at("constants");
    only_keys(k, "constants",
              {"h_resonator", "h_halfstrip", "h_omega", "grading", "r_min", "r_max", "r_trunc", "R_list", "refine_check"});
    read(k, "h_resonator", c.constants.h_resonator, "constants");
    read(k, "h_halfstrip", c.constants.h_halfstrip, "constants");
    read(k, "h_omega", c.constants.h_omega, "constants");
    read(k, "grading", c.constants.grading, "constants");
    read(k, "r_min", c.constants.r_min, "constants");
    read(k, "r_max", c.constants.r_max, "constants");
    read(k, "r_trunc", c.constants.r_trunc, "constants");
    read(k, "R_list", c.constants.R_list, "constants");
    read(k, "refine_check", c.constants.refine_check, "constants");
  }
  c.constants.order = c.fem.order;
  if (j.contains("peak")) {
    const json& p = j.at("peak");
    only_keys(p, "peak", {"heights", "tol", "bracket_widths", "initial_samples", "guard"});
    read(p, "heights", c.peak.heights, "peak");
    read(p, "tol", c.peak.tol, "peak");
    read(p, "bracket_widths", c.peak.bracket_widths, "peak");
    read(p, "initial_samples", c.peak.initial_samples, "peak");
    read(p, "guard", c.guard, "peak");
  }
  if (j.contains("compare")) {
    const json& p = j.at("compare");
    only_keys(p, "compare", {"eps"});
    read(p, "eps", c.eps_list, "compare");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    only_keys(s, "sweep", {"k2_min", "k2_max", "points"});
    read(s, "k2_min", c.sweep.k2_min, "sweep");
    read(s, "k2_max", c.sweep.k2_max, "sweep");
    read(s, "points", c.sweep.points, "sweep");
  }
  try {
    c.geom.validate();
  } catch (const GeometryError& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  positive(c.fem.h_max, "fem.h_max");
  positive(c.r_trunc, "fem.r_trunc");
  if (!(c.fem.grading >= 0.0 && c.fem.grading < 1.0)) throw ConfigError("fem.grading must lie in [0, 1)");
  if (c.fem.order != 1 && c.fem.order != 2) throw ConfigError("fem.order must be 1 or 2");
  positive(c.constants.h_resonator, "constants.h_resonator");
  positive(c.constants.h_halfstrip, "constants.h_halfstrip");
  positive(c.constants.h_omega, "constants.h_omega");
  if (c.constants.R_list.empty()) throw ConfigError("constants.R_list must not be empty");
  for (double h : c.peak.heights)
    if (!(h > 0.0 && h < 1.0)) throw ConfigError("peak.heights must lie in (0, 1)");
  positive(c.peak.tol, "peak.tol");
  positive(c.peak.bracket_widths, "peak.bracket_widths");
  for (double e : c.eps_list) positive(e, "compare.eps entries");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["schema"] = "rwg-1";
  j["geometry"] = {{"l", c.geom.l}, {"omega", c.geom.omega}, {"d", c.geom.d}, {"r0", c.geom.r0}, {"epsilon", c.geom.epsilon}};
  j["fem"] = {{"h_max", c.fem.h_max}, {"grading", c.fem.grading}, {"r_ref", c.fem.r_ref}, {"order", c.fem.order},
              {"r_trunc", c.r_trunc}};
  j["constants"] = {{"h_resonator", c.constants.h_resonator}, {"h_halfstrip", c.constants.h_halfstrip},
                    {"h_omega", c.constants.h_omega},         {"grading", c.constants.grading},
                    {"r_min", c.constants.r_min},             {"r_max", c.constants.r_max},
                    {"r_trunc", c.constants.r_trunc},         {"R_list", c.constants.R_list},
                    {"refine_check", c.constants.refine_check}};
  j["peak"] = {{"heights", c.peak.heights},
               {"tol", c.peak.tol},
               {"bracket_widths", c.peak.bracket_widths},
               {"initial_samples", c.peak.initial_samples},
               {"guard", c.guard}};
  j["compare"] = {{"eps", c.eps_list}};
  j["sweep"] = {{"k2_min", c.sweep.k2_min}, {"k2_max", c.sweep.k2_max}, {"points", c.sweep.points}};
  return j;
}

RunConfig refined(const RunConfig& c, int level) {
  if (level < 0) throw ConfigError("refinement level must be nonnegative");
  RunConfig r = c;
  const double f = std::ldexp(1.0, -level);
  r.fem.h_max *= f;
  r.constants.h_resonator *= f;
  r.constants.h_halfstrip *= f;
  r.constants.h_omega *= f;
  return r;
}

}  // namespace rwg
