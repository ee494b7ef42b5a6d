#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwg/constants.hpp"
#include "rwg/resonance.hpp"

namespace rwg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  double k2_min = 0.0;
  double k2_max = 0.0;
  int points = 0;
};

/// Everything a run needs; the JSON form carries "schema": "rwg-1".
struct RunConfig {
  WaveguideGeometry geom;
  FemNumerics fem;
  double r_trunc = 4.0;
  ConstantsNumerics constants;
  PeakOptions peak;
  double guard = 1e-9;
  std::vector<double> eps_list{0.25, 0.3, 0.35, 0.4};
  SweepConfig sweep;
};

/// Missing keys keep their defaults; unknown keys and wrong types are errors.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& c);

/// Scales every mesh size by 2^{-level}.
RunConfig refined(const RunConfig& c, int level);

}  // namespace rwg
