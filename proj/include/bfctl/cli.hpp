#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfctl/model.hpp"

namespace bfctl::cli {

inline constexpr int kSchemaVersion = 1;

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,      // bad command line
  kConfig = 2,     // unreadable or invalid model configuration
  kUnstable = 3,   // load at or above capacity, or too close to it
  kNumerical = 4,  // root finding, linear algebra or convergence failure
  kIo = 5,         // file system errors
};

int exit_code_for(ErrorCode code);

/// {"schema_version": 1, "error": {"code": ..., "message": ..., ...}}
nlohmann::json error_json(const std::exception& e);

struct Timing {
  int g1 = 8, g2 = 20, r = 20;
};

/// Lane layouts for a shared turning/through stream with total rate `mu`
/// per slot (q = 1 in the blockable part):
///   case1   one shared lane, 30% turning
///   case2   dedicated turning lane (0.3 mu, p = 1) and through lane (0.7 mu)
///   case2a  two shared lanes, 0.5 mu each, one with p = 0.6, one with p = 0
///   case2b  as case2a with the turning lane at 0.4 mu, p = 0.75
/// Default timing is 8/20/20 for case1 and case2, 8/16/16 for case2a and case2b.
std::vector<ModelConfig> lane_scenario_expand(const std::string& name, double mu,
                                              std::optional<Timing> timing = std::nullopt);

/// Sweep axis: a parameter path and its values, or a lane scenario swept over
/// its total rate.
struct SweepSpec {
  std::string parameter;  // arrivals.mean, p, q, m, g1, g2, r; "mu" for scenarios
  std::vector<double> values;
  std::optional<std::string> scenario;
  std::optional<Timing> timing;

  /// "a:b:n" (n evenly spaced points, both ends included) or "x,y,z".
  static std::vector<double> parse_values(const std::string& text);
};

/// Returns `base` with the parameter at `path` set to `value`. Throws
/// Error(InvalidParameter) when the path does not apply.
ModelConfig apply_parameter(ModelConfig base, const std::string& path, double value);

/// Worker threads for sweeps and simulations; BFCTL_WORKERS overrides.
int worker_count();

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bfctl::cli
