#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace percweb::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kInvalidSpec = 2, kGuardTripped = 3, kIoError = 4 };

/// Everything that determines a run's output. `workers` and `out` are not
/// part of the hash: they change wall time and destination only.
struct ExperimentSpec {
  std::string command;
  std::vector<double> p;  // empty: command default
  std::uint64_t seed = 1;
  std::int64_t replicas = 0;  // 0: command default (200 for check, else 100)
  std::int64_t n = 0;         // 0: command default (50 for check, else 1000)
  std::int64_t horizon = 0;  // 0: command default
  std::int64_t margin = 500;
  std::vector<double> eps;
  std::vector<double> delta;
  std::vector<double> t;
  std::int64_t x = 20;
  std::optional<double> sigma;  // coalesce / eta: skip the pilot estimate
  std::optional<std::int64_t> fault_seed;  // check: perturb this seed's result
  std::string out;
  int workers = 1;
};

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"simulate", "estimate", "coalesce", "eta", "check"};
  return names;
}

/// Fills command defaults and rejects out-of-range values (SpecError).
void normalize(ExperimentSpec& spec);

nlohmann::json to_json(const ExperimentSpec& spec, bool with_runtime = true);
/// Unknown keys and wrongly typed values raise SpecError.
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// FNV-1a 64 over the canonical JSON of the hashed fields, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

/// %.17g
std::string format_double(double v);

/// Runs a normalized spec. Outputs go to spec.out (a directory for
/// simulate, a file otherwise) or to `out` when spec.out is empty.
/// Returns kOk or kCheckFailed; throws SpecError, IoError or percweb::Error.
int execute(const ExperimentSpec& spec, std::ostream& out);

/// Full command-line entry point with exit-code mapping.
int main_with_args(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace percweb::cli
