#pragma once

// The end-to-end acceptance checks shared by the acceptance test binary and
// `etmpc verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace etmpc {

struct AcceptanceOptions {
  std::string four_mass = "four_mass_oscillator";  ///< problem name or path
  std::string double_integrator = "double_integrator";
  int count = 100;
  std::uint64_t seed = 20160601;
  unsigned threads = 0;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

/// Runs criteria 1 through 9 in order. Never throws: a criterion that errors
/// out is reported as failed with the error text.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// "PASS  3  ratio bound ...: detail"
std::string format_result(const CriterionResult& r);

}  // namespace etmpc
