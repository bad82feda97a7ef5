#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace etmpc {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  parse_error,
  dare_divergence,
  infeasible,
  degenerate_active_set,
  rank_deficient,
  range_error,
  framing_error,
  central_infeasible,
  server_error,
  timeout,
  connection_lost,
};

std::string_view errc_name(Errc code) noexcept;

/// Library-wide exception. Carries a machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace etmpc
