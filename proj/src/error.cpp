#include "etmpc/error.hpp"

namespace etmpc {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::dare_divergence: return "DareDivergence";
    case Errc::infeasible: return "Infeasible";
    case Errc::degenerate_active_set: return "DegenerateActiveSet";
    case Errc::rank_deficient: return "RankDeficient";
    case Errc::range_error: return "RangeError";
    case Errc::framing_error: return "FramingError";
    case Errc::central_infeasible: return "CentralInfeasible";
    case Errc::server_error: return "ServerError";
    case Errc::timeout: return "Timeout";
    case Errc::connection_lost: return "ConnectionLost";
  }
  return "Unknown";
}

}  // namespace etmpc
