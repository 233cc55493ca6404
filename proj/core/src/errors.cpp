#include "vreml/errors.hpp"

namespace vreml {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::empty_graph: return "EmptyGraph";
    case Errc::no_edges: return "NoEdges";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::rank_deficient_design: return "RankDeficientDesign";
    case Errc::design_too_wide: return "DesignTooWide";
    case Errc::disconnected: return "Disconnected";
    case Errc::not_positive_definite_on_e: return "NotPositiveDefiniteOnE";
    case Errc::degenerate_denominator: return "DegenerateDenominator";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::too_few_cells: return "TooFewCells";
    case Errc::disconnected_grid: return "DisconnectedGrid";
    case Errc::zero_variance_response: return "ZeroVarianceResponse";
    case Errc::non_finite_objective: return "NonFiniteObjective";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace vreml
