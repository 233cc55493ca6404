#pragma once

#include <stdexcept>
#include <string>

namespace vreml {

// Failure categories surfaced by the library. The CLI maps these onto its
// exit-code contract; tests match on the code, not on message text.
enum class Errc {
  empty_graph,
  no_edges,
  dimension_mismatch,
  non_finite_input,
  rank_deficient_design,
  design_too_wide,
  disconnected,
  not_positive_definite_on_e,
  degenerate_denominator,
  invalid_config,
  too_few_cells,
  disconnected_grid,
  zero_variance_response,
  non_finite_objective,
  io_error,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace vreml
