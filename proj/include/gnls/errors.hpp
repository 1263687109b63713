#pragma once

#include <stdexcept>
#include <string>

namespace gnls {

// Error taxonomy shared by all modules. The CLI maps ConfigError (and parse
// failures) to exit code 2 and every SolverError to exit code 1.
enum class errc {
  disconnected_graph,
  non_positive_length,
  dangling_vertex_reference,
  invalid_parameter,
  conflicting_vertex_values,
  no_convergence,
  mass_mismatch,
  max_iters_exceeded,
  edge_too_short,
  path_collapse,
  singular_jacobian,
  diverged,
  step_floor_reached,
  no_peaks,
  parse_error,
  io_error,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const { return code_; }

  // Config-class errors are caller mistakes; everything else is a solver outcome.
  bool is_config() const {
    switch (code_) {
      case errc::disconnected_graph:
      case errc::non_positive_length:
      case errc::dangling_vertex_reference:
      case errc::invalid_parameter:
      case errc::conflicting_vertex_values:
      case errc::parse_error:
      case errc::io_error:
        return true;
      default:
        return false;
    }
  }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, errc code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace gnls
