#pragma once

#include <stdexcept>
#include <string>

namespace dsta {

enum class Errc {
  invalid_input,
  shape_mismatch,
  degenerate_vector,
  invalid_pmf,
  invalid_parameter,
  invalid_label,
  protocol_error,
  config_error,
  io_error,
  checksum_mismatch,
  contract_violation,
  numeric_failure,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_input: return "invalid_input";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::degenerate_vector: return "degenerate_vector";
    case Errc::invalid_pmf: return "invalid_pmf";
    case Errc::invalid_parameter: return "invalid_parameter";
    case Errc::invalid_label: return "invalid_label";
    case Errc::protocol_error: return "protocol_error";
    case Errc::config_error: return "config_error";
    case Errc::io_error: return "io_error";
    case Errc::checksum_mismatch: return "checksum_mismatch";
    case Errc::contract_violation: return "contract_violation";
    case Errc::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dsta
