#ifndef QGP_ERRORS_HPP
#define QGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qgp {

// Every failure the library reports goes through one exception type carrying a
// stable category slug.  The CLI maps the slug straight onto its "error: <slug>:"
// output, so the strings here are part of the public contract.
enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  degenerate_data,
  ill_conditioned_kernel,
  numeric_failure,
  oracle_failure,
  ep_divergence,
  fit_failure,
  corrupt_model,
  parse_error,
  missing_target,
  io_error,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument:       return "invalid-argument";
    case ErrorCode::dimension_mismatch:     return "dimension-mismatch";
    case ErrorCode::degenerate_data:        return "degenerate-data";
    case ErrorCode::ill_conditioned_kernel: return "ill-conditioned-kernel";
    case ErrorCode::numeric_failure:        return "numeric-failure";
    case ErrorCode::oracle_failure:         return "oracle-failure";
    case ErrorCode::ep_divergence:          return "ep-divergence";
    case ErrorCode::fit_failure:            return "fit-failure";
    case ErrorCode::corrupt_model:          return "corrupt-model";
    case ErrorCode::parse_error:            return "parse-error";
    case ErrorCode::missing_target:         return "missing-target";
    case ErrorCode::io_error:               return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace qgp

#endif
