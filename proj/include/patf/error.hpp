#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace patf {

enum class ErrorCode {
    invalid_parameter,
    invalid_input,
    calibration_uncertainty,
    degenerate_ratio,
    bad_magic,
    malformed_header,
    dimension_mismatch,
    truncated_payload,
    io_failure,
    parse_error,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::calibration_uncertainty: return "calibration-uncertainty";
    case ErrorCode::degenerate_ratio: return "degenerate-ratio";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::malformed_header: return "malformed-header";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::truncated_payload: return "truncated-payload";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::parse_error: return "parse-error";
    }
    return "unknown";
}

/// Every failure in the library is reported as an Error carrying a code, so
/// callers (and the CLI) can branch on the category without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) {
        throw Error(code, what);
    }
}

} // namespace patf
