#pragma once

#include <stdexcept>
#include <string>

namespace blowup {

enum class ErrorCode {
    M_OUT_OF_RANGE,
    N_OUT_OF_RANGE,
    SIGMA_NEGATIVE,
    DIM_MISMATCH,
    ORDER_UNAVAILABLE,
    STEP_UNDERFLOW,
    INADMISSIBLE_START,
    NO_RETURN,
    BAD_SPEC,
    SAME_FATE_AT_ENDPOINTS,
    TOO_MANY_INDETERMINATE,
    DEGENERATE_TRAJECTORY,
    BAD_CONSTANTS,
    BLOWUP,
    TOUCHDOWN,
    NO_PROFILE,
};

inline const char* to_string(ErrorCode c)
{
    switch (c) {
    case ErrorCode::M_OUT_OF_RANGE: return "M_OUT_OF_RANGE";
    case ErrorCode::N_OUT_OF_RANGE: return "N_OUT_OF_RANGE";
    case ErrorCode::SIGMA_NEGATIVE: return "SIGMA_NEGATIVE";
    case ErrorCode::DIM_MISMATCH: return "DIM_MISMATCH";
    case ErrorCode::ORDER_UNAVAILABLE: return "ORDER_UNAVAILABLE";
    case ErrorCode::STEP_UNDERFLOW: return "STEP_UNDERFLOW";
    case ErrorCode::INADMISSIBLE_START: return "INADMISSIBLE_START";
    case ErrorCode::NO_RETURN: return "NO_RETURN";
    case ErrorCode::BAD_SPEC: return "BAD_SPEC";
    case ErrorCode::SAME_FATE_AT_ENDPOINTS: return "SAME_FATE_AT_ENDPOINTS";
    case ErrorCode::TOO_MANY_INDETERMINATE: return "TOO_MANY_INDETERMINATE";
    case ErrorCode::DEGENERATE_TRAJECTORY: return "DEGENERATE_TRAJECTORY";
    case ErrorCode::BAD_CONSTANTS: return "BAD_CONSTANTS";
    case ErrorCode::BLOWUP: return "BLOWUP";
    case ErrorCode::TOUCHDOWN: return "TOUCHDOWN";
    case ErrorCode::NO_PROFILE: return "NO_PROFILE";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace blowup
