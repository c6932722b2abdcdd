#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levylab {

enum class ErrorCode {
    invalid_model,
    invalid_argument,
    tolerance_failure,
    degeneracy,
    resolution,
    grid_mismatch,
    undefined_ratio,
    refinement,
    precondition,
    sampling,
    contract_violation,
    configuration,
    instability,
    certificate,
    smallness_unattainable,
    io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_model: return "invalid-model";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::tolerance_failure: return "tolerance-failure";
    case ErrorCode::degeneracy: return "degeneracy";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::undefined_ratio: return "undefined-ratio";
    case ErrorCode::refinement: return "refinement";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::sampling: return "sampling";
    case ErrorCode::contract_violation: return "contract-violation";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::instability: return "instability";
    case ErrorCode::certificate: return "certificate-violation";
    case ErrorCode::smallness_unattainable: return "smallness-unattainable";
    case ErrorCode::io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; the code identifies the failure class
/// and `detail()` carries a measured quantity where one exists (residual, norm, step).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, double detail = 0.0)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    double detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    double detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message, double detail = 0.0) {
    throw Error(code, message, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

} // namespace levylab
