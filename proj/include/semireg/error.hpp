#pragma once

#include <stdexcept>
#include <string>

namespace semireg {

/// Machine-readable failure categories surfaced by every module.
enum class ErrorCode {
    domain_violation,
    contract_violation,
    positivity_violation,
    stability_violation,
    blow_up,
    parameter_violation,
    stiffness_failure,
    integration_failure,
    degeneracy,
    extrapolation_refusal,
    decomposition_inconsistency,
    configuration_error,
    io_error,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string module, const std::string& message)
        : std::runtime_error(message), code_(code), module_(std::move(module)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorCode code_;
    std::string module_;
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::domain_violation: return "domain_violation";
        case ErrorCode::contract_violation: return "contract_violation";
        case ErrorCode::positivity_violation: return "positivity_violation";
        case ErrorCode::stability_violation: return "stability_violation";
        case ErrorCode::blow_up: return "blow_up";
        case ErrorCode::parameter_violation: return "parameter_violation";
        case ErrorCode::stiffness_failure: return "stiffness_failure";
        case ErrorCode::integration_failure: return "integration_failure";
        case ErrorCode::degeneracy: return "degeneracy";
        case ErrorCode::extrapolation_refusal: return "extrapolation_refusal";
        case ErrorCode::decomposition_inconsistency: return "decomposition_inconsistency";
        case ErrorCode::configuration_error: return "configuration_error";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

}  // namespace semireg
