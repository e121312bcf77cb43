#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace keiter {

enum class Errc {
    non_finite,
    budget_exceeded,
    out_of_domain,
    non_positive_metric,
    metric_degenerate,
    not_normalized,
    non_integrable,
    tail_dominates,
    ill_conditioned,
    extremal_violation,
    invalid_argument,
    divergence_detected,
    insufficient_data,
    singular_hessian,
    not_critical,
    outside_fiber,
    stencil_outside_domain,
    config_invalid,
    missing_manifest,
    io_error,
};

inline std::string_view errc_name(Errc c) {
    switch (c) {
    case Errc::non_finite: return "NonFinite";
    case Errc::budget_exceeded: return "BudgetExceeded";
    case Errc::out_of_domain: return "OutOfDomain";
    case Errc::non_positive_metric: return "NonPositiveMetric";
    case Errc::metric_degenerate: return "MetricDegenerate";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::non_integrable: return "NonIntegrable";
    case Errc::tail_dominates: return "TailDominates";
    case Errc::ill_conditioned: return "IllConditioned";
    case Errc::extremal_violation: return "ExtremalViolation";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::divergence_detected: return "DivergenceDetected";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::singular_hessian: return "SingularHessian";
    case Errc::not_critical: return "NotCritical";
    case Errc::outside_fiber: return "OutsideFiber";
    case Errc::stencil_outside_domain: return "StencilOutsideDomain";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::missing_manifest: return "MissingManifest";
    case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace keiter
