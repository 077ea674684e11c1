#include "ecolabel/error.hpp"

namespace ecolabel {

std::string_view error_slug(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::InvalidConfig: return "invalid_config";
        case ErrorCode::NonFiniteInput: return "non_finite_input";
        case ErrorCode::PhaseMismatch: return "phase_mismatch";
        case ErrorCode::NoRatableMetrics: return "no_ratable_metrics";
        case ErrorCode::DerivationDivisionByZero: return "derivation_division_by_zero";
        case ErrorCode::EmptyPopulation: return "empty_population";
        case ErrorCode::MalformedFile: return "malformed_file";
        case ErrorCode::MissingColumn: return "missing_column";
        case ErrorCode::NonNumericValue: return "non_numeric_value";
        case ErrorCode::NegativeValue: return "negative_value";
        case ErrorCode::NonFiniteValue: return "non_finite_value";
        case ErrorCode::EmptyRows: return "empty_rows";
        case ErrorCode::ModelNotFound: return "model_not_found";
        case ErrorCode::ProviderUnavailable: return "provider_unavailable";
        case ErrorCode::MalformedProviderResponse: return "malformed_provider_response";
        case ErrorCode::UnknownProvider: return "unknown_provider";
        case ErrorCode::SyncAlreadyRunning: return "sync_already_running";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::StorageFailure: return "storage_failure";
        case ErrorCode::InvalidSpec: return "invalid_spec";
        case ErrorCode::EndpointUnreachable: return "endpoint_unreachable";
        case ErrorCode::NoSuccessfulCalls: return "no_successful_calls";
        case ErrorCode::Unauthorized: return "unauthorized";
        case ErrorCode::Forbidden: return "forbidden";
        case ErrorCode::Internal: return "internal_error";
    }
    return "internal";
}

nlohmann::json make_envelope(std::string_view code, std::string_view message,
                             const nlohmann::json& details) {
    nlohmann::json env = {{"code", code}, {"message", message}};
    if (!details.is_null()) {
        env["details"] = details;
    }
    return env;
}

nlohmann::json Error::envelope() const {
    return make_envelope(error_slug(code_), what(), details_);
}

}  // namespace ecolabel
