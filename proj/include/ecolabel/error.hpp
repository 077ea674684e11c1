#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ecolabel {

// Machine-readable failure categories. The slug of each code is what appears
// in error envelopes (API) and in `--json` CLI output.
enum class ErrorCode {
    InvalidArgument,
    InvalidConfig,
    NonFiniteInput,
    PhaseMismatch,
    NoRatableMetrics,
    DerivationDivisionByZero,
    EmptyPopulation,
    MalformedFile,
    MissingColumn,
    NonNumericValue,
    NegativeValue,
    NonFiniteValue,
    EmptyRows,
    ModelNotFound,
    ProviderUnavailable,
    MalformedProviderResponse,
    UnknownProvider,
    SyncAlreadyRunning,
    NotFound,
    StorageFailure,
    InvalidSpec,
    EndpointUnreachable,
    NoSuccessfulCalls,
    Unauthorized,
    Forbidden,
    Internal,
};

std::string_view error_slug(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, nlohmann::json details = nullptr)
        : std::runtime_error(message), code_(code), details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const nlohmann::json& details() const noexcept { return details_; }

    // {"code": ..., "message": ..., "details"?: ...}
    nlohmann::json envelope() const;

private:
    ErrorCode code_;
    nlohmann::json details_;
};

nlohmann::json make_envelope(std::string_view code, std::string_view message,
                             const nlohmann::json& details = nullptr);

}  // namespace ecolabel
