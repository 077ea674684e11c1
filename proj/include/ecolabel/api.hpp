#pragma once

// REST API under /api/v1. Handlers are thin: they parse the request, call the
// shared LabelService / Repository / ProviderRegistry, and map every
// ecolabel::Error to a status code plus an error envelope.

#include <string>
#include <string_view>

#include <json.hpp>

#include "ecolabel/connectors.hpp"
#include "ecolabel/service.hpp"

namespace httplib {
class Server;
}

namespace ecolabel {

int http_status(ErrorCode code);

// Compares SHA-256 digests with CRYPTO_memcmp so timing reveals neither the
// token nor its length.
bool tokens_equal(std::string_view presented, std::string_view expected);

// JSON Schemas of the wire types, as served at GET /api/v1/schema.
nlohmann::json api_schema();

struct ApiOptions {
    // Bearer token for QA endpoints. When empty, QA endpoints answer 403.
    std::string qa_token;
    // Models read by sync runs label this phase.
    Phase sync_phase = Phase::Training;
};

class ApiService {
public:
    ApiService(LabelService& labels, ProviderRegistry& providers, ApiOptions options);

    // Registers every route plus the error and exception handlers.
    void install(httplib::Server& server);

private:
    LabelService& labels_;
    ProviderRegistry& providers_;
    ApiOptions options_;
};

}  // namespace ecolabel
