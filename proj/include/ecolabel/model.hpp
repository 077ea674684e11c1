#pragma once

// Records shared by connectors and the repository.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecolabel/common.hpp"
#include "ecolabel/error.hpp"

namespace ecolabel {

struct ProviderModelMetadata {
    std::string provider_id;
    std::string model_id;
    std::uint64_t downloads = 0;
    std::optional<double> model_size_mb;
    std::optional<double> dataset_size_mb;
    std::map<std::string, double> evaluation_metrics;
    std::vector<std::string> tags;
    std::string description;
    std::optional<std::string> hardware;
    Timestamp fetched_at{};

    bool operator==(const ProviderModelMetadata&) const = default;
};

// Identity of a model: (provider, model id). Local models use provider "local".
struct ModelKey {
    std::string provider_id{kLocalProvider};
    std::string model_id;

    // "provider:model_id"
    std::string str() const;
    // Splits at the first ':'; without one the provider is "local".
    static ModelKey parse(std::string_view text);

    auto operator<=>(const ModelKey&) const = default;
};

struct ModelRecord {
    ModelKey key;
    std::string display_name;
    ProviderModelMetadata metadata;
    std::string content_hash;
    Timestamp created_at{};
    Timestamp updated_at{};

    bool operator==(const ModelRecord&) const = default;
};

// Record with the hash computed and timestamps left for the store to set.
ModelRecord make_model_record(ProviderModelMetadata metadata);
ModelRecord make_local_stub(const ModelKey& key);

struct SyncFailure {
    std::string model_id;
    std::string code;
    std::string message;
    bool operator==(const SyncFailure&) const = default;
};

struct SyncRun {
    std::string run_id;
    std::string provider_id;
    Timestamp started_at{};
    Timestamp finished_at{};
    int created = 0;
    int updated = 0;
    int unchanged = 0;
    int labels_created = 0;
    std::vector<SyncFailure> failed;
    std::vector<std::string> warnings;

    int visited() const { return created + updated + unchanged + static_cast<int>(failed.size()); }
    bool operator==(const SyncRun&) const = default;
};

// SHA-256 over the canonical JSON of the metadata, excluding fetched_at.
std::string metadata_content_hash(const ProviderModelMetadata& metadata);

std::string sha256_hex(std::string_view data);

void to_json(nlohmann::json& j, const ProviderModelMetadata& m);
void from_json(const nlohmann::json& j, ProviderModelMetadata& m);
void to_json(nlohmann::json& j, const ModelRecord& r);
void from_json(const nlohmann::json& j, ModelRecord& r);
void to_json(nlohmann::json& j, const SyncRun& run);
void from_json(const nlohmann::json& j, SyncRun& run);

}  // namespace ecolabel
