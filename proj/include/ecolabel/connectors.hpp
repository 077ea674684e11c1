#pragma once

// Provider adapters: pull model metadata from a model hub and feed it to the
// repository. Sync only talks to the ProviderAdapter interface, so the
// fixture-backed adapter and the live one are interchangeable.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ecolabel/label_engine.hpp"
#include "ecolabel/model.hpp"
#include "ecolabel/repository.hpp"

namespace ecolabel {

struct ModelIdPage {
    std::vector<std::string> ids;
    bool has_more = false;
};

class ProviderAdapter {
public:
    virtual ~ProviderAdapter() = default;
    virtual std::string provider_id() const = 0;
    // 1-based page. Throws ProviderUnavailable or MalformedProviderResponse.
    virtual ModelIdPage list_model_ids(int page, int page_size) = 0;
    // Throws ModelNotFound, ProviderUnavailable or MalformedProviderResponse.
    virtual ProviderModelMetadata fetch_model(const std::string& model_id) = 0;
};

// One JSON document per model. The file name stem is the model id with '/'
// written as "__" (so "org__bert" is "org/bert").
class FixtureAdapter final : public ProviderAdapter {
public:
    FixtureAdapter(std::filesystem::path dir, std::string provider_id);

    std::string provider_id() const override { return provider_id_; }
    ModelIdPage list_model_ids(int page, int page_size) override;
    ProviderModelMetadata fetch_model(const std::string& model_id) override;

    static std::string id_from_stem(const std::string& stem);
    static std::string stem_from_id(const std::string& id);

private:
    std::filesystem::path dir_;
    std::string provider_id_;
};

struct HubClientOptions {
    std::string base_url;  // empty: $ECOLABEL_HF_BASE_URL, else https://huggingface.co
    std::chrono::milliseconds min_request_interval{100};
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{200};  // doubles per retry
    std::chrono::seconds timeout{30};
};

inline constexpr const char* kHuggingFaceProvider = "huggingface";

// Live adapter for the Hugging Face model hub REST API.
class HuggingFaceAdapter final : public ProviderAdapter {
public:
    explicit HuggingFaceAdapter(HubClientOptions options = {});

    std::string provider_id() const override { return kHuggingFaceProvider; }
    ModelIdPage list_model_ids(int page, int page_size) override;
    ProviderModelMetadata fetch_model(const std::string& model_id) override;

    const std::string& base_url() const { return base_url_; }

private:
    struct Response {
        int status = 0;
        std::string body;
        std::string link;
    };
    Response get(const std::string& path_and_query);

    HubClientOptions options_;
    std::string base_url_;
    std::chrono::steady_clock::time_point last_request_{};
    // cursors_[i] is the request path for page i+1 at cursor_page_size_
    std::vector<std::string> cursors_;
    int cursor_page_size_ = 0;
    std::mutex mutex_;
};

// Normalizes a hub detail document (GET /api/models/{id}) into metadata.
ProviderModelMetadata parse_hub_model(const nlohmann::json& doc, const std::string& provider_id);
// Weight-file total in MB (2^20 bytes) from the "siblings" list, if any sizes are known.
std::optional<double> weight_files_mb(const nlohmann::json& siblings);

// Fields used by the default configs; matching on evaluation metric names is
// case-insensitive.
inline const std::vector<std::string> kPerformanceSources{"accuracy", "f1", "rouge"};

PhaseReport metadata_to_report(const ProviderModelMetadata& meta, Phase phase);

struct SyncOptions {
    std::optional<int> limit;
    int page_size = 100;
};

// Pages through the provider, upserts every model and stores a label for each
// created or updated model that has at least one ratable metric. Model
// failures are recorded in the run; only a failed first page throws
// (ProviderUnavailable). The run is appended to the store.
SyncRun sync_provider(ProviderAdapter& adapter, Repository& repo, const EfficiencyConfig& config,
                      std::span<const RecommendationEntry> catalog, const SyncOptions& options = {});

class ProviderRegistry {
public:
    void add(std::unique_ptr<ProviderAdapter> adapter);  // InvalidArgument on duplicate id
    bool contains(const std::string& provider_id) const;
    ProviderAdapter& get(const std::string& provider_id) const;  // UnknownProvider
    std::vector<std::string> ids() const;

    // sync_provider under a per-provider run lock; a second concurrent run for
    // the same provider gets SyncAlreadyRunning.
    SyncRun run_sync(const std::string& provider_id, Repository& repo, const EfficiencyConfig& config,
                     std::span<const RecommendationEntry> catalog, const SyncOptions& options = {});

private:
    std::map<std::string, std::unique_ptr<ProviderAdapter>> adapters_;
    mutable std::mutex running_mutex_;
    std::set<std::string> running_;
};

}  // namespace ecolabel
