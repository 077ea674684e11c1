#include "ecolabel/connectors.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "ecolabel/codec.hpp"

namespace ecolabel {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

[[noreturn]] void malformed(const std::string& model_id, const std::string& why) {
    throw Error(ErrorCode::MalformedProviderResponse, "malformed provider response for '" + model_id + "': " + why,
                {{"model_id", model_id}});
}

std::optional<double> non_negative(const nlohmann::json& j, const char* key, const std::string& model_id) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) malformed(model_id, std::string(key) + " is not a number");
    double v = it->get<double>();
    if (!std::isfinite(v) || v < 0) malformed(model_id, std::string(key) + " must be a non-negative number");
    return v;
}

ProviderModelMetadata decode_fixture(nlohmann::json doc, const std::string& model_id, const std::string& provider) {
    if (!doc.is_object()) malformed(model_id, "document is not an object");
    if (auto it = doc.find("downloads"); it != doc.end() && !it->is_number_unsigned()) {
        malformed(model_id, "downloads must be a non-negative integer");
    }
    non_negative(doc, "model_size_mb", model_id);
    non_negative(doc, "dataset_size_mb", model_id);
    doc["model_id"] = model_id;
    doc["provider_id"] = provider;
    try {
        auto meta = doc.get<ProviderModelMetadata>();
        meta.fetched_at = now();
        return meta;
    } catch (const nlohmann::json::exception& e) {
        malformed(model_id, e.what());
    } catch (const Error& e) {
        malformed(model_id, e.what());
    }
}

bool is_retryable(int status) {
    return status == 429 || status >= 500;
}

// "<https://host/api/models?cursor=x>; rel="next"" -> "/api/models?cursor=x"
std::optional<std::string> next_link(const std::string& header) {
    std::size_t pos = 0;
    while (pos < header.size()) {
        auto open = header.find('<', pos);
        if (open == std::string::npos) break;
        auto close = header.find('>', open);
        if (close == std::string::npos) break;
        auto end = header.find(',', close);
        auto params = header.substr(close + 1, end == std::string::npos ? std::string::npos : end - close - 1);
        if (params.find("rel=\"next\"") != std::string::npos || params.find("rel=next") != std::string::npos) {
            auto url = header.substr(open + 1, close - open - 1);
            if (auto scheme = url.find("://"); scheme != std::string::npos) {
                auto path = url.find('/', scheme + 3);
                url = path == std::string::npos ? "/" : url.substr(path);
            }
            return url;
        }
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return std::nullopt;
}

bool is_weight_file(const std::string& name) {
    static const std::vector<std::string> exts{".safetensors", ".bin", ".pt", ".pth", ".ckpt",
                                               ".h5",          ".onnx", ".msgpack", ".gguf"};
    auto n = lower(name);
    return std::any_of(exts.begin(), exts.end(), [&](const std::string& e) {
        return n.size() > e.size() && n.compare(n.size() - e.size(), e.size(), e) == 0;
    });
}

}  // namespace

// --- fixtures ---------------------------------------------------------------

FixtureAdapter::FixtureAdapter(std::filesystem::path dir, std::string provider_id)
    : dir_(std::move(dir)), provider_id_(std::move(provider_id)) {
    if (!std::filesystem::is_directory(dir_)) {
        throw Error(ErrorCode::InvalidArgument, "fixture directory '" + dir_.string() + "' does not exist");
    }
}

std::string FixtureAdapter::id_from_stem(const std::string& stem) {
    std::string out;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        if (stem.compare(i, 2, "__") == 0) {
            out += '/';
            ++i;
        } else {
            out += stem[i];
        }
    }
    return out;
}

std::string FixtureAdapter::stem_from_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (c == '/') out += "__";
        else out += c;
    }
    return out;
}

ModelIdPage FixtureAdapter::list_model_ids(int page, int page_size) {
    std::vector<std::string> all;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            all.push_back(id_from_stem(entry.path().stem().string()));
        }
    }
    if (ec) {
        throw Error(ErrorCode::ProviderUnavailable, "cannot list fixtures: " + ec.message());
    }
    std::sort(all.begin(), all.end());
    ModelIdPage out;
    auto start = static_cast<std::size_t>(std::max(page - 1, 0)) * static_cast<std::size_t>(page_size);
    for (auto i = start; i < all.size() && i < start + page_size; ++i) out.ids.push_back(all[i]);
    out.has_more = start + page_size < all.size();
    return out;
}

ProviderModelMetadata FixtureAdapter::fetch_model(const std::string& model_id) {
    auto path = dir_ / (stem_from_id(model_id) + ".json");
    if (!std::filesystem::is_regular_file(path)) {
        throw Error(ErrorCode::ModelNotFound, "model '" + model_id + "' not found", {{"model_id", model_id}});
    }
    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) malformed(model_id, "invalid JSON");
    return decode_fixture(std::move(doc), model_id, provider_id_);
}

// --- Hugging Face -----------------------------------------------------------

HuggingFaceAdapter::HuggingFaceAdapter(HubClientOptions options) : options_(std::move(options)) {
    base_url_ = options_.base_url;
    if (base_url_.empty()) {
        const char* env = std::getenv("ECOLABEL_HF_BASE_URL");
        base_url_ = env && *env ? env : "https://huggingface.co";
    }
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HuggingFaceAdapter::Response HuggingFaceAdapter::get(const std::string& path_and_query) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_follow_location(true);

    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        auto wait = last_request_ + options_.min_request_interval - std::chrono::steady_clock::now();
        if (wait > std::chrono::steady_clock::duration::zero()) std::this_thread::sleep_for(wait);
        last_request_ = std::chrono::steady_clock::now();

        auto res = client.Get(path_and_query);
        if (res && !is_retryable(res->status)) {
            return Response{res->status, res->body, res->get_header_value("Link")};
        }
        last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        if (attempt < options_.max_attempts) {
            std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
        }
    }
    throw Error(ErrorCode::ProviderUnavailable, "provider request " + path_and_query + " failed: " + last_error,
                {{"attempts", options_.max_attempts}});
}

ModelIdPage HuggingFaceAdapter::list_model_ids(int page, int page_size) {
    std::lock_guard lock(mutex_);
    if (page_size != cursor_page_size_ || cursors_.empty()) {
        cursors_ = {"/api/models?sort=downloads&direction=-1&limit=" + std::to_string(page_size)};
        cursor_page_size_ = page_size;
    }
    // walk forward from the last known cursor to the requested page
    ModelIdPage out;
    for (int p = std::min(page, static_cast<int>(cursors_.size())); p <= page; ++p) {
        if (static_cast<std::size_t>(p) > cursors_.size()) return {};
        auto res = get(cursors_[p - 1]);
        if (res.status != 200) {
            throw Error(ErrorCode::ProviderUnavailable, "model list returned HTTP " + std::to_string(res.status));
        }
        auto next = next_link(res.link);
        if (next && cursors_.size() == static_cast<std::size_t>(p)) cursors_.push_back(*next);
        if (p < page) continue;

        auto doc = nlohmann::json::parse(res.body, nullptr, false);
        if (!doc.is_array()) malformed("(list)", "model list is not an array");
        for (const auto& item : doc) {
            if (!item.is_object()) malformed("(list)", "model list entry is not an object");
            auto id = item.contains("id") ? item["id"] : item.value("modelId", nlohmann::json());
            if (!id.is_string()) malformed("(list)", "model list entry without id");
            out.ids.push_back(id.get<std::string>());
        }
        out.has_more = next.has_value();
    }
    return out;
}

ProviderModelMetadata HuggingFaceAdapter::fetch_model(const std::string& model_id) {
    std::lock_guard lock(mutex_);
    auto res = get("/api/models/" + model_id + "?blobs=true");
    if (res.status == 404 || res.status == 401) {
        // the hub answers 401 for ids that do not exist publicly
        throw Error(ErrorCode::ModelNotFound, "model '" + model_id + "' not found", {{"model_id", model_id}});
    }
    if (res.status != 200) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "model '" + model_id + "' returned HTTP " + std::to_string(res.status));
    }
    auto doc = nlohmann::json::parse(res.body, nullptr, false);
    if (doc.is_discarded()) malformed(model_id, "invalid JSON");
    auto meta = parse_hub_model(doc, provider_id());
    if (meta.model_id.empty()) meta.model_id = model_id;
    return meta;
}

std::optional<double> weight_files_mb(const nlohmann::json& siblings) {
    if (!siblings.is_array()) return std::nullopt;
    // Repos often ship the same weights in several formats; count safetensors
    // alone when present.
    double safetensors = 0, other = 0;
    bool any_safetensors = false, any_other = false;
    for (const auto& s : siblings) {
        if (!s.is_object() || !s.contains("size") || !s["size"].is_number()) continue;
        auto name = s.value("rfilename", std::string());
        if (!is_weight_file(name)) continue;
        double size = s["size"].get<double>();
        if (lower(name).ends_with(".safetensors")) {
            safetensors += size;
            any_safetensors = true;
        } else {
            other += size;
            any_other = true;
        }
    }
    if (!any_safetensors && !any_other) return std::nullopt;
    return (any_safetensors ? safetensors : other) / (1024.0 * 1024.0);
}

ProviderModelMetadata parse_hub_model(const nlohmann::json& doc, const std::string& provider_id) {
    std::string id = doc.is_object() ? doc.value("id", doc.value("modelId", std::string())) : std::string();
    if (!doc.is_object()) malformed(id, "document is not an object");
    ProviderModelMetadata meta;
    meta.provider_id = provider_id;
    meta.model_id = id;
    meta.fetched_at = now();
    try {
        if (auto it = doc.find("downloads"); it != doc.end() && !it->is_null()) {
            if (!it->is_number_unsigned()) malformed(id, "downloads must be a non-negative integer");
            meta.downloads = it->get<std::uint64_t>();
        }
        if (auto it = doc.find("tags"); it != doc.end() && it->is_array()) {
            for (const auto& t : *it) {
                if (t.is_string()) meta.tags.push_back(t.get<std::string>());
            }
        }
        meta.description = doc.value("pipeline_tag", std::string());

        const auto card = doc.value("cardData", nlohmann::json::object());
        meta.model_size_mb = non_negative(card, "model_size_mb", id);
        if (!meta.model_size_mb) meta.model_size_mb = weight_files_mb(doc.value("siblings", nlohmann::json()));
        meta.dataset_size_mb = non_negative(card, "dataset_size_mb", id);

        if (auto co2 = card.find("co2_eq_emissions"); co2 != card.end() && co2->is_object()) {
            if (auto hw = co2->find("hardware_used"); hw != co2->end() && hw->is_string()) {
                meta.hardware = hw->get<std::string>();
            }
        }
        // model-index: [{results: [{metrics: [{type, value}]}]}]; first value per name wins
        for (const auto& entry : card.value("model-index", nlohmann::json::array())) {
            for (const auto& result : entry.value("results", nlohmann::json::array())) {
                for (const auto& m : result.value("metrics", nlohmann::json::array())) {
                    if (!m.is_object() || !m.contains("value") || !m["value"].is_number()) continue;
                    auto name = m.value("type", m.value("name", std::string()));
                    double v = m["value"].get<double>();
                    if (name.empty() || !std::isfinite(v)) continue;
                    meta.evaluation_metrics.emplace(name, v);
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        malformed(id, e.what());
    }
    return meta;
}

// --- sync -------------------------------------------------------------------

PhaseReport metadata_to_report(const ProviderModelMetadata& meta, Phase phase) {
    PhaseReport r;
    r.model_id = meta.model_id;
    r.phase = phase;
    r.provenance = Provenance::Provider;
    r.collected_at = meta.fetched_at;
    // zero downloads reads as "not reported", so empty metadata stays empty
    if (meta.downloads > 0) r.raw_values["downloads"] = static_cast<double>(meta.downloads);
    if (meta.model_size_mb) r.raw_values["model_size_mb"] = *meta.model_size_mb;
    if (meta.dataset_size_mb) r.raw_values["dataset_size_mb"] = *meta.dataset_size_mb;
    for (const auto& [name, value] : meta.evaluation_metrics) {
        auto key = lower(name);
        if (std::find(kPerformanceSources.begin(), kPerformanceSources.end(), key) == kPerformanceSources.end()) {
            continue;
        }
        if (!std::isfinite(value) || value < 0) continue;
        r.raw_values.emplace(key, value);
    }
    return r;
}

SyncRun sync_provider(ProviderAdapter& adapter, Repository& repo, const EfficiencyConfig& config,
                      std::span<const RecommendationEntry> catalog, const SyncOptions& options) {
    if (options.page_size < 1) throw Error(ErrorCode::InvalidArgument, "page_size must be >= 1");
    if (options.limit && *options.limit < 0) throw Error(ErrorCode::InvalidArgument, "limit must be >= 0");

    SyncRun run;
    run.run_id = generate_id();
    run.provider_id = adapter.provider_id();
    run.started_at = now();

    int remaining = options.limit.value_or(std::numeric_limits<int>::max());
    for (int page = 1; remaining > 0; ++page) {
        ModelIdPage ids;
        try {
            ids = adapter.list_model_ids(page, std::min(options.page_size, remaining));
        } catch (const Error& e) {
            if (page == 1) {
                throw Error(ErrorCode::ProviderUnavailable,
                            "provider '" + run.provider_id + "' is unavailable: " + e.what());
            }
            run.warnings.push_back("listing stopped at page " + std::to_string(page) + ": " + e.what());
            break;
        }
        for (const auto& model_id : ids.ids) {
            if (remaining == 0) break;
            --remaining;
            try {
                auto meta = adapter.fetch_model(model_id);
                meta.provider_id = run.provider_id;
                auto outcome = repo.upsert_model(make_model_record(meta));
                switch (outcome) {
                    case UpsertOutcome::Created: ++run.created; break;
                    case UpsertOutcome::Updated: ++run.updated; break;
                    case UpsertOutcome::Unchanged: ++run.unchanged; continue;
                }
                auto report = metadata_to_report(meta, config.phase);
                try {
                    auto label = compute_label(report, config, catalog);
                    label.provider_id = run.provider_id;
                    repo.save_label(label, report);
                    ++run.labels_created;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NoRatableMetrics) throw;
                    run.warnings.push_back("no label for '" + model_id + "': no ratable metrics");
                }
            } catch (const Error& e) {
                run.failed.push_back({model_id, std::string(error_slug(e.code())), e.what()});
            }
        }
        if (!ids.has_more || ids.ids.empty()) break;
    }
    run.finished_at = now();
    repo.store().append_sync_run(run);
    return run;
}

// --- registry ---------------------------------------------------------------

void ProviderRegistry::add(std::unique_ptr<ProviderAdapter> adapter) {
    auto id = adapter->provider_id();
    if (adapters_.count(id)) {
        throw Error(ErrorCode::InvalidArgument, "provider '" + id + "' is already registered");
    }
    adapters_.emplace(id, std::move(adapter));
}

bool ProviderRegistry::contains(const std::string& provider_id) const {
    return adapters_.count(provider_id) > 0;
}

ProviderAdapter& ProviderRegistry::get(const std::string& provider_id) const {
    auto it = adapters_.find(provider_id);
    if (it == adapters_.end()) {
        throw Error(ErrorCode::UnknownProvider, "unknown provider '" + provider_id + "'",
                    {{"provider_id", provider_id}});
    }
    return *it->second;
}

std::vector<std::string> ProviderRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, a] : adapters_) out.push_back(id);
    return out;
}

SyncRun ProviderRegistry::run_sync(const std::string& provider_id, Repository& repo, const EfficiencyConfig& config,
                                   std::span<const RecommendationEntry> catalog, const SyncOptions& options) {
    auto& adapter = get(provider_id);
    {
        std::lock_guard lock(running_mutex_);
        if (!running_.insert(provider_id).second) {
            throw Error(ErrorCode::SyncAlreadyRunning, "a sync for '" + provider_id + "' is already running",
                        {{"provider_id", provider_id}});
        }
    }
    struct Release {
        ProviderRegistry& self;
        const std::string& id;
        ~Release() {
            std::lock_guard lock(self.running_mutex_);
            self.running_.erase(id);
        }
    } release{*this, provider_id};
    return sync_provider(adapter, repo, config, catalog, options);
}

}  // namespace ecolabel
