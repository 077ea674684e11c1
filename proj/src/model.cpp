#include "ecolabel/model.hpp"

#include <openssl/evp.h>

#include <cstdio>

#include "ecolabel/codec.hpp"

namespace ecolabel {

std::string ModelKey::str() const {
    return provider_id + ":" + model_id;
}

ModelKey ModelKey::parse(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        return ModelKey{std::string(kLocalProvider), std::string(text)};
    }
    return ModelKey{std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::StorageFailure, "SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string metadata_content_hash(const ProviderModelMetadata& metadata) {
    nlohmann::json j = metadata;
    j.erase("fetched_at");
    return sha256_hex(j.dump());
}

ModelRecord make_model_record(ProviderModelMetadata metadata) {
    ModelRecord r;
    r.key = ModelKey{metadata.provider_id, metadata.model_id};
    r.display_name = metadata.model_id;
    r.content_hash = metadata_content_hash(metadata);
    r.metadata = std::move(metadata);
    return r;
}

ModelRecord make_local_stub(const ModelKey& key) {
    ProviderModelMetadata meta;
    meta.provider_id = key.provider_id;
    meta.model_id = key.model_id;
    return make_model_record(std::move(meta));
}

void to_json(nlohmann::json& j, const ProviderModelMetadata& m) {
    j = {{"provider_id", m.provider_id},
         {"model_id", m.model_id},
         {"downloads", m.downloads},
         {"model_size_mb", m.model_size_mb ? nlohmann::json(*m.model_size_mb) : nlohmann::json(nullptr)},
         {"dataset_size_mb", m.dataset_size_mb ? nlohmann::json(*m.dataset_size_mb) : nlohmann::json(nullptr)},
         {"evaluation_metrics", m.evaluation_metrics},
         {"tags", m.tags},
         {"description", m.description},
         {"hardware", m.hardware ? nlohmann::json(*m.hardware) : nlohmann::json(nullptr)},
         {"fetched_at", timestamp_json(m.fetched_at)}};
}

void from_json(const nlohmann::json& j, ProviderModelMetadata& m) {
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "metadata must be an object");
    }
    m.provider_id = j.value("provider_id", std::string());
    m.model_id = j.at("model_id").get<std::string>();
    m.downloads = j.value("downloads", std::uint64_t{0});
    auto opt_double = [&](const char* key) -> std::optional<double> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        return it->get<double>();
    };
    m.model_size_mb = opt_double("model_size_mb");
    m.dataset_size_mb = opt_double("dataset_size_mb");
    m.evaluation_metrics = j.value("evaluation_metrics", std::map<std::string, double>{});
    m.tags = j.value("tags", std::vector<std::string>{});
    m.description = j.value("description", std::string());
    if (auto it = j.find("hardware"); it != j.end() && !it->is_null()) {
        m.hardware = it->get<std::string>();
    } else {
        m.hardware.reset();
    }
    m.fetched_at = timestamp_from(j.value("fetched_at", nlohmann::json(nullptr)));
}

void to_json(nlohmann::json& j, const ModelRecord& r) {
    j = {{"id", r.key.str()},
         {"provider_id", r.key.provider_id},
         {"model_id", r.key.model_id},
         {"display_name", r.display_name},
         {"metadata", r.metadata},
         {"content_hash", r.content_hash},
         {"created_at", timestamp_json(r.created_at)},
         {"updated_at", timestamp_json(r.updated_at)}};
}

void from_json(const nlohmann::json& j, ModelRecord& r) {
    r.key = ModelKey{j.at("provider_id").get<std::string>(), j.at("model_id").get<std::string>()};
    r.display_name = j.value("display_name", r.key.model_id);
    r.metadata = j.at("metadata").get<ProviderModelMetadata>();
    r.content_hash = j.at("content_hash").get<std::string>();
    r.created_at = timestamp_from(j.at("created_at"));
    r.updated_at = timestamp_from(j.at("updated_at"));
}

void to_json(nlohmann::json& j, const SyncRun& run) {
    auto failed = nlohmann::json::array();
    for (const auto& f : run.failed) {
        failed.push_back({{"model_id", f.model_id}, {"code", f.code}, {"message", f.message}});
    }
    j = {{"run_id", run.run_id},
         {"provider_id", run.provider_id},
         {"started_at", timestamp_json(run.started_at)},
         {"finished_at", timestamp_json(run.finished_at)},
         {"created", run.created},
         {"updated", run.updated},
         {"unchanged", run.unchanged},
         {"labels_created", run.labels_created},
         {"failed", failed},
         {"warnings", run.warnings}};
}

void from_json(const nlohmann::json& j, SyncRun& run) {
    run.run_id = j.at("run_id").get<std::string>();
    run.provider_id = j.at("provider_id").get<std::string>();
    run.started_at = timestamp_from(j.at("started_at"));
    run.finished_at = timestamp_from(j.at("finished_at"));
    run.created = j.at("created").get<int>();
    run.updated = j.at("updated").get<int>();
    run.unchanged = j.at("unchanged").get<int>();
    run.labels_created = j.value("labels_created", 0);
    run.failed.clear();
    for (const auto& f : j.value("failed", nlohmann::json::array())) {
        run.failed.push_back({f.at("model_id").get<std::string>(), f.at("code").get<std::string>(),
                              f.value("message", std::string())});
    }
    run.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace ecolabel
