#include "ecolabel/repository.hpp"

#include "ecolabel/codec.hpp"
#include "ecolabel/defaults.hpp"

namespace ecolabel {

std::string_view to_string(UpsertOutcome outcome) {
    switch (outcome) {
        case UpsertOutcome::Created: return "created";
        case UpsertOutcome::Updated: return "updated";
        case UpsertOutcome::Unchanged: return "unchanged";
    }
    return "unchanged";
}

Repository::Repository(Store& store, RepositoryOptions options) : store_(store), options_(options) {}

void Repository::ensure_default_configs() {
    for (auto phase : {Phase::Training, Phase::Inference}) {
        if (!store_.latest_config(phase)) {
            save_config(default_config(phase));
        }
    }
}

UpsertOutcome Repository::upsert_model(ModelRecord record) {
    if (record.key.model_id.empty()) {
        throw Error(ErrorCode::InvalidArgument, "model id must be non-empty");
    }
    std::lock_guard lock(write_mutex_);
    auto existing = store_.get_model(record.key);
    if (existing && existing->content_hash == record.content_hash) {
        return UpsertOutcome::Unchanged;
    }
    auto stamp = now();
    record.updated_at = stamp;
    record.created_at = existing ? existing->created_at : stamp;
    store_.put_model(record);
    return existing ? UpsertOutcome::Updated : UpsertOutcome::Created;
}

std::string Repository::save_label(const EnergyLabel& label, const std::optional<PhaseReport>& report) {
    std::lock_guard lock(write_mutex_);
    ModelKey key{label.provider_id, label.model_id};
    if (!store_.get_model(key)) {
        if (!options_.auto_stub) {
            throw Error(ErrorCode::NotFound, "model '" + key.str() + "' is not registered");
        }
        auto stub = make_local_stub(key);
        stub.created_at = stub.updated_at = now();
        store_.put_model(stub);
    }
    store_.append_label(label, report);
    return label.label_id;
}

int Repository::save_config(EfficiencyConfig config) {
    if (auto violations = validate_config(config); !violations.empty()) {
        throw Error(ErrorCode::InvalidConfig, "efficiency config is invalid", nlohmann::json(violations));
    }
    config.created_at = now();
    std::lock_guard lock(write_mutex_);
    return store_.append_config(config);
}

EfficiencyConfig Repository::current_config(Phase phase) const {
    auto config = store_.latest_config(phase);
    if (!config) {
        throw Error(ErrorCode::NotFound, "no config stored for phase '" + std::string(to_string(phase)) + "'");
    }
    return *config;
}

Page<EnergyLabel> Repository::query_labels(const LabelFilter& filter, PageRequest page) const {
    page.validate();
    return store_.list_labels(filter, page);
}

Page<ModelRecord> Repository::query_models(const ModelFilter& filter, const std::optional<std::string>& grade,
                                           const std::optional<Phase>& phase, PageRequest page) const {
    page.validate();
    if (!grade && !phase) {
        return store_.list_models(filter, page);
    }
    std::vector<ModelRecord> all;
    for (int p = 1;; ++p) {
        auto chunk = store_.list_models(filter, PageRequest{p, kMaxPageSize});
        all.insert(all.end(), chunk.items.begin(), chunk.items.end());
        if (chunk.items.size() < static_cast<std::size_t>(kMaxPageSize)) break;
    }
    std::vector<ModelRecord> kept;
    for (auto& m : all) {
        LabelFilter lf;
        lf.model_id = m.key.model_id;
        lf.provider_id = m.key.provider_id;
        lf.phase = phase;
        auto newest = store_.list_labels(lf, PageRequest{1, 1});
        if (newest.items.empty()) continue;
        if (grade && newest.items.front().overall_grade != *grade) continue;
        kept.push_back(std::move(m));
    }
    Page<ModelRecord> out;
    out.total = kept.size();
    out.page = page.page;
    out.page_size = page.page_size;
    std::size_t start = static_cast<std::size_t>(page.page - 1) * page.page_size;
    for (std::size_t i = start; i < kept.size() && i < start + page.page_size; ++i) {
        out.items.push_back(kept[i]);
    }
    return out;
}

bool Repository::delete_model(const ModelKey& key) {
    std::lock_guard lock(write_mutex_);
    return store_.delete_model(key);
}

}  // namespace ecolabel
