#pragma once

// Persistence behind a backend-neutral interface.
//
// `Store` is the contract every backend implements: plain put/get/delete/list
// per entity family. `Repository` layers the domain rules on top (upsert by
// content hash, label auto-stubs, config versioning) and serializes composite
// writes, so the rules hold no matter which backend is plugged in.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ecolabel/label_engine.hpp"
#include "ecolabel/model.hpp"

namespace ecolabel {

inline constexpr int kMaxPageSize = 500;

struct PageRequest {
    int page = 1;  // 1-based
    int page_size = 50;

    // Throws InvalidArgument unless page >= 1 and page_size in [1, 500].
    void validate() const;
};

template <typename T>
struct Page {
    std::vector<T> items;
    std::size_t total = 0;
    int page = 1;
    int page_size = 0;
};

struct LabelFilter {
    std::optional<std::string> model_id;
    std::optional<std::string> provider_id;
    std::optional<Phase> phase;
    std::optional<std::string> grade;

    bool matches(const EnergyLabel& label) const;
};

struct ModelFilter {
    std::optional<std::string> provider_id;
};

class Store {
public:
    virtual ~Store() = default;

    virtual void put_model(const ModelRecord& record) = 0;
    virtual std::optional<ModelRecord> get_model(const ModelKey& key) const = 0;
    // Removes the model together with its labels and reports.
    virtual bool delete_model(const ModelKey& key) = 0;
    // Ordered by updated_at desc, then id.
    virtual Page<ModelRecord> list_models(const ModelFilter& filter, PageRequest page) const = 0;

    // Labels are append-only. The optional report is the input that produced it.
    virtual void append_label(const EnergyLabel& label, const std::optional<PhaseReport>& report) = 0;
    virtual std::optional<EnergyLabel> get_label(const std::string& label_id) const = 0;
    virtual std::optional<PhaseReport> get_report(const std::string& label_id) const = 0;
    // Ordered newest first.
    virtual Page<EnergyLabel> list_labels(const LabelFilter& filter, PageRequest page) const = 0;
    virtual std::vector<PhaseReport> list_reports(Phase phase) const = 0;

    // Stores the config under version max(existing)+1 and returns that version.
    virtual int append_config(const EfficiencyConfig& config) = 0;
    virtual std::optional<EfficiencyConfig> get_config(Phase phase, int version) const = 0;
    virtual std::optional<EfficiencyConfig> latest_config(Phase phase) const = 0;
    virtual std::vector<int> config_versions(Phase phase) const = 0;

    virtual void append_sync_run(const SyncRun& run) = 0;
    virtual std::vector<SyncRun> list_sync_runs(const std::optional<std::string>& provider_id) const = 0;

    // Digest of models, labels, reports and configs; equal digests mean equal
    // content. The sync-run log is history, not content, and is left out.
    virtual std::string content_hash() const = 0;
};

// Complete store contents, used by the bundled backends.
struct StoredLabel {
    EnergyLabel label;
    std::optional<PhaseReport> report;
    std::uint64_t seq = 0;
};

struct StoreState {
    std::map<std::string, ModelRecord> models;  // by ModelKey::str()
    std::map<std::string, StoredLabel> labels;  // by label id
    std::map<Phase, std::map<int, EfficiencyConfig>> configs;
    std::vector<SyncRun> sync_runs;
    std::uint64_t next_seq = 1;
};

inline constexpr int kStoreFormatVersion = 2;

nlohmann::json state_to_json(const StoreState& state);
// Accepts any known format version and migrates it to the current one.
StoreState state_from_json(const nlohmann::json& doc);

// Backend over an in-process StoreState. Readers share a lock; each write
// builds the next state and hands it to commit() under the exclusive lock.
class StateStore : public Store {
public:
    void put_model(const ModelRecord& record) override;
    std::optional<ModelRecord> get_model(const ModelKey& key) const override;
    bool delete_model(const ModelKey& key) override;
    Page<ModelRecord> list_models(const ModelFilter& filter, PageRequest page) const override;

    void append_label(const EnergyLabel& label, const std::optional<PhaseReport>& report) override;
    std::optional<EnergyLabel> get_label(const std::string& label_id) const override;
    std::optional<PhaseReport> get_report(const std::string& label_id) const override;
    Page<EnergyLabel> list_labels(const LabelFilter& filter, PageRequest page) const override;
    std::vector<PhaseReport> list_reports(Phase phase) const override;

    int append_config(const EfficiencyConfig& config) override;
    std::optional<EfficiencyConfig> get_config(Phase phase, int version) const override;
    std::optional<EfficiencyConfig> latest_config(Phase phase) const override;
    std::vector<int> config_versions(Phase phase) const override;

    void append_sync_run(const SyncRun& run) override;
    std::vector<SyncRun> list_sync_runs(const std::optional<std::string>& provider_id) const override;

    std::string content_hash() const override;

protected:
    StateStore() = default;
    explicit StateStore(StoreState initial) : state_(std::move(initial)) {}

    // Makes `next` the committed state. Throwing leaves the old state in place.
    virtual void commit(StoreState& next) = 0;

private:
    template <typename Fn>
    auto mutate(Fn&& fn);

    mutable std::shared_mutex mutex_;
    StoreState state_;
};

class MemoryStore final : public StateStore {
public:
    MemoryStore() = default;

protected:
    void commit(StoreState&) override {}
};

struct FileStoreOptions {
    bool fsync = true;
    // Fault injection for tests: abort each commit after writing this many bytes.
    std::optional<std::size_t> fail_after_bytes;
};

// Single JSON document on disk. Commits write a sibling temp file, flush it,
// and rename it over the store, so a crash at any point leaves the last
// committed document intact.
class FileStore final : public StateStore {
public:
    explicit FileStore(std::filesystem::path path, FileStoreOptions options = {});

    const std::filesystem::path& path() const { return path_; }
    void set_options(FileStoreOptions options) { options_ = options; }

protected:
    void commit(StoreState& next) override;

private:
    static StoreState load(const std::filesystem::path& path);

    std::filesystem::path path_;
    FileStoreOptions options_;
};

std::unique_ptr<Store> open_store(const std::string& location);  // ":memory:" or a file path

enum class UpsertOutcome { Created, Updated, Unchanged };
std::string_view to_string(UpsertOutcome outcome);

struct RepositoryOptions {
    bool auto_stub = true;
};

class Repository {
public:
    explicit Repository(Store& store, RepositoryOptions options = {});

    Store& store() { return store_; }
    const Store& store() const { return store_; }

    // Seeds version 1 of each phase with the built-in config when none exists.
    void ensure_default_configs();

    UpsertOutcome upsert_model(ModelRecord record);

    // Appends the label. An unknown model gets a stub record when auto_stub is
    // on, otherwise NotFound is thrown.
    std::string save_label(const EnergyLabel& label, const std::optional<PhaseReport>& report = std::nullopt);

    // Validates (InvalidConfig) and stores as a new version of the config's phase.
    int save_config(EfficiencyConfig config);
    EfficiencyConfig current_config(Phase phase) const;  // NotFound when nothing stored

    Page<EnergyLabel> query_labels(const LabelFilter& filter, PageRequest page) const;

    // Models list; a grade/phase filter keeps models whose newest label
    // (for the phase, when given) has that grade.
    Page<ModelRecord> query_models(const ModelFilter& filter, const std::optional<std::string>& grade,
                                   const std::optional<Phase>& phase, PageRequest page) const;

    bool delete_model(const ModelKey& key);

private:
    Store& store_;
    RepositoryOptions options_;
    std::mutex write_mutex_;
};

}  // namespace ecolabel
