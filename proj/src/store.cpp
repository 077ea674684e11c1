#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecolabel/codec.hpp"
#include "ecolabel/repository.hpp"

namespace ecolabel {

namespace {

constexpr std::string_view kFormatName = "ecolabel-store";

template <typename T>
Page<T> paginate(std::vector<T> all, PageRequest req) {
    Page<T> page;
    page.total = all.size();
    page.page = req.page;
    page.page_size = req.page_size;
    std::size_t start = static_cast<std::size_t>(req.page - 1) * static_cast<std::size_t>(req.page_size);
    if (start < all.size()) {
        std::size_t end = std::min(all.size(), start + static_cast<std::size_t>(req.page_size));
        page.items.assign(std::make_move_iterator(all.begin() + start), std::make_move_iterator(all.begin() + end));
    }
    return page;
}

[[noreturn]] void storage_failure(const std::string& what) {
    throw Error(ErrorCode::StorageFailure, what);
}

std::string errno_text() {
    return std::strerror(errno);
}

// Format 1 stored bare label objects (no provider, no reports, no insertion
// sequence) and had no sync history.
nlohmann::json migrate_v1(const nlohmann::json& doc) {
    nlohmann::json out = doc;
    const auto legacy = doc.value("labels", nlohmann::json::array());
    std::vector<nlohmann::json> labels(legacy.begin(), legacy.end());
    std::stable_sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
        return a.at("created_at").template get<std::string>() < b.at("created_at").template get<std::string>();
    });
    auto wrapped = nlohmann::json::array();
    std::uint64_t seq = 1;
    for (auto& l : labels) {
        if (!l.contains("provider_id")) {
            l["provider_id"] = kLocalProvider;
        }
        wrapped.push_back({{"label", l}, {"report", nullptr}, {"seq", seq++}});
    }
    out["labels"] = wrapped;
    out["next_seq"] = seq;
    out["sync_runs"] = nlohmann::json::array();
    out["format_version"] = 2;
    return out;
}

}  // namespace

void PageRequest::validate() const {
    if (page < 1) {
        throw Error(ErrorCode::InvalidArgument, "page must be >= 1");
    }
    if (page_size < 1 || page_size > kMaxPageSize) {
        throw Error(ErrorCode::InvalidArgument, "page_size must be in [1, 500]");
    }
}

bool LabelFilter::matches(const EnergyLabel& label) const {
    return (!model_id || label.model_id == *model_id) && (!provider_id || label.provider_id == *provider_id) &&
           (!phase || label.phase == *phase) && (!grade || label.overall_grade == *grade);
}

nlohmann::json state_to_json(const StoreState& state) {
    auto models = nlohmann::json::array();
    for (const auto& [k, m] : state.models) models.push_back(m);
    auto labels = nlohmann::json::array();
    for (const auto& [id, l] : state.labels) {
        labels.push_back({{"label", l.label},
                          {"report", l.report ? nlohmann::json(*l.report) : nlohmann::json(nullptr)},
                          {"seq", l.seq}});
    }
    auto configs = nlohmann::json::array();
    for (const auto& [phase, versions] : state.configs) {
        for (const auto& [v, c] : versions) configs.push_back(c);
    }
    return {{"format", kFormatName},
            {"format_version", kStoreFormatVersion},
            {"models", models},
            {"labels", labels},
            {"configs", configs},
            {"sync_runs", state.sync_runs},
            {"next_seq", state.next_seq}};
}

StoreState state_from_json(const nlohmann::json& input) {
    if (!input.is_object() || input.value("format", std::string()) != kFormatName) {
        storage_failure("not an ecolabel store document");
    }
    int version = input.value("format_version", 0);
    if (version > kStoreFormatVersion) {
        storage_failure("store format version " + std::to_string(version) + " is newer than supported (" +
                        std::to_string(kStoreFormatVersion) + ")");
    }
    nlohmann::json doc = input;
    if (version == 1) {
        doc = migrate_v1(doc);
    } else if (version != kStoreFormatVersion) {
        storage_failure("unknown store format version " + std::to_string(version));
    }

    try {
        StoreState state;
        for (const auto& m : doc.at("models")) {
            auto rec = m.get<ModelRecord>();
            state.models[rec.key.str()] = rec;
        }
        for (const auto& l : doc.at("labels")) {
            StoredLabel stored;
            stored.label = l.at("label").get<EnergyLabel>();
            if (!l.at("report").is_null()) stored.report = l.at("report").get<PhaseReport>();
            stored.seq = l.at("seq").get<std::uint64_t>();
            state.labels[stored.label.label_id] = std::move(stored);
        }
        for (const auto& c : doc.at("configs")) {
            auto config = c.get<EfficiencyConfig>();
            state.configs[config.phase][config.version] = config;
        }
        state.sync_runs = doc.at("sync_runs").get<std::vector<SyncRun>>();
        state.next_seq = doc.at("next_seq").get<std::uint64_t>();
        return state;
    } catch (const nlohmann::json::exception& e) {
        storage_failure(std::string("corrupt store document: ") + e.what());
    } catch (const Error& e) {
        storage_failure(std::string("corrupt store document: ") + e.what());
    }
}

// --- StateStore -------------------------------------------------------------

template <typename Fn>
auto StateStore::mutate(Fn&& fn) {
    std::unique_lock lock(mutex_);
    StoreState next = state_;
    if constexpr (std::is_void_v<decltype(fn(next))>) {
        fn(next);
        commit(next);
        state_ = std::move(next);
    } else {
        auto result = fn(next);
        commit(next);
        state_ = std::move(next);
        return result;
    }
}

void StateStore::put_model(const ModelRecord& record) {
    mutate([&](StoreState& s) { s.models[record.key.str()] = record; });
}

std::optional<ModelRecord> StateStore::get_model(const ModelKey& key) const {
    std::shared_lock lock(mutex_);
    auto it = state_.models.find(key.str());
    if (it == state_.models.end()) return std::nullopt;
    return it->second;
}

bool StateStore::delete_model(const ModelKey& key) {
    {
        std::shared_lock lock(mutex_);
        if (!state_.models.count(key.str())) return false;
    }
    return mutate([&](StoreState& s) {
        bool erased = s.models.erase(key.str()) > 0;
        std::erase_if(s.labels, [&](const auto& entry) {
            const auto& l = entry.second.label;
            return l.provider_id == key.provider_id && l.model_id == key.model_id;
        });
        return erased;
    });
}

Page<ModelRecord> StateStore::list_models(const ModelFilter& filter, PageRequest page) const {
    page.validate();
    std::vector<ModelRecord> matched;
    {
        std::shared_lock lock(mutex_);
        for (const auto& [k, m] : state_.models) {
            if (!filter.provider_id || m.key.provider_id == *filter.provider_id) matched.push_back(m);
        }
    }
    std::stable_sort(matched.begin(), matched.end(), [](const ModelRecord& a, const ModelRecord& b) {
        if (a.updated_at != b.updated_at) return a.updated_at > b.updated_at;
        return a.key.str() < b.key.str();
    });
    return paginate(std::move(matched), page);
}

void StateStore::append_label(const EnergyLabel& label, const std::optional<PhaseReport>& report) {
    mutate([&](StoreState& s) {
        if (s.labels.count(label.label_id)) {
            throw Error(ErrorCode::StorageFailure, "label id '" + label.label_id + "' already stored");
        }
        s.labels[label.label_id] = StoredLabel{label, report, s.next_seq++};
    });
}

std::optional<EnergyLabel> StateStore::get_label(const std::string& label_id) const {
    std::shared_lock lock(mutex_);
    auto it = state_.labels.find(label_id);
    if (it == state_.labels.end()) return std::nullopt;
    return it->second.label;
}

std::optional<PhaseReport> StateStore::get_report(const std::string& label_id) const {
    std::shared_lock lock(mutex_);
    auto it = state_.labels.find(label_id);
    if (it == state_.labels.end()) return std::nullopt;
    return it->second.report;
}

Page<EnergyLabel> StateStore::list_labels(const LabelFilter& filter, PageRequest page) const {
    page.validate();
    std::vector<const StoredLabel*> matched;
    std::shared_lock lock(mutex_);
    for (const auto& [id, l] : state_.labels) {
        if (filter.matches(l.label)) matched.push_back(&l);
    }
    std::sort(matched.begin(), matched.end(), [](const StoredLabel* a, const StoredLabel* b) {
        if (a->label.created_at != b->label.created_at) return a->label.created_at > b->label.created_at;
        return a->seq > b->seq;
    });
    std::vector<EnergyLabel> labels;
    labels.reserve(matched.size());
    for (const auto* l : matched) labels.push_back(l->label);
    return paginate(std::move(labels), page);
}

std::vector<PhaseReport> StateStore::list_reports(Phase phase) const {
    std::shared_lock lock(mutex_);
    std::vector<const StoredLabel*> matched;
    for (const auto& [id, l] : state_.labels) {
        if (l.report && l.report->phase == phase) matched.push_back(&l);
    }
    std::sort(matched.begin(), matched.end(), [](const auto* a, const auto* b) { return a->seq < b->seq; });
    std::vector<PhaseReport> out;
    for (const auto* l : matched) out.push_back(*l->report);
    return out;
}

int StateStore::append_config(const EfficiencyConfig& config) {
    return mutate([&](StoreState& s) {
        auto& versions = s.configs[config.phase];
        int version = versions.empty() ? 1 : versions.rbegin()->first + 1;
        EfficiencyConfig stored = config;
        stored.version = version;
        versions[version] = std::move(stored);
        return version;
    });
}

std::optional<EfficiencyConfig> StateStore::get_config(Phase phase, int version) const {
    std::shared_lock lock(mutex_);
    auto p = state_.configs.find(phase);
    if (p == state_.configs.end()) return std::nullopt;
    auto it = p->second.find(version);
    if (it == p->second.end()) return std::nullopt;
    return it->second;
}

std::optional<EfficiencyConfig> StateStore::latest_config(Phase phase) const {
    std::shared_lock lock(mutex_);
    auto p = state_.configs.find(phase);
    if (p == state_.configs.end() || p->second.empty()) return std::nullopt;
    return p->second.rbegin()->second;
}

std::vector<int> StateStore::config_versions(Phase phase) const {
    std::shared_lock lock(mutex_);
    std::vector<int> out;
    auto p = state_.configs.find(phase);
    if (p != state_.configs.end()) {
        for (const auto& [v, c] : p->second) out.push_back(v);
    }
    return out;
}

void StateStore::append_sync_run(const SyncRun& run) {
    mutate([&](StoreState& s) { s.sync_runs.push_back(run); });
}

std::vector<SyncRun> StateStore::list_sync_runs(const std::optional<std::string>& provider_id) const {
    std::shared_lock lock(mutex_);
    std::vector<SyncRun> out;
    for (auto it = state_.sync_runs.rbegin(); it != state_.sync_runs.rend(); ++it) {
        if (!provider_id || it->provider_id == *provider_id) out.push_back(*it);
    }
    return out;
}

std::string StateStore::content_hash() const {
    std::shared_lock lock(mutex_);
    auto doc = state_to_json(state_);
    doc.erase("sync_runs");
    return sha256_hex(doc.dump());
}

// --- FileStore --------------------------------------------------------------

FileStore::FileStore(std::filesystem::path path, FileStoreOptions options)
    : StateStore(load(path)), path_(std::move(path)), options_(options) {
    std::error_code ec;
    std::filesystem::remove(path_.string() + ".tmp", ec);
    if (!std::filesystem::exists(path_)) {
        StoreState empty;
        commit(empty);
    }
}

StoreState FileStore::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        return StoreState{};
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        storage_failure("cannot open store '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        storage_failure("store '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return state_from_json(doc);
}

void FileStore::commit(StoreState& next) {
    const std::string bytes = state_to_json(next).dump();
    const std::string tmp = path_.string() + ".tmp";

    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
        storage_failure("cannot create '" + tmp + "': " + errno_text());
    }
    std::size_t limit = bytes.size();
    if (options_.fail_after_bytes) {
        limit = std::min(limit, *options_.fail_after_bytes);
    }
    std::size_t written = 0;
    while (written < limit) {
        ssize_t n = ::write(fd, bytes.data() + written, limit - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            storage_failure("write to '" + tmp + "' failed: " + errno_text());
        }
        written += static_cast<std::size_t>(n);
    }
    if (options_.fail_after_bytes) {
        ::close(fd);
        storage_failure("injected failure after " + std::to_string(written) + " bytes");
    }
    if (options_.fsync && ::fsync(fd) != 0) {
        ::close(fd);
        storage_failure("fsync of '" + tmp + "' failed: " + errno_text());
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path_.c_str()) != 0) {
        storage_failure("rename to '" + path_.string() + "' failed: " + errno_text());
    }
    if (options_.fsync) {
        auto dir = path_.parent_path().empty() ? std::filesystem::path(".") : path_.parent_path();
        int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
        if (dfd >= 0) {
            ::fsync(dfd);
            ::close(dfd);
        }
    }
}

std::unique_ptr<Store> open_store(const std::string& location) {
    if (location == ":memory:") {
        return std::make_unique<MemoryStore>();
    }
    return std::make_unique<FileStore>(location);
}

}  // namespace ecolabel
