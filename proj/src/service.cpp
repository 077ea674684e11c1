#include "ecolabel/service.hpp"

#include <algorithm>
#include <cmath>

#include "ecolabel/codec.hpp"

namespace ecolabel {

namespace {

[[noreturn]] void bad_patch(const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, "config patch: " + what);
}

double number_at(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number()) bad_patch(where + " must be a number");
    return j.get<double>();
}

std::vector<double> numbers_at(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) bad_patch(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(number_at(v, where));
    return out;
}

MetricDefinition& metric_at(EfficiencyConfig& config, const std::string& id, const char* key) {
    auto it = std::find_if(config.metrics.begin(), config.metrics.end(), [&](auto& m) { return m.id == id; });
    if (it == config.metrics.end()) bad_patch(std::string(key) + ": unknown metric '" + id + "'");
    return *it;
}

template <typename Fn>
void for_each_entry(const nlohmann::json& patch, const char* key, EfficiencyConfig& config, Fn&& fn) {
    auto it = patch.find(key);
    if (it == patch.end()) return;
    if (!it->is_object()) bad_patch(std::string(key) + " must be an object keyed by metric id");
    for (const auto& [id, value] : it->items()) {
        fn(metric_at(config, id, key), value, std::string(key) + "." + id);
    }
}

}  // namespace

EfficiencyConfig apply_config_patch(EfficiencyConfig config, const nlohmann::json& patch) {
    static const std::vector<std::string> known{"weights",      "references",     "boundaries",
                                                "all_boundaries", "scale",        "directions",
                                                "add_metrics",  "remove_metrics", "carbon_intensity"};
    if (!patch.is_object()) bad_patch("body must be a JSON object");
    for (const auto& [key, value] : patch.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) bad_patch("unknown key '" + key + "'");
    }

    if (auto it = patch.find("remove_metrics"); it != patch.end()) {
        if (!it->is_array()) bad_patch("remove_metrics must be an array of metric ids");
        for (const auto& id : *it) {
            if (!id.is_string()) bad_patch("remove_metrics must be an array of metric ids");
            metric_at(config, id.get<std::string>(), "remove_metrics");
            std::erase_if(config.metrics, [&](auto& m) { return m.id == id.get<std::string>(); });
        }
    }
    if (auto it = patch.find("add_metrics"); it != patch.end()) {
        if (!it->is_array()) bad_patch("add_metrics must be an array of metric definitions");
        for (const auto& m : *it) {
            auto metric = decode<MetricDefinition>(m);
            if (!m.contains("phases")) metric.phases = {config.phase};
            config.metrics.push_back(std::move(metric));
        }
    }
    if (auto it = patch.find("scale"); it != patch.end()) {
        if (it->is_number_integer()) {
            auto n = it->get<int>();
            if (n < 2 || n > 7) bad_patch("scale count must be in [2, 7]");
            config.scale.grades.clear();
            for (int i = 0; i < n; ++i) config.scale.grades.push_back(std::string(1, static_cast<char>('A' + i)));
        } else {
            config.scale = decode<GradeScale>(*it);
        }
    }
    if (auto it = patch.find("all_boundaries"); it != patch.end()) {
        auto b = numbers_at(*it, "all_boundaries");
        for (auto& m : config.metrics) m.boundaries = b;
    }
    for_each_entry(patch, "boundaries", config,
                   [](auto& m, const auto& v, const auto& where) { m.boundaries = numbers_at(v, where); });
    for_each_entry(patch, "weights", config,
                   [](auto& m, const auto& v, const auto& where) { m.weight = number_at(v, where); });
    for_each_entry(patch, "references", config,
                   [](auto& m, const auto& v, const auto& where) { m.reference = number_at(v, where); });
    for_each_entry(patch, "directions", config, [](auto& m, const auto& v, const auto& where) {
        auto d = v.is_string() ? parse_direction(v.template get<std::string>()) : std::nullopt;
        if (!d) bad_patch(where + " must be \"higher_better\" or \"lower_better\"");
        m.direction = *d;
    });
    if (auto it = patch.find("carbon_intensity"); it != patch.end()) {
        config.carbon_intensity = number_at(*it, "carbon_intensity");
    }
    return config;
}

LabelService::LabelService(Repository& repo, std::vector<RecommendationEntry> catalog)
    : repo_(repo), catalog_(std::move(catalog)) {}

LabelOutcome LabelService::finish(PhaseReport report, const std::string& provider_id,
                                  std::vector<std::string> warnings) {
    auto config = repo_.current_config(report.phase);
    auto label = compute_label(report, config, catalog_);
    label.provider_id = provider_id.empty() ? std::string(kLocalProvider) : provider_id;
    repo_.save_label(label, report);
    return LabelOutcome{std::move(label), std::move(report), std::move(warnings)};
}

LabelOutcome LabelService::label_from_form(Phase phase, const std::string& model_id, const std::string& provider_id,
                                           const std::map<std::string, double>& payload) {
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is required");
    auto checked = validate_form_payload(payload, model_id, phase, repo_.current_config(phase));
    return finish(std::move(checked.report), provider_id, std::move(checked.warnings));
}

LabelOutcome LabelService::label_from_file(Phase phase, const std::string& model_id, const std::string& provider_id,
                                           std::string_view bytes, ReportFormat format, const FieldMapping& mapping) {
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is required");
    auto rows = parse_emission_report(bytes, format, mapping);
    auto summed = rows_to_report(rows, model_id, phase);
    std::map<std::string, double> values(summed.raw_values.begin(), summed.raw_values.end());
    auto checked = validate_form_payload(values, model_id, phase, repo_.current_config(phase));
    checked.report.provenance = Provenance::File;
    checked.report.collected_at = summed.collected_at;
    return finish(std::move(checked.report), provider_id, std::move(checked.warnings));
}

ProbeOutcome LabelService::label_from_probe(ProbeSpec spec, const std::string& model_id,
                                            const std::string& provider_id) {
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is required");
    if (!spec.carbon_intensity_kg_per_kwh) {
        spec.carbon_intensity_kg_per_kwh = repo_.current_config(Phase::Inference).carbon_intensity;
    }
    auto result = run_probe(spec);
    auto report = probe_to_report(result, model_id);
    return ProbeOutcome{finish(std::move(report), provider_id, {}), std::move(result)};
}

EnergyLabel LabelService::preview(const EfficiencyConfig& candidate, const PhaseReport& sample) const {
    auto report = sample;
    report.phase = candidate.phase;
    return compute_label(report, candidate, catalog_);
}

EfficiencyConfig LabelService::put_config(Phase phase, EfficiencyConfig config) {
    if (config.phase != phase) {
        throw Error(ErrorCode::PhaseMismatch, "config phase '" + std::string(to_string(config.phase)) +
                                                  "' does not match '" + std::string(to_string(phase)) + "'");
    }
    int version = repo_.save_config(config);
    return *repo_.store().get_config(phase, version);
}

EfficiencyConfig LabelService::patch_config(Phase phase, const nlohmann::json& patch) {
    return put_config(phase, apply_config_patch(repo_.current_config(phase), patch));
}

EfficiencyConfig LabelService::calibrate(Phase phase) {
    auto reports = repo_.store().list_reports(phase);
    auto calibrated = calibrate_references(reports, repo_.current_config(phase));
    return put_config(phase, std::move(calibrated));
}

}  // namespace ecolabel
