#include "ecolabel/codec.hpp"

#include <fstream>
#include <sstream>

namespace ecolabel {

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<T>();
}

void require_object(const json& j, const char* what) {
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a JSON object");
    }
}

}  // namespace

json timestamp_json(Timestamp t) {
    return format_timestamp(t);
}

Timestamp timestamp_from(const json& j) {
    if (j.is_null()) {
        return Timestamp{};
    }
    auto parsed = parse_timestamp(j.get<std::string>());
    if (!parsed) {
        throw Error(ErrorCode::InvalidArgument, "invalid timestamp '" + j.get<std::string>() + "'");
    }
    return *parsed;
}

Phase phase_from(const json& j) {
    auto text = j.get<std::string>();
    auto phase = parse_phase(text);
    if (!phase) {
        throw Error(ErrorCode::InvalidArgument, "unknown phase '" + text + "'");
    }
    return *phase;
}

void to_json(json& j, const GradeScale& scale) {
    j = scale.grades;
}

void from_json(const json& j, GradeScale& scale) {
    scale.grades = j.get<std::vector<std::string>>();
}

void to_json(json& j, const DerivationRule& rule) {
    if (const auto* ratio = std::get_if<RatioDerivation>(&rule)) {
        j = {{"kind", "ratio"},
             {"numerator_field", ratio->numerator_field},
             {"denominator_field", ratio->denominator_field}};
    } else if (const auto* hm = std::get_if<HarmonicMeanDerivation>(&rule)) {
        j = {{"kind", "harmonic_mean"}, {"source_fields", hm->source_fields}};
    } else {
        j = {{"kind", "none"}};
    }
}

void from_json(const json& j, DerivationRule& rule) {
    if (j.is_null()) {
        rule = NoDerivation{};
        return;
    }
    require_object(j, "derivation");
    auto kind = j.value("kind", std::string("none"));
    if (kind == "none") {
        rule = NoDerivation{};
    } else if (kind == "ratio") {
        rule = RatioDerivation{j.at("numerator_field").get<std::string>(), j.at("denominator_field").get<std::string>()};
    } else if (kind == "harmonic_mean") {
        rule = HarmonicMeanDerivation{j.at("source_fields").get<std::vector<std::string>>()};
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown derivation kind '" + kind + "'");
    }
}

void to_json(json& j, const MetricDefinition& m) {
    auto phases = json::array();
    for (auto p : m.phases) {
        phases.push_back(to_string(p));
    }
    j = {{"id", m.id},
         {"name", m.name},
         {"description", m.description},
         {"phases", phases},
         {"unit", m.unit},
         {"direction", to_string(m.direction)},
         {"weight", m.weight},
         {"reference", m.reference},
         {"boundaries", m.boundaries},
         {"derivation", m.derivation}};
}

void from_json(const json& j, MetricDefinition& m) {
    require_object(j, "metric");
    m.id = j.at("id").get<std::string>();
    m.name = j.value("name", m.id);
    m.description = j.value("description", std::string());
    m.phases.clear();
    if (auto it = j.find("phases"); it != j.end()) {
        for (const auto& p : *it) {
            m.phases.push_back(phase_from(p));
        }
    }
    m.unit = j.value("unit", std::string());
    auto direction_text = j.at("direction").get<std::string>();
    auto direction = parse_direction(direction_text);
    if (!direction) {
        throw Error(ErrorCode::InvalidArgument, "unknown direction '" + direction_text + "'");
    }
    m.direction = *direction;
    m.weight = j.value("weight", 1.0);
    m.reference = j.at("reference").get<double>();
    m.boundaries = j.at("boundaries").get<std::vector<double>>();
    m.derivation = j.contains("derivation") ? j.at("derivation").get<DerivationRule>() : DerivationRule{NoDerivation{}};
}

void to_json(json& j, const EfficiencyConfig& c) {
    j = {{"version", c.version},
         {"phase", to_string(c.phase)},
         {"scale", c.scale},
         {"metrics", c.metrics},
         {"carbon_intensity", c.carbon_intensity},
         {"created_at", timestamp_json(c.created_at)}};
}

void from_json(const json& j, EfficiencyConfig& c) {
    require_object(j, "config");
    c.version = j.value("version", 0);
    c.phase = phase_from(j.at("phase"));
    c.scale = j.contains("scale") ? j.at("scale").get<GradeScale>() : GradeScale::standard();
    c.metrics = j.at("metrics").get<std::vector<MetricDefinition>>();
    const auto& metrics_json = j.at("metrics");
    for (std::size_t i = 0; i < c.metrics.size(); ++i) {
        if (!metrics_json[i].contains("phases")) {
            c.metrics[i].phases = {c.phase};
        }
    }
    c.carbon_intensity = j.value("carbon_intensity", 0.475);
    c.created_at = timestamp_from(j.value("created_at", json(nullptr)));
}

void to_json(json& j, const PhaseReport& r) {
    j = {{"model_id", r.model_id},
         {"phase", to_string(r.phase)},
         {"raw_values", r.raw_values},
         {"provenance", to_string(r.provenance)},
         {"collected_at", timestamp_json(r.collected_at)}};
}

void from_json(const json& j, PhaseReport& r) {
    require_object(j, "report");
    r.model_id = j.value("model_id", std::string());
    r.phase = phase_from(j.at("phase"));
    r.raw_values.clear();
    const auto raw = j.value("raw_values", json::object());
    for (const auto& [k, v] : raw.items()) {
        r.raw_values[k] = v.get<double>();
    }
    auto prov_text = j.value("provenance", std::string("form"));
    auto prov = parse_provenance(prov_text);
    if (!prov) {
        throw Error(ErrorCode::InvalidArgument, "unknown provenance '" + prov_text + "'");
    }
    r.provenance = *prov;
    r.collected_at = timestamp_from(j.value("collected_at", json(nullptr)));
}

void to_json(json& j, const RatedMetric& r) {
    j = {{"metric_id", r.metric_id},
         {"value", optional_json(r.value)},
         {"index", optional_json(r.index)},
         {"grade", optional_json(r.grade)},
         {"grade_position", optional_json(r.grade_position)},
         {"weight_used", r.weight_used},
         {"missing", r.missing}};
}

void from_json(const json& j, RatedMetric& r) {
    r.metric_id = j.at("metric_id").get<std::string>();
    r.value = optional_from<double>(j, "value");
    r.index = optional_from<double>(j, "index");
    r.grade = optional_from<std::string>(j, "grade");
    r.grade_position = optional_from<int>(j, "grade_position");
    r.weight_used = j.at("weight_used").get<double>();
    r.missing = j.at("missing").get<bool>();
}

void to_json(json& j, const Recommendation& rec) {
    j = {{"metric_id", rec.metric_id}, {"text", rec.text}};
}

void from_json(const json& j, Recommendation& rec) {
    rec.metric_id = j.at("metric_id").get<std::string>();
    rec.text = j.at("text").get<std::string>();
}

void to_json(json& j, const RecommendationEntry& e) {
    j = {{"metric_id", e.metric_id}, {"trigger_position", e.trigger_position}, {"text", e.text}};
}

void from_json(const json& j, RecommendationEntry& e) {
    e.metric_id = j.at("metric_id").get<std::string>();
    e.trigger_position = j.value("trigger_position", 3);
    e.text = j.at("text").get<std::string>();
}

void to_json(json& j, const EnergyLabel& l) {
    j = {{"label_id", l.label_id},
         {"model_id", l.model_id},
         {"provider_id", l.provider_id},
         {"phase", to_string(l.phase)},
         {"config_version", l.config_version},
         {"scale", l.scale},
         {"rated_metrics", l.rated_metrics},
         {"overall_score", l.overall_score},
         {"overall_grade", l.overall_grade},
         {"recommendations", l.recommendations},
         {"created_at", timestamp_json(l.created_at)}};
}

void from_json(const json& j, EnergyLabel& l) {
    l.label_id = j.at("label_id").get<std::string>();
    l.model_id = j.at("model_id").get<std::string>();
    l.provider_id = j.value("provider_id", std::string(kLocalProvider));
    l.phase = phase_from(j.at("phase"));
    l.config_version = j.at("config_version").get<int>();
    l.scale = j.at("scale").get<GradeScale>();
    l.rated_metrics = j.at("rated_metrics").get<std::vector<RatedMetric>>();
    l.overall_score = j.at("overall_score").get<double>();
    l.overall_grade = j.at("overall_grade").get<std::string>();
    l.recommendations = j.value("recommendations", std::vector<Recommendation>{});
    l.created_at = timestamp_from(j.at("created_at"));
}

void to_json(json& j, const Violation& v) {
    j = {{"path", v.path}, {"message", v.message}};
}

json parse_json(std::string_view text, ErrorCode code) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(code, std::string("invalid JSON: ") + e.what());
    }
}

std::vector<RecommendationEntry> load_recommendations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open recommendation catalog '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return decode<std::vector<RecommendationEntry>>(parse_json(buf.str()));
}

}  // namespace ecolabel
