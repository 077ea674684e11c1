#pragma once

// JSON representations of the label-engine types. These shapes are the wire
// format of the HTTP API, the CLI `--json` output and the on-disk store.

#include <json.hpp>

#include "ecolabel/label_engine.hpp"

namespace ecolabel {

using nlohmann::json;

void to_json(json& j, const GradeScale& scale);
void from_json(const json& j, GradeScale& scale);

void to_json(json& j, const DerivationRule& rule);
void from_json(const json& j, DerivationRule& rule);

void to_json(json& j, const MetricDefinition& metric);
void from_json(const json& j, MetricDefinition& metric);

void to_json(json& j, const EfficiencyConfig& config);
// Missing `phases` on a metric defaults to the config's phase; missing
// version/created_at default to 0 / epoch.
void from_json(const json& j, EfficiencyConfig& config);

void to_json(json& j, const PhaseReport& report);
void from_json(const json& j, PhaseReport& report);

void to_json(json& j, const RatedMetric& rated);
void from_json(const json& j, RatedMetric& rated);

void to_json(json& j, const Recommendation& rec);
void from_json(const json& j, Recommendation& rec);

void to_json(json& j, const RecommendationEntry& entry);
void from_json(const json& j, RecommendationEntry& entry);

void to_json(json& j, const EnergyLabel& label);
void from_json(const json& j, EnergyLabel& label);

void to_json(json& j, const Violation& v);

// Helpers shared by other codecs.
json timestamp_json(Timestamp t);
Timestamp timestamp_from(const json& j);
Phase phase_from(const json& j);

// Parses a JSON document and converts it, mapping every parse or shape error
// to Error(code) with the underlying message.
template <typename T>
T decode(const json& j, ErrorCode code = ErrorCode::InvalidArgument) {
    try {
        return j.get<T>();
    } catch (const Error&) {
        throw;
    } catch (const json::exception& e) {
        throw Error(code, e.what());
    }
}

json parse_json(std::string_view text, ErrorCode code = ErrorCode::InvalidArgument);

std::vector<RecommendationEntry> load_recommendations(const std::string& path);

}  // namespace ecolabel
