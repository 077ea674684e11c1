#pragma once

// Turns emission-tracker exports and form payloads into PhaseReports.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecolabel/label_engine.hpp"

namespace ecolabel {

enum class ReportFormat { Csv, Json };

std::optional<ReportFormat> parse_report_format(std::string_view text);

// One source column feeding one report field. `scale` converts units at parse
// time (for example 0.001 for a grams column feeding co2e_kg).
struct ColumnMapping {
    std::string source;
    std::string target;
    double scale = 1.0;
    bool operator==(const ColumnMapping&) const = default;
};

struct FieldMapping {
    std::vector<ColumnMapping> columns;

    // duration -> running_time_s, emissions -> co2e_kg,
    // energy_consumed -> energy_consumption_kwh
    static FieldMapping defaults();

    const ColumnMapping* for_source(std::string_view source) const;
    const ColumnMapping* for_target(std::string_view target) const;

    // Throws InvalidArgument on duplicate sources/targets or a bad scale.
    void validate() const;
};

// Accepts either {"source": "target", ...} or
// [{"source": ..., "target": ..., "scale"?: ...}, ...].
FieldMapping mapping_from_json(const nlohmann::json& j);
nlohmann::json mapping_to_json(const FieldMapping& mapping);

struct EmissionReportRow {
    RawValues values;                          // keyed by target field id
    std::map<std::string, std::string> extra;  // unmapped columns, verbatim

    std::optional<double> field(std::string_view target) const;
    double duration_s() const;
    double emissions_kg() const;
    double energy_kwh() const;

    bool operator==(const EmissionReportRow&) const = default;
};

// Errors: MalformedFile (encoding or structure), MissingColumn,
// NonNumericValue (details carry the 1-based data row and the column),
// NegativeValue.
std::vector<EmissionReportRow> parse_emission_report(std::string_view bytes, ReportFormat format,
                                                     const FieldMapping& mapping);

// Inverse of the CSV parser: mapped columns in mapping order, then extras.
std::string serialize_emission_report_csv(const std::vector<EmissionReportRow>& rows, const FieldMapping& mapping);

// Componentwise sum of all rows; throws EmptyRows.
PhaseReport rows_to_report(const std::vector<EmissionReportRow>& rows, const std::string& model_id, Phase phase);

struct FormPayloadResult {
    PhaseReport report;
    std::vector<std::string> warnings;
};

// Rejects negative (NegativeValue) and non-finite (NonFiniteValue) entries;
// fields the config does not read produce warnings, not errors.
FormPayloadResult validate_form_payload(const std::map<std::string, double>& payload, const std::string& model_id,
                                        Phase phase, const EfficiencyConfig& config);

// Decodes a raw_values JSON object, rejecting non-numeric entries.
std::map<std::string, double> payload_from_json(const nlohmann::json& j);

// "a=1,b=2.5" as used on the command line.
std::map<std::string, double> payload_from_pairs(std::string_view text);

}  // namespace ecolabel
