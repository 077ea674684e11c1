#pragma once

// Energy-efficiency label computation.
//
// A label is produced in four steps: derived metrics are computed from raw
// report fields, each metric value is normalized into an index against its
// reference value (index > 1 means better than the reference), the index is
// placed into a grade by the metric's decreasing thresholds, and the grade
// positions are combined into a weighted overall score.
//
// Everything in this header is a pure function of its arguments, apart from
// the label id and creation time stamped by compute_label.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ecolabel/common.hpp"
#include "ecolabel/error.hpp"

namespace ecolabel {

inline constexpr double kIndexCap = 1e6;
inline constexpr double kIndexFloor = 1e-6;

// Ordered grade identifiers, best first.
struct GradeScale {
    std::vector<std::string> grades;

    std::size_t size() const { return grades.size(); }
    int worst_position() const { return static_cast<int>(grades.size()) - 1; }

    static GradeScale standard();  // A..E

    bool operator==(const GradeScale&) const = default;
};

enum class MetricDirection { HigherBetter, LowerBetter };

std::string_view to_string(MetricDirection direction);
std::optional<MetricDirection> parse_direction(std::string_view text);

struct NoDerivation {
    bool operator==(const NoDerivation&) const = default;
};

struct RatioDerivation {
    std::string numerator_field;
    std::string denominator_field;
    bool operator==(const RatioDerivation&) const = default;
};

struct HarmonicMeanDerivation {
    std::vector<std::string> source_fields;
    bool operator==(const HarmonicMeanDerivation&) const = default;
};

using DerivationRule = std::variant<NoDerivation, RatioDerivation, HarmonicMeanDerivation>;

// Raw field ids a rule reads. A metric without derivation reads its own id.
std::vector<std::string> derivation_inputs(const DerivationRule& rule);

struct MetricDefinition {
    std::string id;
    std::string name;
    std::string description;
    std::vector<Phase> phases;
    std::string unit;
    MetricDirection direction = MetricDirection::LowerBetter;
    double weight = 1.0;
    double reference = 1.0;
    std::vector<double> boundaries;
    DerivationRule derivation = NoDerivation{};

    bool applies_to(Phase phase) const;
    bool operator==(const MetricDefinition&) const = default;
};

struct EfficiencyConfig {
    int version = 0;
    Phase phase = Phase::Training;
    GradeScale scale = GradeScale::standard();
    std::vector<MetricDefinition> metrics;
    double carbon_intensity = 0.475;  // kg CO2e per kWh
    Timestamp created_at{};

    const MetricDefinition* find_metric(std::string_view id) const;
    MetricDefinition* find_metric(std::string_view id);
    bool operator==(const EfficiencyConfig&) const = default;
};

using RawValues = std::map<std::string, double, std::less<>>;

struct PhaseReport {
    std::string model_id;
    Phase phase = Phase::Training;
    RawValues raw_values;
    Provenance provenance = Provenance::Form;
    Timestamp collected_at{};

    bool operator==(const PhaseReport&) const = default;
};

struct RatedMetric {
    std::string metric_id;
    std::optional<double> value;
    std::optional<double> index;
    std::optional<std::string> grade;
    std::optional<int> grade_position;
    double weight_used = 0.0;
    bool missing = true;

    bool operator==(const RatedMetric&) const = default;
};

struct Recommendation {
    std::string metric_id;
    std::string text;
    bool operator==(const Recommendation&) const = default;
};

// A catalog entry fires when the metric's grade position is >= trigger_position.
struct RecommendationEntry {
    std::string metric_id;
    int trigger_position = 3;
    std::string text;
    bool operator==(const RecommendationEntry&) const = default;
};

struct EnergyLabel {
    std::string label_id;
    std::string model_id;
    std::string provider_id{kLocalProvider};
    Phase phase = Phase::Training;
    int config_version = 0;
    GradeScale scale;
    std::vector<RatedMetric> rated_metrics;
    double overall_score = 0.0;
    std::string overall_grade;
    std::vector<Recommendation> recommendations;
    Timestamp created_at{};

    bool operator==(const EnergyLabel&) const = default;
};

// Equality ignoring label_id and created_at.
bool same_content(const EnergyLabel& a, const EnergyLabel& b);

struct Violation {
    std::string path;
    std::string message;
    bool operator==(const Violation&) const = default;
};

// Every violated invariant of the config and its nested types. Empty means valid.
std::vector<Violation> validate_config(const EfficiencyConfig& config);

// Checks trigger positions against the scale. Kept apart from validate_config
// because the catalog is edited independently of config versions.
std::vector<Violation> validate_catalog(std::span<const RecommendationEntry> catalog, const GradeScale& scale);

struct DerivationIssue {
    std::string metric_id;
    ErrorCode code;
    std::string message;
};

struct DerivedValues {
    RawValues values;  // raw fields plus every computable derived metric
    std::vector<DerivationIssue> issues;
};

// Throws PhaseMismatch when report and config disagree on phase.
DerivedValues derive_metrics(const PhaseReport& report, const EfficiencyConfig& config);

// Normalizes a metric value against its reference so that 1.0 is the
// reference point and larger is better. Result lies in [kIndexFloor, kIndexCap].
double compute_index(double value, double reference, MetricDirection direction);

struct GradeResult {
    std::string grade;
    int position = 0;
    bool operator==(const GradeResult&) const = default;
};

// Thresholds are decreasing; an index exactly on a threshold earns the better grade.
GradeResult grade_index(double index, std::span<const double> boundaries, const GradeScale& scale);

struct AggregateResult {
    double score = 0.0;
    std::string grade;
    int position = 0;
};

// Weighted mean of grade positions over present metrics. Exact halves round
// toward the worse grade. Throws NoRatableMetrics if nothing carries weight.
AggregateResult aggregate_label(std::span<const RatedMetric> rated, const GradeScale& scale);

// Position for a score: round half toward the larger (worse) position.
int round_score_to_position(double score, const GradeScale& scale);

// Per-metric rating without aggregation; metrics that cannot be rated are
// returned with missing = true.
std::vector<RatedMetric> rate_metrics(const PhaseReport& report, const EfficiencyConfig& config);

EnergyLabel compute_label(const PhaseReport& report, const EfficiencyConfig& config,
                          std::span<const RecommendationEntry> catalog);

// New config whose references are the medians of each metric's present,
// positive values across the population. Input config is not modified.
EfficiencyConfig calibrate_references(std::span<const PhaseReport> population, const EfficiencyConfig& config);

// Median with the even-count convention (mean of the two middle values).
double median(std::vector<double> values);

}  // namespace ecolabel
