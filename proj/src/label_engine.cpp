#include "ecolabel/label_engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ecolabel {

namespace {

bool is_slug(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

std::string fmt_path(std::size_t i, std::string_view field) {
    return "metrics[" + std::to_string(i) + "]." + std::string(field);
}

nlohmann::json violations_json(const std::vector<Violation>& violations) {
    auto arr = nlohmann::json::array();
    for (const auto& v : violations) {
        arr.push_back({{"path", v.path}, {"message", v.message}});
    }
    return arr;
}

}  // namespace

GradeScale GradeScale::standard() {
    return GradeScale{{"A", "B", "C", "D", "E"}};
}

std::string_view to_string(MetricDirection direction) {
    return direction == MetricDirection::HigherBetter ? "higher_better" : "lower_better";
}

std::optional<MetricDirection> parse_direction(std::string_view text) {
    if (text == "higher_better") return MetricDirection::HigherBetter;
    if (text == "lower_better") return MetricDirection::LowerBetter;
    return std::nullopt;
}

std::vector<std::string> derivation_inputs(const DerivationRule& rule) {
    if (const auto* ratio = std::get_if<RatioDerivation>(&rule)) {
        return {ratio->numerator_field, ratio->denominator_field};
    }
    if (const auto* hm = std::get_if<HarmonicMeanDerivation>(&rule)) {
        return hm->source_fields;
    }
    return {};
}

bool MetricDefinition::applies_to(Phase phase) const {
    return std::find(phases.begin(), phases.end(), phase) != phases.end();
}

const MetricDefinition* EfficiencyConfig::find_metric(std::string_view id) const {
    auto it = std::find_if(metrics.begin(), metrics.end(), [&](const auto& m) { return m.id == id; });
    return it == metrics.end() ? nullptr : &*it;
}

MetricDefinition* EfficiencyConfig::find_metric(std::string_view id) {
    auto it = std::find_if(metrics.begin(), metrics.end(), [&](const auto& m) { return m.id == id; });
    return it == metrics.end() ? nullptr : &*it;
}

bool same_content(const EnergyLabel& a, const EnergyLabel& b) {
    EnergyLabel x = a;
    x.label_id = b.label_id;
    x.created_at = b.created_at;
    return x == b;
}

std::vector<Violation> validate_config(const EfficiencyConfig& config) {
    std::vector<Violation> out;
    const auto& grades = config.scale.grades;

    if (grades.size() < 2) {
        out.push_back({"scale", "scale must have at least 2 grades"});
    }
    std::set<std::string> seen_grades;
    for (std::size_t i = 0; i < grades.size(); ++i) {
        if (grades[i].empty()) {
            out.push_back({"scale[" + std::to_string(i) + "]", "grade identifier must be non-empty"});
        } else if (!seen_grades.insert(grades[i]).second) {
            out.push_back({"scale[" + std::to_string(i) + "]", "duplicate grade identifier '" + grades[i] + "'"});
        }
    }

    if (!(std::isfinite(config.carbon_intensity) && config.carbon_intensity > 0)) {
        out.push_back({"carbon_intensity", "carbon intensity must be positive"});
    }
    if (config.version < 0) {
        out.push_back({"version", "version must be non-negative"});
    }
    if (config.metrics.empty()) {
        out.push_back({"metrics", "config must define at least one metric"});
    }

    std::set<std::string> seen_ids;
    bool any_weight = false;
    for (std::size_t i = 0; i < config.metrics.size(); ++i) {
        const auto& m = config.metrics[i];
        if (!is_slug(m.id)) {
            out.push_back({fmt_path(i, "id"), "metric id must be a non-empty slug [a-z0-9_-]"});
        } else if (!seen_ids.insert(m.id).second) {
            out.push_back({fmt_path(i, "id"), "duplicate metric id '" + m.id + "'"});
        }
        if (m.phases.empty()) {
            out.push_back({fmt_path(i, "phases"), "phases must be non-empty"});
        } else if (!m.applies_to(config.phase)) {
            out.push_back({fmt_path(i, "phases"),
                           "metric does not apply to config phase '" + std::string(to_string(config.phase)) + "'"});
        }
        if (!(std::isfinite(m.weight) && m.weight >= 0)) {
            out.push_back({fmt_path(i, "weight"), "weight must be finite and >= 0"});
        } else if (m.weight > 0) {
            any_weight = true;
        }
        if (!(std::isfinite(m.reference) && m.reference > 0)) {
            out.push_back({fmt_path(i, "reference"), "reference must be finite and > 0"});
        }

        if (grades.size() >= 2 && m.boundaries.size() != grades.size() - 1) {
            out.push_back({fmt_path(i, "boundaries"), "boundaries must have " + std::to_string(grades.size() - 1) +
                                                          " entries (scale length - 1)"});
        }
        bool positive = std::all_of(m.boundaries.begin(), m.boundaries.end(),
                                    [](double b) { return std::isfinite(b) && b > 0; });
        if (!positive) {
            out.push_back({fmt_path(i, "boundaries"), "boundaries must be finite and > 0"});
        }
        for (std::size_t k = 1; k < m.boundaries.size(); ++k) {
            if (!(m.boundaries[k] < m.boundaries[k - 1])) {
                out.push_back({fmt_path(i, "boundaries"), "boundaries not strictly decreasing"});
                break;
            }
        }

        if (const auto* ratio = std::get_if<RatioDerivation>(&m.derivation)) {
            if (ratio->numerator_field.empty() || ratio->denominator_field.empty()) {
                out.push_back({fmt_path(i, "derivation"), "ratio fields must be non-empty"});
            } else if (ratio->numerator_field == ratio->denominator_field) {
                out.push_back({fmt_path(i, "derivation"), "ratio fields must be distinct"});
            }
        } else if (const auto* hm = std::get_if<HarmonicMeanDerivation>(&m.derivation)) {
            if (hm->source_fields.empty()) {
                out.push_back({fmt_path(i, "derivation"), "harmonic_mean needs at least one source field"});
            }
        }
    }
    if (!config.metrics.empty() && !any_weight) {
        out.push_back({"metrics", "at least one metric has weight > 0"});
    }
    return out;
}

std::vector<Violation> validate_catalog(std::span<const RecommendationEntry> catalog, const GradeScale& scale) {
    std::vector<Violation> out;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& e = catalog[i];
        std::string path = "catalog[" + std::to_string(i) + "]";
        if (e.metric_id.empty()) {
            out.push_back({path + ".metric_id", "metric id must be non-empty"});
        }
        if (e.trigger_position < 1 || e.trigger_position > scale.worst_position()) {
            out.push_back({path + ".trigger_position",
                           "trigger position must be in [1, " + std::to_string(scale.worst_position()) + "]"});
        }
    }
    return out;
}

DerivedValues derive_metrics(const PhaseReport& report, const EfficiencyConfig& config) {
    if (report.phase != config.phase) {
        throw Error(ErrorCode::PhaseMismatch, "report phase '" + std::string(to_string(report.phase)) +
                                                  "' does not match config phase '" +
                                                  std::string(to_string(config.phase)) + "'");
    }
    DerivedValues out;
    out.values = report.raw_values;
    const auto& raw = report.raw_values;

    for (const auto& m : config.metrics) {
        if (const auto* ratio = std::get_if<RatioDerivation>(&m.derivation)) {
            out.values.erase(m.id);
            auto num = raw.find(ratio->numerator_field);
            auto den = raw.find(ratio->denominator_field);
            if (num == raw.end() || den == raw.end()) {
                continue;
            }
            if (den->second == 0.0) {
                out.issues.push_back({m.id, ErrorCode::DerivationDivisionByZero,
                                      "denominator '" + ratio->denominator_field + "' is 0"});
                continue;
            }
            out.values[m.id] = num->second / den->second;
        } else if (const auto* hm = std::get_if<HarmonicMeanDerivation>(&m.derivation)) {
            out.values.erase(m.id);
            int present = 0;
            bool has_zero = false;
            double reciprocal_sum = 0.0;
            for (const auto& field : hm->source_fields) {
                auto it = raw.find(field);
                if (it == raw.end()) {
                    continue;
                }
                ++present;
                if (it->second == 0.0) {
                    has_zero = true;
                } else {
                    reciprocal_sum += 1.0 / it->second;
                }
            }
            if (present == 0) {
                continue;
            }
            out.values[m.id] = has_zero ? 0.0 : static_cast<double>(present) / reciprocal_sum;
        }
    }
    return out;
}

double compute_index(double value, double reference, MetricDirection direction) {
    if (!std::isfinite(value) || !std::isfinite(reference)) {
        throw Error(ErrorCode::NonFiniteInput, "index inputs must be finite");
    }
    if (value < 0) {
        throw Error(ErrorCode::InvalidArgument, "metric value must be >= 0");
    }
    if (reference <= 0) {
        throw Error(ErrorCode::InvalidArgument, "reference must be > 0");
    }
    double index;
    if (direction == MetricDirection::HigherBetter) {
        index = value / reference;
    } else {
        index = value == 0.0 ? kIndexCap : reference / value;
    }
    return std::clamp(index, kIndexFloor, kIndexCap);
}

GradeResult grade_index(double index, std::span<const double> boundaries, const GradeScale& scale) {
    if (!std::isfinite(index)) {
        throw Error(ErrorCode::NonFiniteInput, "index must be finite");
    }
    if (scale.size() < 2 || boundaries.size() != scale.size() - 1) {
        throw Error(ErrorCode::InvalidArgument, "boundaries do not match the grade scale");
    }
    // Thresholds decrease, so the ones the index falls short of form a prefix.
    int position = 0;
    while (static_cast<std::size_t>(position) < boundaries.size() && index < boundaries[position]) {
        ++position;
    }
    return {scale.grades[position], position};
}

int round_score_to_position(double score, const GradeScale& scale) {
    int position = static_cast<int>(std::floor(score + 0.5));
    return std::clamp(position, 0, scale.worst_position());
}

AggregateResult aggregate_label(std::span<const RatedMetric> rated, const GradeScale& scale) {
    double weighted = 0.0;
    double total_weight = 0.0;
    for (const auto& r : rated) {
        if (r.missing || !r.grade_position) {
            continue;
        }
        weighted += r.weight_used * static_cast<double>(*r.grade_position);
        total_weight += r.weight_used;
    }
    if (!(total_weight > 0)) {
        throw Error(ErrorCode::NoRatableMetrics, "no present metric carries a positive weight");
    }
    AggregateResult out;
    out.score = weighted / total_weight;
    out.position = round_score_to_position(out.score, scale);
    out.grade = scale.grades[out.position];
    return out;
}

std::vector<RatedMetric> rate_metrics(const PhaseReport& report, const EfficiencyConfig& config) {
    auto derived = derive_metrics(report, config);
    std::vector<RatedMetric> rated;
    rated.reserve(config.metrics.size());
    for (const auto& m : config.metrics) {
        RatedMetric r;
        r.metric_id = m.id;
        auto it = derived.values.find(m.id);
        if (it != derived.values.end()) {
            double index = compute_index(it->second, m.reference, m.direction);
            auto graded = grade_index(index, m.boundaries, config.scale);
            r.value = it->second;
            r.index = index;
            r.grade = graded.grade;
            r.grade_position = graded.position;
            r.weight_used = m.weight;
            r.missing = false;
        }
        rated.push_back(std::move(r));
    }
    return rated;
}

EnergyLabel compute_label(const PhaseReport& report, const EfficiencyConfig& config,
                          std::span<const RecommendationEntry> catalog) {
    if (auto violations = validate_config(config); !violations.empty()) {
        throw Error(ErrorCode::InvalidConfig, "efficiency config is invalid", violations_json(violations));
    }
    EnergyLabel label;
    label.model_id = report.model_id;
    label.phase = config.phase;
    label.config_version = config.version;
    label.scale = config.scale;
    label.rated_metrics = rate_metrics(report, config);

    auto overall = aggregate_label(label.rated_metrics, config.scale);
    label.overall_score = overall.score;
    label.overall_grade = overall.grade;

    for (const auto& entry : catalog) {
        auto it = std::find_if(label.rated_metrics.begin(), label.rated_metrics.end(),
                               [&](const RatedMetric& r) { return r.metric_id == entry.metric_id; });
        if (it == label.rated_metrics.end() || it->missing) {
            continue;
        }
        int trigger = std::clamp(entry.trigger_position, 1, config.scale.worst_position());
        if (*it->grade_position >= trigger) {
            label.recommendations.push_back({entry.metric_id, entry.text});
        }
    }

    label.label_id = generate_id();
    label.created_at = now();
    return label;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptyPopulation, "median of an empty set");
    }
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

EfficiencyConfig calibrate_references(std::span<const PhaseReport> population, const EfficiencyConfig& config) {
    if (population.empty()) {
        throw Error(ErrorCode::EmptyPopulation, "calibration population is empty");
    }
    std::map<std::string, std::vector<double>, std::less<>> samples;
    for (const auto& report : population) {
        auto derived = derive_metrics(report, config);
        for (const auto& m : config.metrics) {
            auto it = derived.values.find(m.id);
            if (it != derived.values.end() && std::isfinite(it->second) && it->second > 0) {
                samples[m.id].push_back(it->second);
            }
        }
    }
    EfficiencyConfig out = config;
    out.version = config.version + 1;
    out.created_at = now();
    for (auto& m : out.metrics) {
        auto it = samples.find(m.id);
        if (it != samples.end() && !it->second.empty()) {
            m.reference = median(it->second);
        }
    }
    return out;
}

}  // namespace ecolabel
