#pragma once

// Straight-from-formula reference for the label computation. Deliberately
// shares no code with src/label_engine.cpp beyond the data types.

#include <optional>

#include "ecolabel/label_engine.hpp"

namespace oracle {

struct MetricOutcome {
    std::optional<double> value;
    std::optional<double> index;
    std::optional<int> position;
};

std::optional<double> metric_value(const ecolabel::MetricDefinition& m, const ecolabel::RawValues& raw);
double index_of(double value, double reference, ecolabel::MetricDirection direction);
int position_of(double index, const std::vector<double>& thresholds);
MetricOutcome rate(const ecolabel::MetricDefinition& m, const ecolabel::RawValues& raw);

// nullopt when no present metric carries positive weight.
std::optional<double> overall_score(const ecolabel::EfficiencyConfig& config, const ecolabel::RawValues& raw);

// Round half toward the worse grade.
int overall_position(double score, int grade_count);

double median_by_sorting(std::vector<double> values);

}  // namespace oracle
