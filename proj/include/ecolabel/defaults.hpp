#pragma once

#include <vector>

#include "ecolabel/label_engine.hpp"

namespace ecolabel {

inline constexpr double kDefaultCarbonIntensity = 0.475;
inline constexpr int kDefaultTriggerPosition = 3;

// Thresholds for the A..E scale: reference model lands on C, A needs 2x better.
std::vector<double> default_boundaries();

// Version-0 config with the built-in metric catalog for a phase.
EfficiencyConfig default_config(Phase phase);

std::vector<RecommendationEntry> default_recommendations();

// Raw report values that put every default metric of the phase exactly on
// its reference.
RawValues reference_point_values(Phase phase);

}  // namespace ecolabel
