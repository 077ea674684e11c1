#pragma once

// Label workflows shared by the HTTP API and the CLI, so both front doors run
// the same code from parsed input to stored label.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecolabel/ingest.hpp"
#include "ecolabel/label_engine.hpp"
#include "ecolabel/probe.hpp"
#include "ecolabel/repository.hpp"

namespace ecolabel {

struct LabelOutcome {
    EnergyLabel label;
    PhaseReport report;
    std::vector<std::string> warnings;
};

struct ProbeOutcome {
    LabelOutcome labeled;
    ProbeResult probe;
};

// Partial config edit. Keys: weights, references, boundaries, directions
// (objects keyed by metric id), all_boundaries (one list for every metric),
// scale (grade names, or a count 2..7 meaning the first letters from A),
// add_metrics, remove_metrics, carbon_intensity. Unknown keys and unknown
// metric ids are InvalidArgument; the result is not validated here.
EfficiencyConfig apply_config_patch(EfficiencyConfig base, const nlohmann::json& patch);

class LabelService {
public:
    LabelService(Repository& repo, std::vector<RecommendationEntry> catalog);

    Repository& repository() { return repo_; }
    std::span<const RecommendationEntry> catalog() const { return catalog_; }

    LabelOutcome label_from_form(Phase phase, const std::string& model_id, const std::string& provider_id,
                                 const std::map<std::string, double>& payload);
    LabelOutcome label_from_file(Phase phase, const std::string& model_id, const std::string& provider_id,
                                 std::string_view bytes, ReportFormat format, const FieldMapping& mapping);
    // A spec without carbon intensity uses the current inference config's.
    ProbeOutcome label_from_probe(ProbeSpec spec, const std::string& model_id, const std::string& provider_id);

    // Computes without storing anything.
    EnergyLabel preview(const EfficiencyConfig& candidate, const PhaseReport& sample) const;

    EfficiencyConfig put_config(Phase phase, EfficiencyConfig config);
    EfficiencyConfig patch_config(Phase phase, const nlohmann::json& patch);
    // References set to the medians of the stored reports of the phase.
    EfficiencyConfig calibrate(Phase phase);

private:
    LabelOutcome finish(PhaseReport report, const std::string& provider_id, std::vector<std::string> warnings);

    Repository& repo_;
    std::vector<RecommendationEntry> catalog_;
};

}  // namespace ecolabel
