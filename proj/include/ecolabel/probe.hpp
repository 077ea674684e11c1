#pragma once

// Drives a deployed model endpoint with sample requests and turns the measured
// running time into energy and CO2e through a device power profile.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecolabel/common.hpp"
#include "ecolabel/label_engine.hpp"

namespace ecolabel {

struct ProbeSample {
    std::string body;
    std::string content_type = "application/json";
};

struct ProbeSpec {
    std::string endpoint_url;
    std::string http_method = "POST";
    std::map<std::string, std::string> headers;
    std::vector<ProbeSample> samples;
    int repetitions = 1;
    int warmup = 1;
    double timeout_s = 30.0;
    std::optional<double> power_profile_w;
    std::optional<double> carbon_intensity_kg_per_kwh;  // kDefaultCarbonIntensity when absent
};

struct ProbeResult {
    std::vector<double> per_call_latencies_s;  // successful measured calls only
    double total_running_time_s = 0.0;
    double mean_latency_s = 0.0;
    int failures = 0;
    std::optional<double> energy_kwh;
    std::optional<double> co2e_kg;
    std::optional<double> power_draw_w;
    Timestamp collected_at{};
};

// Throws InvalidSpec listing every problem in details.
void validate_probe_spec(const ProbeSpec& spec);

// Warmup calls first (not measured), then repetitions x samples measured calls,
// one at a time. Non-2xx answers and timeouts count as failures. Throws
// EndpointUnreachable when no call got any HTTP response.
ProbeResult run_probe(const ProbeSpec& spec);

// Energy figures for a set of measurements; also used by run_probe.
void apply_power_profile(ProbeResult& result, std::optional<double> power_w, double carbon_intensity);

// running_time_s, power_draw_w and co2e_kg as present. NoSuccessfulCalls when
// nothing was measured.
PhaseReport probe_to_report(const ProbeResult& result, const std::string& model_id);

// Samples document: a JSON array whose items are {"body": string,
// "content_type"?: string}, {"json": any} or any other JSON value (sent as JSON).
std::vector<ProbeSample> samples_from_json(const nlohmann::json& doc);

void to_json(nlohmann::json& j, const ProbeSpec& spec);
void from_json(const nlohmann::json& j, ProbeSpec& spec);  // InvalidSpec on bad shapes
void to_json(nlohmann::json& j, const ProbeResult& result);

}  // namespace ecolabel
