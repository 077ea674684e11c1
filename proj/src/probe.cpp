#include "ecolabel/probe.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>

#include "ecolabel/codec.hpp"
#include "ecolabel/defaults.hpp"

namespace ecolabel {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

std::optional<SplitUrl> split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) return std::nullopt;
    auto s = url.substr(0, scheme);
    if (s != "http" && s != "https") return std::nullopt;
    auto slash = url.find('/', scheme + 3);
    SplitUrl out;
    out.origin = url.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : url.substr(slash);
    if (out.origin.size() <= scheme + 3) return std::nullopt;
    return out;
}

bool positive(std::optional<double> v) {
    return !v || (std::isfinite(*v) && *v > 0);
}

}  // namespace

void validate_probe_spec(const ProbeSpec& spec) {
    auto problems = nlohmann::json::array();
    auto add = [&](const char* field, const std::string& msg) { problems.push_back({{"path", field}, {"message", msg}}); };
    if (!split_url(spec.endpoint_url)) add("endpoint_url", "must be an http(s) URL with a host");
    static const std::vector<std::string> methods{"GET", "POST", "PUT", "PATCH", "DELETE"};
    if (std::find(methods.begin(), methods.end(), spec.http_method) == methods.end()) {
        add("http_method", "unsupported method '" + spec.http_method + "'");
    }
    if (spec.samples.empty()) add("samples", "at least one sample is required");
    if (spec.repetitions < 1) add("repetitions", "must be >= 1");
    if (spec.warmup < 0) add("warmup", "must be >= 0");
    if (!std::isfinite(spec.timeout_s) || spec.timeout_s <= 0) add("timeout_s", "must be a positive number");
    if (!positive(spec.power_profile_w)) add("power_profile_w", "must be a positive number");
    if (!positive(spec.carbon_intensity_kg_per_kwh)) add("carbon_intensity_kg_per_kwh", "must be a positive number");
    if (!problems.empty()) {
        throw Error(ErrorCode::InvalidSpec, "probe spec is invalid", problems);
    }
}

void apply_power_profile(ProbeResult& result, std::optional<double> power_w, double carbon_intensity) {
    result.power_draw_w = power_w;
    if (power_w) {
        result.energy_kwh = *power_w * result.total_running_time_s / 3'600'000.0;
        result.co2e_kg = *result.energy_kwh * carbon_intensity;
    } else {
        result.energy_kwh.reset();
        result.co2e_kg.reset();
    }
}

ProbeResult run_probe(const ProbeSpec& spec) {
    validate_probe_spec(spec);
    auto url = *split_url(spec.endpoint_url);

    httplib::Client client(url.origin);
    auto timeout = std::chrono::microseconds(static_cast<std::int64_t>(spec.timeout_s * 1e6));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_keep_alive(true);
    // Nagle would hold the body segment back until the headers are acked.
    client.set_tcp_nodelay(true);

    httplib::Headers headers(spec.headers.begin(), spec.headers.end());
    bool any_response = false;
    std::string last_error;

    // true on a 2xx answer
    auto call = [&](const ProbeSample& sample) {
        httplib::Result res{nullptr, httplib::Error::Unknown};
        const auto& m = spec.http_method;
        if (m == "GET") res = client.Get(url.path, headers);
        else if (m == "POST") res = client.Post(url.path, headers, sample.body, sample.content_type);
        else if (m == "PUT") res = client.Put(url.path, headers, sample.body, sample.content_type);
        else if (m == "PATCH") res = client.Patch(url.path, headers, sample.body, sample.content_type);
        else res = client.Delete(url.path, headers, sample.body, sample.content_type);
        if (!res) {
            last_error = httplib::to_string(res.error());
            return false;
        }
        any_response = true;
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            return false;
        }
        return true;
    };

    for (int i = 0; i < spec.warmup; ++i) {
        call(spec.samples[static_cast<std::size_t>(i) % spec.samples.size()]);
    }

    ProbeResult result;
    for (int r = 0; r < spec.repetitions; ++r) {
        for (const auto& sample : spec.samples) {
            auto start = std::chrono::steady_clock::now();
            bool ok = call(sample);
            auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (ok) {
                result.per_call_latencies_s.push_back(elapsed);
            } else {
                ++result.failures;
            }
        }
    }
    if (!any_response) {
        throw Error(ErrorCode::EndpointUnreachable, "endpoint " + spec.endpoint_url + " is unreachable: " + last_error,
                    {{"endpoint_url", spec.endpoint_url}});
    }

    for (double l : result.per_call_latencies_s) result.total_running_time_s += l;
    if (!result.per_call_latencies_s.empty()) {
        result.mean_latency_s = result.total_running_time_s / static_cast<double>(result.per_call_latencies_s.size());
    }
    apply_power_profile(result, spec.power_profile_w,
                        spec.carbon_intensity_kg_per_kwh.value_or(kDefaultCarbonIntensity));
    result.collected_at = now();
    return result;
}

PhaseReport probe_to_report(const ProbeResult& result, const std::string& model_id) {
    if (result.per_call_latencies_s.empty()) {
        throw Error(ErrorCode::NoSuccessfulCalls, "probe has no successful calls",
                    {{"failures", result.failures}});
    }
    PhaseReport r;
    r.model_id = model_id;
    r.phase = Phase::Inference;
    r.provenance = Provenance::Probe;
    r.collected_at = result.collected_at;
    r.raw_values["running_time_s"] = result.total_running_time_s;
    if (result.power_draw_w) r.raw_values["power_draw_w"] = *result.power_draw_w;
    if (result.co2e_kg) r.raw_values["co2e_kg"] = *result.co2e_kg;
    return r;
}

std::vector<ProbeSample> samples_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) {
        throw Error(ErrorCode::InvalidSpec, "samples must be a JSON array");
    }
    std::vector<ProbeSample> out;
    for (const auto& item : doc) {
        ProbeSample s;
        if (item.is_object() && item.contains("body")) {
            if (!item["body"].is_string()) throw Error(ErrorCode::InvalidSpec, "sample body must be a string");
            s.body = item["body"].get<std::string>();
            s.content_type = item.value("content_type", std::string("application/octet-stream"));
        } else if (item.is_object() && item.contains("json")) {
            s.body = item["json"].dump();
        } else {
            s.body = item.dump();
        }
        out.push_back(std::move(s));
    }
    return out;
}

void to_json(nlohmann::json& j, const ProbeSpec& spec) {
    auto samples = nlohmann::json::array();
    for (const auto& s : spec.samples) samples.push_back({{"body", s.body}, {"content_type", s.content_type}});
    j = {{"endpoint_url", spec.endpoint_url},
         {"http_method", spec.http_method},
         {"headers", spec.headers},
         {"samples", samples},
         {"repetitions", spec.repetitions},
         {"warmup", spec.warmup},
         {"timeout_s", spec.timeout_s},
         {"power_profile_w", spec.power_profile_w ? nlohmann::json(*spec.power_profile_w) : nlohmann::json()},
         {"carbon_intensity_kg_per_kwh",
          spec.carbon_intensity_kg_per_kwh ? nlohmann::json(*spec.carbon_intensity_kg_per_kwh) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, ProbeSpec& spec) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "probe spec must be an object");
    try {
        spec = ProbeSpec{};
        spec.endpoint_url = j.value("endpoint_url", std::string());
        spec.http_method = j.value("http_method", std::string("POST"));
        spec.headers = j.value("headers", std::map<std::string, std::string>{});
        if (j.contains("samples")) spec.samples = samples_from_json(j["samples"]);
        spec.repetitions = j.value("repetitions", 1);
        spec.warmup = j.value("warmup", 1);
        spec.timeout_s = j.value("timeout_s", 30.0);
        auto opt = [&](const char* key) -> std::optional<double> {
            auto it = j.find(key);
            if (it == j.end() || it->is_null()) return std::nullopt;
            return it->get<double>();
        };
        spec.power_profile_w = opt("power_profile_w");
        spec.carbon_intensity_kg_per_kwh = opt("carbon_intensity_kg_per_kwh");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, std::string("probe spec has a bad field: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const ProbeResult& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    j = {{"per_call_latencies_s", r.per_call_latencies_s},
         {"total_running_time_s", r.total_running_time_s},
         {"mean_latency_s", r.mean_latency_s},
         {"failures", r.failures},
         {"energy_kwh", opt(r.energy_kwh)},
         {"co2e_kg", opt(r.co2e_kg)},
         {"power_draw_w", opt(r.power_draw_w)},
         {"collected_at", timestamp_json(r.collected_at)}};
}

}  // namespace ecolabel
