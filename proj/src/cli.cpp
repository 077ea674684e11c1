#include "ecolabel/cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "ecolabel/api.hpp"
#include "ecolabel/codec.hpp"
#include "ecolabel/connectors.hpp"
#include "ecolabel/defaults.hpp"
#include "ecolabel/service.hpp"

namespace ecolabel {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string store = "ecolabel-store.json";
    std::string recommendations;
    bool json = false;
};

struct LabelArgs {
    std::string model;
    std::string provider;
    std::string values;
    std::string file;
    std::string format;
    std::string mapping;
    std::string probe_endpoint;
    std::string samples;
    std::string method = "POST";
    std::vector<std::string> headers;
    std::optional<double> power_watts;
    std::optional<double> carbon_intensity;
    int repetitions = 1;
    int warmup = 1;
    double timeout = 30;
};

struct SyncArgs {
    std::string provider;
    std::optional<int> limit;
    int page_size = 100;
    std::string fixtures;
    std::string phase = "training";
};

struct ConfigArgs {
    std::string phase = "training";
    std::optional<int> version;
    std::vector<std::string> weights;
    std::vector<std::string> references;
    std::vector<std::string> directions;
    std::vector<std::string> boundaries;
    std::string all_boundaries;
    std::string scale;
    std::optional<double> carbon_intensity;
    std::string patch;
    std::string file;
};

struct ServeArgs {
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string qa_token;
    std::vector<std::string> fixtures;
    std::string sync_phase = "training";
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Phase phase_arg(const std::string& text) {
    auto phase = parse_phase(text);
    if (!phase) throw UsageError("phase must be 'training' or 'inference', got '" + text + "'");
    return *phase;
}

std::pair<std::string, std::string> split_pair(std::string_view item, char sep) {
    auto at = item.find(sep);
    if (at == std::string_view::npos || at == 0) {
        throw Error(ErrorCode::InvalidArgument, "expected key" + std::string(1, sep) + "value, got '" +
                                                    std::string(item) + "'");
    }
    return {std::string(item.substr(0, at)), std::string(item.substr(at + 1))};
}

std::vector<double> number_list(std::string_view text) {
    std::vector<double> out;
    while (true) {
        auto comma = text.find(',');
        std::string piece(text.substr(0, comma));
        char* end = nullptr;
        double v = std::strtod(piece.c_str(), &end);
        if (piece.empty() || end != piece.c_str() + piece.size()) {
            throw Error(ErrorCode::InvalidArgument, "'" + piece + "' is not a number");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) return out;
        text.remove_prefix(comma + 1);
    }
}

std::string fmt_num(std::optional<double> v, const char* spec = "%.6g") {
    if (!v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, *v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (auto& row : rows) {
        widths.resize(std::max(widths.size(), row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    }
    for (auto& row : rows) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            line += i + 1 == row.size() ? row[i] : pad(row[i], widths[i] + 2);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << "  " << line << '\n';
    }
}

void print_label(std::ostream& out, const EnergyLabel& label) {
    out << "label " << label.label_id << '\n'
        << "  model " << label.provider_id << ':' << label.model_id << "  phase " << to_string(label.phase)
        << "  config v" << label.config_version << '\n'
        << "  overall grade " << label.overall_grade << "  (score " << fmt_num(label.overall_score, "%.3f")
        << ", scale";
    for (auto& g : label.scale.grades) out << ' ' << g;
    out << ")\n\n";
    std::vector<std::vector<std::string>> rows{{"metric", "value", "index", "grade", "weight"}};
    for (auto& m : label.rated_metrics) {
        rows.push_back({m.metric_id, fmt_num(m.value), fmt_num(m.index, "%.4f"), m.grade.value_or("-"),
                        m.missing ? "-" : fmt_num(m.weight_used)});
    }
    print_table(out, rows);
    if (!label.recommendations.empty()) {
        out << "\nrecommendations\n";
        for (auto& r : label.recommendations) out << "  [" << r.metric_id << "] " << r.text << '\n';
    }
}

void print_config(std::ostream& out, const EfficiencyConfig& config) {
    out << to_string(config.phase) << " config v" << config.version << "  created " << format_timestamp(config.created_at)
        << '\n'
        << "  scale";
    for (auto& g : config.scale.grades) out << ' ' << g;
    out << "  carbon intensity " << fmt_num(config.carbon_intensity) << " kg/kWh\n\n";
    std::vector<std::vector<std::string>> rows{{"metric", "direction", "weight", "reference", "boundaries"}};
    for (auto& m : config.metrics) {
        std::string bounds;
        for (double b : m.boundaries) bounds += (bounds.empty() ? "" : ",") + fmt_num(b);
        rows.push_back({m.id, m.direction == MetricDirection::HigherBetter ? "higher_better" : "lower_better",
                        fmt_num(m.weight), fmt_num(m.reference), bounds});
    }
    print_table(out, rows);
}

void print_sync(std::ostream& out, const SyncRun& run) {
    out << "sync " << run.provider_id << "  run " << run.run_id << '\n'
        << "  created " << run.created << "  updated " << run.updated << "  unchanged " << run.unchanged
        << "  labels " << run.labels_created << "  failed " << run.failed.size() << '\n';
    if (!run.failed.empty()) {
        std::vector<std::vector<std::string>> rows{{"model", "code", "message"}};
        for (auto& f : run.failed) rows.push_back({f.model_id, f.code, f.message});
        out << '\n';
        print_table(out, rows);
    }
    for (auto& w : run.warnings) out << "  warning: " << w << '\n';
}

void print_probe(std::ostream& out, const ProbeResult& probe) {
    out << "\nprobe  calls " << probe.per_call_latencies_s.size() << "  failures " << probe.failures << "  mean "
        << fmt_num(probe.mean_latency_s * 1000.0, "%.2f") << " ms  total "
        << fmt_num(probe.total_running_time_s, "%.4f") << " s\n";
    if (probe.energy_kwh) {
        out << "  power " << fmt_num(probe.power_draw_w) << " W  energy " << fmt_num(probe.energy_kwh)
            << " kWh  co2e " << fmt_num(probe.co2e_kg) << " kg\n";
    }
}

void warn(std::ostream& err, const std::vector<std::string>& warnings) {
    for (auto& w : warnings) err << "warning: " << w << '\n';
}

nlohmann::json config_patch(const ConfigArgs& a) {
    nlohmann::json patch = a.patch.empty() ? nlohmann::json::object()
                           : a.patch.front() == '{' ? parse_json(a.patch)
                                                    : parse_json(read_file(a.patch));
    if (!patch.is_object()) throw Error(ErrorCode::InvalidArgument, "--patch must be a JSON object");
    auto pairs_into = [&](const std::vector<std::string>& items, const char* key, bool numeric) {
        for (auto& item : items) {
            if (numeric) {
                for (auto& [k, v] : payload_from_pairs(item)) patch[key][k] = v;
            } else {
                std::string_view rest = item;
                while (!rest.empty()) {
                    auto comma = rest.find(',');
                    auto [k, v] = split_pair(rest.substr(0, comma), '=');
                    patch[key][k] = v;
                    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                }
            }
        }
    };
    pairs_into(a.weights, "weights", true);
    pairs_into(a.references, "references", true);
    pairs_into(a.directions, "directions", false);
    for (auto& item : a.boundaries) {
        auto [k, v] = split_pair(item, '=');
        patch["boundaries"][k] = number_list(v);
    }
    if (!a.all_boundaries.empty()) patch["all_boundaries"] = number_list(a.all_boundaries);
    if (!a.scale.empty()) {
        if (a.scale.find(',') == std::string::npos && !a.scale.empty() && std::isdigit((unsigned char)a.scale[0])) {
            patch["scale"] = std::stoi(a.scale);
        } else {
            std::vector<std::string> grades;
            std::string_view rest = a.scale;
            while (!rest.empty()) {
                auto comma = rest.find(',');
                grades.emplace_back(rest.substr(0, comma));
                rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            }
            patch["scale"] = grades;
        }
    }
    if (a.carbon_intensity) patch["carbon_intensity"] = *a.carbon_intensity;
    return patch;
}

int serve(LabelService& service, const ServeArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
    ProviderRegistry providers;
    for (auto& item : a.fixtures) {
        auto [name, dir] = split_pair(item, '=');
        providers.add(std::make_unique<FixtureAdapter>(dir, name));
    }
    if (!providers.contains(kHuggingFaceProvider)) providers.add(std::make_unique<HuggingFaceAdapter>());

    ApiService api(service, providers, ApiOptions{a.qa_token, phase_arg(a.sync_phase)});
    httplib::Server server;
    api.install(server);
    // without it every other keep-alive response waits on a delayed ACK
    server.set_tcp_nodelay(true);
    // httplib's default adds SO_REUSEPORT, which lets a second server bind a busy port.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    // Signals are taken synchronously by sigwait, so every thread, including
    // httplib's workers, must start with them blocked.
    sigset_t set, old;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, &old);

    if (!server.bind_to_port(a.host, a.port)) {
        pthread_sigmask(SIG_SETMASK, &old, nullptr);
        throw Error(ErrorCode::InvalidArgument, "cannot listen on " + a.host + ":" + std::to_string(a.port),
                    {{"host", a.host}, {"port", a.port}});
    }

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });

    if (g.json) {
        out << nlohmann::json{{"status", "listening"}, {"host", a.host}, {"port", a.port}, {"store", g.store}}.dump()
            << std::endl;
    } else {
        out << "listening on http://" << a.host << ':' << a.port << "  store " << g.store << std::endl;
    }
    bool ok = server.listen_after_bind();

    // listen returned on its own (not through the waiter): wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    if (!g.json) err << "shut down\n";
    return ok ? kExitOk : kExitDomain;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Globals g;
    LabelArgs la;
    SyncArgs sa;
    ConfigArgs ca;
    ServeArgs va;

    CLI::App app{"Energy efficiency labels for machine learning models", "ecolabel"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--store", g.store, "Store file, or :memory:")->envname("ECOLABEL_STORE")->capture_default_str();
    app.add_option("--recommendations", g.recommendations, "Recommendation catalog (JSON)")
        ->envname("ECOLABEL_RECOMMENDATIONS");
    app.add_flag("--json", g.json, "Print JSON on stdout");

    auto* label = app.add_subcommand("label", "Generate a label");
    label->require_subcommand(1);
    std::vector<CLI::App*> label_phases;
    for (const char* phase : {"training", "inference"}) {
        auto* sub = label->add_subcommand(phase, std::string("Label the ") + phase + " phase");
        sub->add_option("--model", la.model, "Model id")->required();
        sub->add_option("--provider", la.provider, "Provider id (default: local)");
        auto* values = sub->add_option("--values", la.values, "Raw values as key=value,...");
        auto* file = sub->add_option("--file", la.file, "Emission report file (CSV or JSON)");
        values->excludes(file);
        sub->add_option("--format", la.format, "csv or json (default: from the file extension)")->needs(file);
        sub->add_option("--mapping", la.mapping, "Field mapping JSON file")->needs(file);
        if (std::string(phase) == "inference") {
            auto* ep = sub->add_option("--probe-endpoint", la.probe_endpoint, "Deployed model endpoint URL");
            ep->excludes(values)->excludes(file);
            sub->add_option("--samples", la.samples, "Sample inputs JSON file")->needs(ep);
            sub->add_option("--power-watts", la.power_watts, "Power draw of the serving hardware")->needs(ep);
            sub->add_option("--carbon-intensity", la.carbon_intensity, "kg CO2e per kWh")->needs(ep);
            sub->add_option("--repetitions", la.repetitions, "Passes over the samples")->needs(ep);
            sub->add_option("--warmup", la.warmup, "Unmeasured calls first")->needs(ep);
            sub->add_option("--timeout", la.timeout, "Per-call timeout in seconds")->needs(ep);
            sub->add_option("--method", la.method, "HTTP method")->needs(ep);
            sub->add_option("--header", la.headers, "Request header 'Name: value'")->needs(ep);
        }
        label_phases.push_back(sub);
    }

    auto* sync = app.add_subcommand("sync", "Synchronize models from a provider");
    sync->add_option("provider", sa.provider, "Provider id")->required();
    sync->add_option("--limit", sa.limit, "Maximum models to visit");
    sync->add_option("--page-size", sa.page_size, "Provider page size");
    sync->add_option("--fixtures", sa.fixtures, "Read models from a directory of JSON documents");
    sync->add_option("--phase", sa.phase, "Phase to label synced models")->capture_default_str();

    auto* config = app.add_subcommand("config", "Show or edit efficiency configs");
    config->require_subcommand(1);
    auto* show = config->add_subcommand("show", "Print a config");
    show->add_option("--phase", ca.phase)->capture_default_str();
    show->add_option("--version", ca.version, "Version (default: current)");
    auto* versions = config->add_subcommand("versions", "List config versions");
    versions->add_option("--phase", ca.phase)->capture_default_str();
    auto* set = config->add_subcommand("set", "Store a new config version");
    set->add_option("--phase", ca.phase)->capture_default_str();
    set->add_option("--weight", ca.weights, "metric=weight[,...]");
    set->add_option("--reference", ca.references, "metric=value[,...]");
    set->add_option("--direction", ca.directions, "metric=higher_better|lower_better[,...]");
    set->add_option("--boundaries", ca.boundaries, "metric=b1,b2,... (one metric per flag)");
    set->add_option("--all-boundaries", ca.all_boundaries, "b1,b2,... for every metric");
    set->add_option("--scale", ca.scale, "Grade names A,B,... or a grade count 2..7");
    set->add_option("--carbon-intensity", ca.carbon_intensity, "kg CO2e per kWh");
    set->add_option("--patch", ca.patch, "Patch as inline JSON or a JSON file");
    set->add_option("--file", ca.file, "Replace with a full config JSON file");
    auto* calibrate = config->add_subcommand("calibrate", "Set references to the medians of stored reports");
    calibrate->add_option("--phase", ca.phase)->capture_default_str();

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--port", va.port)->envname("ECOLABEL_PORT")->capture_default_str();
    serve_cmd->add_option("--host", va.host)->envname("ECOLABEL_HOST")->capture_default_str();
    serve_cmd->add_option("--qa-token", va.qa_token, "Bearer token for QA endpoints")->envname("ECOLABEL_QA_TOKEN");
    serve_cmd->add_option("--fixtures", va.fixtures, "Register provider=dir fixture adapters");
    serve_cmd->add_option("--sync-phase", va.sync_phase)->capture_default_str();

    auto* schema = app.add_subcommand("schema", "Print the JSON Schemas of the API types");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\nrun with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (schema->parsed()) {
            out << api_schema().dump(2) << '\n';
            return kExitOk;
        }

        auto catalog = g.recommendations.empty() ? default_recommendations() : load_recommendations(g.recommendations);
        auto store = open_store(g.store);
        Repository repo(*store);
        repo.ensure_default_configs();
        LabelService service(repo, std::move(catalog));

        if (label->parsed()) {
            auto* sub = label_phases[0]->parsed() ? label_phases[0] : label_phases[1];
            auto phase = sub == label_phases[0] ? Phase::Training : Phase::Inference;
            if (!la.probe_endpoint.empty()) {
                if (la.samples.empty()) throw UsageError("--probe-endpoint needs --samples");
                ProbeSpec spec;
                spec.endpoint_url = la.probe_endpoint;
                spec.http_method = la.method;
                for (auto& h : la.headers) {
                    auto [k, v] = split_pair(h, ':');
                    auto first = v.find_first_not_of(' ');
                    spec.headers[k] = first == std::string::npos ? "" : v.substr(first);
                }
                spec.samples = samples_from_json(parse_json(read_file(la.samples), ErrorCode::InvalidSpec));
                spec.repetitions = la.repetitions;
                spec.warmup = la.warmup;
                spec.timeout_s = la.timeout;
                spec.power_profile_w = la.power_watts;
                spec.carbon_intensity_kg_per_kwh = la.carbon_intensity;
                auto result = service.label_from_probe(std::move(spec), la.model, la.provider);
                warn(err, result.labeled.warnings);
                if (g.json) {
                    out << nlohmann::json{{"label", result.labeled.label}, {"probe", result.probe}}.dump(2) << '\n';
                } else {
                    print_label(out, result.labeled.label);
                    print_probe(out, result.probe);
                }
                return kExitOk;
            }

            LabelOutcome result;
            if (!la.values.empty()) {
                result = service.label_from_form(phase, la.model, la.provider, payload_from_pairs(la.values));
            } else if (!la.file.empty()) {
                auto format_text = la.format;
                if (format_text.empty()) {
                    format_text = std::filesystem::path(la.file).extension() == ".json" ? "json" : "csv";
                }
                auto format = parse_report_format(format_text);
                if (!format) throw UsageError("--format must be 'csv' or 'json'");
                auto mapping = la.mapping.empty() ? FieldMapping::defaults()
                                                  : mapping_from_json(parse_json(read_file(la.mapping)));
                result = service.label_from_file(phase, la.model, la.provider, read_file(la.file), *format, mapping);
            } else {
                throw UsageError(phase == Phase::Training ? "one of --values or --file is required"
                                                          : "one of --values, --file or --probe-endpoint is required");
            }
            warn(err, result.warnings);
            if (g.json) {
                out << nlohmann::json(result.label).dump(2) << '\n';
            } else {
                print_label(out, result.label);
            }
            return kExitOk;
        }

        if (sync->parsed()) {
            ProviderRegistry providers;
            if (!sa.fixtures.empty()) {
                providers.add(std::make_unique<FixtureAdapter>(sa.fixtures, sa.provider));
            } else if (sa.provider == kHuggingFaceProvider) {
                providers.add(std::make_unique<HuggingFaceAdapter>());
            }
            SyncOptions opts;
            opts.limit = sa.limit;
            opts.page_size = sa.page_size;
            auto phase = phase_arg(sa.phase);
            auto run = providers.run_sync(sa.provider, repo, repo.current_config(phase), service.catalog(), opts);
            if (g.json) {
                out << nlohmann::json(run).dump(2) << '\n';
            } else {
                print_sync(out, run);
            }
            return kExitOk;
        }

        if (config->parsed()) {
            auto phase = phase_arg(ca.phase);
            EfficiencyConfig result;
            if (versions->parsed()) {
                auto list = store->config_versions(phase);
                if (g.json) {
                    out << nlohmann::json{{"phase", to_string(phase)}, {"versions", list}}.dump(2) << '\n';
                } else {
                    for (int v : list) out << to_string(phase) << " v" << v << '\n';
                }
                return kExitOk;
            }
            if (show->parsed()) {
                if (ca.version) {
                    auto found = store->get_config(phase, *ca.version);
                    if (!found) {
                        throw Error(ErrorCode::NotFound, std::string(to_string(phase)) + " config v" +
                                                             std::to_string(*ca.version) + " not found");
                    }
                    result = *found;
                } else {
                    result = repo.current_config(phase);
                }
            } else if (set->parsed()) {
                auto patch = config_patch(ca);
                if (!ca.file.empty()) {
                    auto full = decode<EfficiencyConfig>(parse_json(read_file(ca.file)), ErrorCode::InvalidConfig);
                    result = service.put_config(phase, apply_config_patch(std::move(full), patch));
                } else {
                    if (patch.empty()) throw UsageError("config set needs at least one change");
                    result = service.patch_config(phase, patch);
                }
            } else if (calibrate->parsed()) {
                result = service.calibrate(phase);
            }
            if (g.json) {
                out << nlohmann::json(result).dump(2) << '\n';
            } else {
                print_config(out, result);
            }
            return kExitOk;
        }

        if (serve_cmd->parsed()) return serve(service, va, g, out, err);
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\nrun with --help for usage\n";
        return kExitUsage;
    } catch (const Error& e) {
        if (g.json) {
            out << e.envelope().dump(2) << '\n';
        } else {
            err << "error: " << error_slug(e.code()) << ": " << e.what() << '\n';
            if (!e.details().is_null()) err << e.details().dump(2) << '\n';
        }
        return kExitDomain;
    } catch (const std::exception& e) {
        auto envelope = make_envelope("internal_error", e.what());
        if (g.json) {
            out << envelope.dump(2) << '\n';
        } else {
            err << "error: internal_error: " << e.what() << '\n';
        }
        return kExitDomain;
    }
}

}  // namespace ecolabel
