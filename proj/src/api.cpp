#include "ecolabel/api.hpp"

#include <httplib.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <charconv>

#include "ecolabel/codec.hpp"

namespace ecolabel {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidConfig:
        case ErrorCode::NonFiniteInput:
        case ErrorCode::PhaseMismatch:
        case ErrorCode::MalformedFile:
        case ErrorCode::MissingColumn:
        case ErrorCode::NonNumericValue:
        case ErrorCode::NegativeValue:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::InvalidSpec:
            return 400;
        case ErrorCode::Unauthorized: return 401;
        case ErrorCode::Forbidden: return 403;
        case ErrorCode::NotFound:
        case ErrorCode::ModelNotFound:
        case ErrorCode::UnknownProvider:
            return 404;
        case ErrorCode::SyncAlreadyRunning: return 409;
        case ErrorCode::NoRatableMetrics:
        case ErrorCode::DerivationDivisionByZero:
        case ErrorCode::EmptyPopulation:
        case ErrorCode::EmptyRows:
            return 422;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::MalformedProviderResponse:
        case ErrorCode::EndpointUnreachable:
        case ErrorCode::NoSuccessfulCalls:
            return 502;
        case ErrorCode::StorageFailure:
        case ErrorCode::Internal:
            return 500;
    }
    return 500;
}

bool tokens_equal(std::string_view presented, std::string_view expected) {
    unsigned char a[EVP_MAX_MD_SIZE], b[EVP_MAX_MD_SIZE];
    unsigned int la = 0, lb = 0;
    EVP_Digest(presented.data(), presented.size(), a, &la, EVP_sha256(), nullptr);
    EVP_Digest(expected.data(), expected.size(), b, &lb, EVP_sha256(), nullptr);
    return la == lb && CRYPTO_memcmp(a, b, la) == 0;
}

namespace {

using httplib::Request;
using httplib::Response;

constexpr const char* kJson = "application/json";

void send_json(Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(Response& res, const Error& e) {
    send_json(res, http_status(e.code()), e.envelope());
    if (e.code() == ErrorCode::Unauthorized) res.set_header("WWW-Authenticate", "Bearer");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn = std::move(fn)](const Request& req, Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const nlohmann::json::exception& e) {
            send_error(res, Error(ErrorCode::InvalidArgument, std::string("bad request body: ") + e.what()));
        } catch (const std::exception& e) {
            send_error(res, Error(ErrorCode::Internal, e.what()));
        }
    };
}

nlohmann::json body_json(const Request& req) {
    if (req.body.empty()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON document");
    return parse_json(req.body);
}

Phase path_phase(const Request& req, int group = 1) {
    return *parse_phase(req.matches[group].str());
}

std::optional<std::string> query(const Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    return req.get_param_value(key);
}

int query_int(const Request& req, const char* key, int fallback) {
    auto text = query(req, key);
    if (!text) return fallback;
    int v = 0;
    auto [p, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
    if (ec != std::errc() || p != text->data() + text->size()) {
        throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be an integer");
    }
    return v;
}

PageRequest page_of(const Request& req) {
    PageRequest p{query_int(req, "page", 1), query_int(req, "page_size", 50)};
    p.validate();
    return p;
}

std::optional<Phase> query_phase(const Request& req) {
    auto text = query(req, "phase");
    if (!text) return std::nullopt;
    auto phase = parse_phase(*text);
    if (!phase) throw Error(ErrorCode::InvalidArgument, "phase must be 'training' or 'inference'");
    return phase;
}

template <typename T>
nlohmann::json page_json(const Page<T>& page) {
    return {{"items", page.items}, {"total", page.total}, {"page", page.page}, {"page_size", page.page_size}};
}

std::string string_field(const nlohmann::json& body, const char* key, bool required) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) {
        if (required) throw Error(ErrorCode::InvalidArgument, std::string(key) + " is required");
        return {};
    }
    if (!it->is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a string");
    return it->get<std::string>();
}

void send_label(Response& res, const LabelOutcome& out) {
    if (!out.warnings.empty()) {
        res.set_header("X-Ecolabel-Warnings", nlohmann::json(out.warnings).dump(-1, ' ', true));
    }
    send_json(res, 201, out.label);
}

ModelKey model_key(const Request& req) {
    return ModelKey::parse(req.matches[1].str());
}

}  // namespace

ApiService::ApiService(LabelService& labels, ProviderRegistry& providers, ApiOptions options)
    : labels_(labels), providers_(providers), options_(std::move(options)) {}

void ApiService::install(httplib::Server& server) {
    auto& repo = labels_.repository();
    auto& store = repo.store();

    auto require_qa = [this](const Request& req) {
        auto header = req.get_header_value("Authorization");
        constexpr std::string_view prefix = "Bearer ";
        if (header.size() <= prefix.size() || header.compare(0, prefix.size(), prefix) != 0) {
            throw Error(ErrorCode::Unauthorized, "a QA bearer token is required");
        }
        if (options_.qa_token.empty() || !tokens_equal(header.substr(prefix.size()), options_.qa_token)) {
            throw Error(ErrorCode::Forbidden, "the bearer token is not valid for QA operations");
        }
    };

    server.set_payload_max_length(64u << 20);

    server.set_error_handler([](const Request&, Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        auto code = res.status == 404 ? "not_found" : res.status == 405 ? "method_not_allowed" : "http_error";
        auto message = res.status == 404 ? "no such resource" : httplib::status_message(res.status);
        res.set_content(make_envelope(code, message).dump(), kJson);
        return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
        std::string what = "unexpected failure";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_json(res, 500, make_envelope("internal_error", what));
    });

    // --- labels -------------------------------------------------------------

    server.Post(R"(/api/v1/labels/(training|inference))", guarded([this](const Request& req, Response& res) {
        auto body = body_json(req);
        if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "body must be a JSON object");
        auto raw = body.value("raw_values", nlohmann::json::object());
        auto out = labels_.label_from_form(path_phase(req), string_field(body, "model_id", true),
                                           string_field(body, "provider_id", false), payload_from_json(raw));
        send_label(res, out);
    }));

    server.Post(R"(/api/v1/labels/(training|inference)/file)", guarded([this](const Request& req, Response& res) {
        if (!req.is_multipart_form_data() || !req.has_file("file")) {
            throw Error(ErrorCode::InvalidArgument, "multipart/form-data with a 'file' part is required");
        }
        auto field = [&](const char* name) { return req.has_file(name) ? req.get_file_value(name).content : ""; };
        auto file = req.get_file_value("file");

        auto format_text = field("format");
        if (format_text.empty()) {
            auto dot = file.filename.rfind('.');
            format_text = dot == std::string::npos ? "csv" : file.filename.substr(dot + 1);
            if (format_text != "json") format_text = "csv";
        }
        auto format = parse_report_format(format_text);
        if (!format) throw Error(ErrorCode::InvalidArgument, "format must be 'csv' or 'json'");

        auto mapping = FieldMapping::defaults();
        if (auto text = field("mapping"); !text.empty()) mapping = mapping_from_json(parse_json(text));

        auto out = labels_.label_from_file(path_phase(req), field("model_id"), field("provider_id"), file.content,
                                           *format, mapping);
        send_label(res, out);
    }));

    server.Post("/api/v1/labels/inference/probe", guarded([this](const Request& req, Response& res) {
        auto body = body_json(req);
        if (!body.is_object()) throw Error(ErrorCode::InvalidSpec, "body must be a JSON object");
        auto model_id = string_field(body, "model_id", true);
        auto provider_id = string_field(body, "provider_id", false);
        body.erase("model_id");
        body.erase("provider_id");
        auto spec = body.get<ProbeSpec>();
        auto out = labels_.label_from_probe(std::move(spec), model_id, provider_id);
        send_json(res, 201, {{"label", out.labeled.label}, {"probe", out.probe}});
    }));

    server.Get(R"(/api/v1/labels/([0-9a-f]+))", guarded([&store](const Request& req, Response& res) {
        auto label = store.get_label(req.matches[1].str());
        if (!label) throw Error(ErrorCode::NotFound, "label '" + req.matches[1].str() + "' not found");
        send_json(res, 200, *label);
    }));

    server.Get("/api/v1/labels", guarded([&repo](const Request& req, Response& res) {
        LabelFilter f;
        f.model_id = query(req, "model_id");
        f.provider_id = query(req, "provider");
        if (!f.provider_id) f.provider_id = query(req, "provider_id");
        f.phase = query_phase(req);
        f.grade = query(req, "grade");
        send_json(res, 200, page_json(repo.query_labels(f, page_of(req))));
    }));

    // --- models -------------------------------------------------------------

    server.Get("/api/v1/models", guarded([&repo](const Request& req, Response& res) {
        ModelFilter f;
        f.provider_id = query(req, "provider");
        if (!f.provider_id) f.provider_id = query(req, "provider_id");
        send_json(res, 200, page_json(repo.query_models(f, query(req, "grade"), query_phase(req), page_of(req))));
    }));

    server.Get(R"(/api/v1/models/(.+)/labels)", guarded([&repo, &store](const Request& req, Response& res) {
        auto key = model_key(req);
        if (!store.get_model(key)) throw Error(ErrorCode::NotFound, "model '" + key.str() + "' not found");
        LabelFilter f;
        f.model_id = key.model_id;
        f.provider_id = key.provider_id;
        f.phase = query_phase(req);
        f.grade = query(req, "grade");
        send_json(res, 200, page_json(repo.query_labels(f, page_of(req))));
    }));

    server.Get(R"(/api/v1/models/(.+))", guarded([&store](const Request& req, Response& res) {
        auto key = model_key(req);
        auto model = store.get_model(key);
        if (!model) throw Error(ErrorCode::NotFound, "model '" + key.str() + "' not found");
        nlohmann::json body = *model;
        auto latest = nlohmann::json::object();
        for (auto phase : {Phase::Training, Phase::Inference}) {
            LabelFilter f;
            f.model_id = key.model_id;
            f.provider_id = key.provider_id;
            f.phase = phase;
            auto page = store.list_labels(f, {1, 1});
            latest[std::string(to_string(phase))] =
                page.items.empty() ? nlohmann::json(nullptr) : nlohmann::json(page.items.front());
        }
        body["latest_labels"] = latest;
        send_json(res, 200, body);
    }));

    server.Delete(R"(/api/v1/models/(.+))", guarded([require_qa, &repo](const Request& req, Response& res) {
        require_qa(req);
        auto key = model_key(req);
        if (!repo.delete_model(key)) throw Error(ErrorCode::NotFound, "model '" + key.str() + "' not found");
        res.status = 204;
    }));

    // --- configs ------------------------------------------------------------

    server.Get(R"(/api/v1/configs/(training|inference))", guarded([&repo](const Request& req, Response& res) {
        send_json(res, 200, repo.current_config(path_phase(req)));
    }));

    server.Get(R"(/api/v1/configs/(training|inference)/versions)", guarded([&store](const Request& req, Response& res) {
        auto phase = path_phase(req);
        auto items = nlohmann::json::array();
        for (int v : store.config_versions(phase)) {
            auto c = store.get_config(phase, v);
            items.push_back({{"version", v}, {"created_at", timestamp_json(c->created_at)}});
        }
        send_json(res, 200, {{"phase", to_string(phase)}, {"versions", items}});
    }));

    server.Get(R"(/api/v1/configs/(training|inference)/versions/(-?\d+))",
               guarded([&store](const Request& req, Response& res) {
                   auto phase = path_phase(req);
                   int v = std::stoi(req.matches[2].str());
                   auto config = store.get_config(phase, v);
                   if (!config) throw Error(ErrorCode::NotFound, "config version " + std::to_string(v) + " not found");
                   send_json(res, 200, *config);
               }));

    server.Put(R"(/api/v1/configs/(training|inference))", guarded([this, require_qa](const Request& req, Response& res) {
        require_qa(req);
        auto phase = path_phase(req);
        auto body = body_json(req);
        if (body.is_object() && !body.contains("phase")) body["phase"] = to_string(phase);
        send_json(res, 200, labels_.put_config(phase, decode<EfficiencyConfig>(body)));
    }));

    server.Patch(R"(/api/v1/configs/(training|inference))",
                 guarded([this, require_qa](const Request& req, Response& res) {
                     require_qa(req);
                     send_json(res, 200, labels_.patch_config(path_phase(req), body_json(req)));
                 }));

    server.Post(R"(/api/v1/configs/(training|inference)/calibrate)",
                guarded([this, require_qa](const Request& req, Response& res) {
                    require_qa(req);
                    send_json(res, 200, labels_.calibrate(path_phase(req)));
                }));

    server.Post(R"(/api/v1/configs/(training|inference)/preview)",
                guarded([this, &repo](const Request& req, Response& res) {
                    auto phase = path_phase(req);
                    auto body = body_json(req);
                    if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "body must be a JSON object");

                    EfficiencyConfig candidate;
                    if (auto it = body.find("candidate_config"); it != body.end() && !it->is_null()) {
                        auto c = *it;
                        if (c.is_object() && !c.contains("phase")) c["phase"] = to_string(phase);
                        candidate = decode<EfficiencyConfig>(c);
                    } else {
                        candidate = repo.current_config(phase);
                    }
                    if (candidate.phase != phase) {
                        throw Error(ErrorCode::PhaseMismatch, "candidate config is for another phase");
                    }
                    auto sample = body.value("sample_report", nlohmann::json::object());
                    if (!sample.is_object()) throw Error(ErrorCode::InvalidArgument, "sample_report must be an object");
                    PhaseReport report;
                    report.model_id = sample.value("model_id", std::string("preview"));
                    report.phase = phase;
                    auto raw = payload_from_json(sample.value("raw_values", nlohmann::json::object()));
                    report.raw_values = RawValues(raw.begin(), raw.end());
                    send_json(res, 200, labels_.preview(candidate, report));
                }));

    // --- sync ---------------------------------------------------------------

    server.Post(R"(/api/v1/sync/([A-Za-z0-9_.-]+))", guarded([this, require_qa, &repo](const Request& req, Response& res) {
        require_qa(req);
        auto provider = req.matches[1].str();
        providers_.get(provider);  // 404 before any work
        SyncOptions opts;
        if (req.has_param("limit")) {
            opts.limit = query_int(req, "limit", 0);
            if (*opts.limit < 0) throw Error(ErrorCode::InvalidArgument, "limit must be >= 0");
        }
        auto phase = query_phase(req).value_or(options_.sync_phase);
        auto run = providers_.run_sync(provider, repo, repo.current_config(phase), labels_.catalog(), opts);
        send_json(res, 202, run);
    }));

    // --- meta ---------------------------------------------------------------

    server.Get("/api/v1/schema", guarded([](const Request&, Response& res) { send_json(res, 200, api_schema()); }));
    server.Get("/api/v1/health", guarded([](const Request&, Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    }));
}

}  // namespace ecolabel
