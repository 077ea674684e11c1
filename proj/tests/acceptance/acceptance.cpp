// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (0 when all pass).

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "ecolabel/cli.hpp"
#include "ecolabel/codec.hpp"
#include "ecolabel/connectors.hpp"
#include "ecolabel/probe.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"
#include "support/servers.hpp"
#include "support/util.hpp"

using namespace ecolabel;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failed expectations; a criterion passes when none were recorded.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    bool passed() const { return failed_ == 0; }
    std::string summary() const {
        std::string s = std::to_string(checks_ - failed_) + "/" + std::to_string(checks_) + " checks";
        for (const auto& f : failures_) s += "; " + f;
        return s;
    }
    void note(std::string text) { notes_ += (notes_.empty() ? "" : ", ") + std::move(text); }
    const std::string& notes() const { return notes_; }

private:
    long checks_ = 0;
    long failed_ = 0;
    std::vector<std::string> failures_;
    std::string notes_;
};

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Present metrics with positive weight.
std::vector<std::size_t> weighted_present(const EfficiencyConfig& config, const PhaseReport& report) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < config.metrics.size(); ++k) {
        if (config.metrics[k].weight > 0 && oracle::metric_value(config.metrics[k], report.raw_values)) out.push_back(k);
    }
    return out;
}

void oracle_equivalence(Checker& c) {
    auto start = Clock::now();
    gen::Rng rng(20240601);
    int pairs = 0, unratable = 0;
    while (pairs < 1000) {
        auto config = gen::random_config(rng);
        auto report = gen::random_report(rng, config, 0.7);
        auto expected = oracle::overall_score(config, report.raw_values);
        if (!expected) {
            bool threw = false;
            try {
                compute_label(report, config, {});
            } catch (const Error& e) {
                threw = e.code() == ErrorCode::NoRatableMetrics;
            }
            c.expect(threw, "unratable pair did not raise no_ratable_metrics");
            ++unratable;
            continue;
        }
        auto label = compute_label(report, config, {});
        c.expect(label.overall_score == *expected,
                 "score " + num(label.overall_score) + " != oracle " + num(*expected) + " (pair " +
                     std::to_string(pairs) + ")");
        c.expect(label.overall_grade ==
                     config.scale.grades[oracle::overall_position(*expected, static_cast<int>(config.scale.size()))],
                 "grade differs from oracle");
        ++pairs;
    }
    double elapsed = seconds_since(start);
    c.expect(elapsed < 10.0, "took " + num(elapsed) + " s");
    c.note("1000 ratable pairs (+" + std::to_string(unratable) + " unratable), " + num(std::round(elapsed * 1000)) +
           " ms");
}

void monotonicity(Checker& c) {
    gen::Rng rng(7001);
    int labels = 0, moves = 0;
    while (labels < 500) {
        auto config = gen::random_config(rng);
        auto report = gen::random_report(rng, config, 0.8);
        if (weighted_present(config, report).empty()) continue;
        double base = compute_label(report, config, {}).overall_score;
        bool any = false;
        for (const auto& m : config.metrics) {
            double factor = gen::log_uniform(rng, 1.01, 50.0);
            auto better = report;
            if (!gen::nudge(m, better.raw_values, factor)) continue;
            auto worse = report;
            gen::nudge(m, worse.raw_values, 1.0 / factor);
            double up = compute_label(better, config, {}).overall_score;
            double down = compute_label(worse, config, {}).overall_score;
            c.expect(up <= base, "improving " + m.id + " raised the score " + num(base) + " -> " + num(up));
            c.expect(down >= base, "worsening " + m.id + " lowered the score " + num(base) + " -> " + num(down));
            ++moves;
            any = true;
        }
        if (any) ++labels;
    }
    c.note("500 labels, " + std::to_string(moves) + " single-metric moves each way");
}

void renormalization(Checker& c) {
    gen::Rng rng(9102);
    int labels = 0;
    while (labels < 200) {
        auto config = gen::random_config(rng, {.min_metrics = 2});
        auto report = gen::random_report(rng, config, 0.9);
        auto present = weighted_present(config, report);
        if (present.size() < 2) continue;
        auto k = present[rng() % present.size()];

        auto deleted = report;
        for (const auto& field : gen::inputs_of(config.metrics[k])) deleted.raw_values.erase(field);
        auto zeroed = config;
        zeroed.metrics[k].weight = 0.0;

        double a = compute_label(deleted, config, {}).overall_score;
        double b = compute_label(report, zeroed, {}).overall_score;
        c.expect(a == b, "deleting " + config.metrics[k].id + " gave " + num(a) + ", zero weight gave " + num(b));
        ++labels;
    }
    c.note("200 labels");
}

void scale_identity(Checker& c) {
    gen::Rng rng(313);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        double r = gen::log_uniform(rng, 1e-6, 1e6);
        double v = gen::log_uniform(rng, 1e-6, 1e6);
        double k = gen::log_uniform(rng, 1e-6, 1e6);
        for (auto d : {MetricDirection::HigherBetter, MetricDirection::LowerBetter}) {
            c.expect(compute_index(r, r, d) == 1.0, "index(r, r) != 1 for r = " + num(r));
            double a = compute_index(v, r, d);
            double b = compute_index(k * v, k * r, d);
            double rel = std::abs(a - b) / std::abs(a);
            worst = std::max(worst, rel);
            c.expect(rel <= 1e-9, "rescaling by " + num(k) + " moved the index by " + num(rel));
        }
    }
    c.note("100 values x 2 directions, worst relative drift " + num(worst));
}

void grading_boundaries(Checker& c) {
    const std::vector<std::pair<double, std::string>> cases{{2.0, "A"}, {1.9999, "B"}, {1.25, "B"}, {0.8, "C"},
                                                             {0.7999, "D"}, {0.5, "D"}, {0.4999, "E"}};
    auto bounds = default_boundaries();
    auto scale = GradeScale::standard();
    std::string seen;
    for (const auto& [index, grade] : cases) {
        auto got = grade_index(index, bounds, scale).grade;
        c.expect(got == grade, num(index) + " -> " + got + ", expected " + grade);
        char item[48];
        std::snprintf(item, sizeof item, "%s%g->%s", seen.empty() ? "" : " ", index, got.c_str());
        seen += item;
    }
    c.note(seen);
}

void end_to_end_file(Checker& c) {
    MemoryStore store;
    Repository repo(store);
    repo.ensure_default_configs();
    LabelService service(repo, default_recommendations());

    // references at the tracker run's own values
    auto config = repo.current_config(Phase::Training);
    config.find_metric("energy_consumption_kwh")->reference = 0.3;
    config.find_metric("co2e_kg")->reference = 0.05;
    service.put_config(Phase::Training, config);

    auto out = service.label_from_file(Phase::Training, "tracked", "", testutil::read_fixture("emissions.csv"),
                                       ReportFormat::Csv, FieldMapping::defaults());
    const auto& raw = out.report.raw_values;
    c.expect(raw.at("co2e_kg") == 0.05, "co2e_kg read as " + num(raw.at("co2e_kg")));
    c.expect(raw.at("energy_consumption_kwh") == 0.3, "energy read as " + num(raw.at("energy_consumption_kwh")));
    c.expect(raw.count("running_time_s") && raw.at("running_time_s") == 120.0, "duration not read as 120 s");

    // hand oracle: every present index is 1.0 -> position 2 of A..E -> score 2 -> C
    int present = 0;
    for (const auto& m : out.label.rated_metrics) {
        if (m.missing) continue;
        ++present;
        c.expect(m.index == 1.0, m.metric_id + " index " + num(m.index.value_or(-1)));
        c.expect(m.grade == "C", m.metric_id + " grade " + m.grade.value_or("?"));
    }
    c.expect(present == 2, std::to_string(present) + " present metrics, expected 2");
    c.expect(out.label.overall_score == 2.0, "score " + num(out.label.overall_score));
    c.expect(out.label.overall_grade == "C", "overall " + out.label.overall_grade);
    c.note("overall " + out.label.overall_grade + ", score " + num(out.label.overall_score));
}

void sync_idempotency(Checker& c) {
    MemoryStore store;
    Repository repo(store);
    repo.ensure_default_configs();
    auto config = repo.current_config(Phase::Training);
    auto catalog = default_recommendations();

    FixtureAdapter five(testutil::fixture_path("providers/hf5"), "huggingface");
    auto first = sync_provider(five, repo, config, catalog);
    c.expect(first.created == 5, "first run created " + std::to_string(first.created));
    auto hash = store.content_hash();
    auto second = sync_provider(five, repo, config, catalog);
    c.expect(second.unchanged == 5, "second run unchanged " + std::to_string(second.unchanged));
    c.expect(second.created == 0 && second.updated == 0, "second run wrote models");
    c.expect(store.content_hash() == hash, "content hash changed after the second run");

    MemoryStore other;
    Repository repo2(other);
    FixtureAdapter malformed(testutil::fixture_path("providers/hf_malformed"), "huggingface");
    auto mixed = sync_provider(malformed, repo2, config, catalog);
    c.expect(mixed.created == 4, "malformed set created " + std::to_string(mixed.created));
    c.expect(mixed.failed.size() == 1, "malformed set failed " + std::to_string(mixed.failed.size()));
    c.note("run 1 created " + std::to_string(first.created) + ", run 2 unchanged " + std::to_string(second.unchanged) +
           ", malformed " + std::to_string(mixed.created) + "+" + std::to_string(mixed.failed.size()));
}

void probe_accuracy(Checker& c) {
    testutil::ModelStub stub;
    ProbeSpec spec;
    spec.endpoint_url = stub.url("/predict");
    spec.samples = {ProbeSample{R"({"text": "hello"})"}};
    spec.repetitions = 10;
    spec.warmup = 2;
    auto result = run_probe(spec);
    c.expect(stub.hits == 12, std::to_string(stub.hits.load()) + " calls reached the stub, expected 12");
    c.expect(result.per_call_latencies_s.size() == 10,
             std::to_string(result.per_call_latencies_s.size()) + " measured calls, expected 10");
    c.expect(result.failures == 0, "failures " + std::to_string(result.failures));
    double mean_ms = result.mean_latency_s * 1000.0;
    c.expect(mean_ms >= 45.0 && mean_ms <= 120.0, "mean " + num(mean_ms) + " ms");

    double sum = 0;
    for (double t : result.per_call_latencies_s) sum += t;
    c.expect(result.total_running_time_s == sum, "total is not the sum of measured calls");

    apply_power_profile(result, 250.0, 0.4);
    c.expect(result.energy_kwh == 250.0 * result.total_running_time_s / 3.6e6, "energy != W * t / 3.6e6");
    c.expect(result.co2e_kg == *result.energy_kwh * 0.4, "co2e != energy * intensity");
    char mean_text[32];
    std::snprintf(mean_text, sizeof mean_text, "%.2f", mean_ms);
    c.note(std::string("mean ") + mean_text + " ms over 10 calls, 2 warmup");
}

void api_contract(Checker& c) {
    testutil::ApiHarness api("qa-secret");
    auto current = api.send("GET", "/api/v1/configs/training").body;
    c.expect(api.send("PUT", "/api/v1/configs/training", current).status == 401, "PUT without a token is not 401");
    c.expect(api.send("PUT", "/api/v1/configs/training", current, "wrong").status == 403, "wrong token is not 403");
    c.expect(api.send("PATCH", "/api/v1/configs/training", json{{"scale", 7}}, "wrong").status == 403,
             "PATCH with a wrong token is not 403");

    auto patched = api.send("PATCH", "/api/v1/configs/training",
                            json{{"scale", 7}, {"all_boundaries", {3, 2, 1.25, 0.8, 0.5, 0.3}}}, "qa-secret");
    c.expect(patched.status == 200, "7-grade PATCH answered " + std::to_string(patched.status));
    c.expect(patched.body["scale"].size() == 7, "patched scale has " + std::to_string(patched.body["scale"].size()));

    json raw = json::object();
    for (const auto& [k, v] : reference_point_values(Phase::Training)) raw[k] = v;
    auto label = api.send("POST", "/api/v1/labels/training", json{{"model_id", "seven"}, {"raw_values", raw}});
    c.expect(label.status == 201, "label after PATCH answered " + std::to_string(label.status));
    c.expect(label.body["scale"].size() == 7, "label uses " + std::to_string(label.body["scale"].size()) + " grades");
    c.expect(label.body["overall_grade"] == "D", "index 1.0 on the 7-grade scale graded " +
                                                     label.body["overall_grade"].dump());

    auto hash = api.store.content_hash();
    const std::vector<std::string> reads{"/api/v1/health",
                                         "/api/v1/schema",
                                         "/api/v1/configs/training",
                                         "/api/v1/configs/inference",
                                         "/api/v1/configs/training/versions",
                                         "/api/v1/configs/training/versions/1",
                                         "/api/v1/labels",
                                         "/api/v1/labels/" + label.body["label_id"].get<std::string>(),
                                         "/api/v1/labels/ffffffffffffffffffffffffffffffff",
                                         "/api/v1/models",
                                         "/api/v1/models/seven",
                                         "/api/v1/models/seven/labels",
                                         "/api/v1/models/unknown-model",
                                         "/api/v1/models?grade=D&phase=training"};
    for (const auto& path : reads) {
        api.send("GET", path);
        c.expect(api.store.content_hash() == hash, "GET " + path + " changed the store");
    }
    c.note("401/403 enforced, 7-grade PATCH applied, " + std::to_string(reads.size()) + " GETs left the hash intact");
}

int run_doctest_case(const std::string& name) {
    std::string cmd = std::string(ECOLABEL_TEST_REPOSITORY_PATH) + " --no-version --test-case='" + name + "' 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    std::string output;
    char buf[4096];
    while (auto n = fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
    int status = pclose(pipe);
    // a filter that matches nothing also exits 0
    if (output.find("test cases:  1 |  1 passed | 0 failed") == std::string::npos) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void repository_substitutability(Checker& c) {
    c.expect(run_doctest_case("repository contract<*MemoryBackend>") == 0, "contract suite failed on MemoryStore");
    c.expect(run_doctest_case("repository contract<*FileBackend>") == 0, "contract suite failed on FileStore");

    // Writer child reports each committed label over a pipe; the parent kills
    // it mid-stream and checks that everything reported is still readable.
    testutil::TempDir dir;
    gen::Rng rng(55);
    int rounds_ok = 0;
    for (int round = 0; round < 5; ++round) {
        auto path = dir / ("kill-" + std::to_string(round) + ".json");
        int fds[2];
        if (pipe(fds) != 0) {
            c.expect(false, "pipe failed");
            return;
        }
        pid_t pid = fork();
        if (pid == 0) {
            close(fds[0]);
            try {
                FileStore store(path, FileStoreOptions{.fsync = false});
                Repository repo(store);
                repo.ensure_default_configs();
                auto config = repo.current_config(Phase::Training);
                for (int i = 0;; ++i) {
                    PhaseReport report;
                    report.model_id = "m" + std::to_string(i);
                    report.raw_values = {{"co2e_kg", 1.0 + i}};
                    repo.save_label(compute_label(report, config, {}), report);
                    if (write(fds[1], &i, sizeof i) != sizeof i) _exit(2);
                }
            } catch (...) {
                _exit(3);
            }
        }
        close(fds[1]);
        int last = -1, got = 0;
        int target = 5 + static_cast<int>(rng() % 40);
        while (got < target && read(fds[0], &last, sizeof last) == sizeof last) ++got;
        kill(pid, SIGKILL);
        int status = 0;
        waitpid(pid, &status, 0);
        close(fds[0]);

        try {
            FileStore reopened(path);
            auto labels = reopened.list_labels({}, {1, 500});
            bool all = true;
            for (int i = 0; i <= last; ++i) {
                all = all && reopened.list_labels(LabelFilter{.model_id = "m" + std::to_string(i)}, {1, 1}).total == 1;
            }
            c.expect(all && labels.total >= last + 1,
                     "round " + std::to_string(round) + ": " + std::to_string(labels.total) + " labels, " +
                         std::to_string(last + 1) + " were committed");
            if (all) ++rounds_ok;
        } catch (const std::exception& e) {
            c.expect(false, "round " + std::to_string(round) + ": store unreadable after kill: " + e.what());
        }
    }
    c.note("contract suite on both backends, " + std::to_string(rounds_ok) + "/5 SIGKILL rounds intact");
}

struct CliResult {
    int code;
    std::string out;
};

CliResult cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str()};
}

json without_identity(json label) {
    label.erase("label_id");
    label.erase("created_at");
    return label;
}

void cli_api_equivalence(Checker& c) {
    testutil::TempDir dir;
    auto store = (dir / "store.json").string();
    testutil::ApiHarness api;
    gen::Rng rng(4242);
    int compared = 0;

    auto compare = [&](const CliResult& via_cli, const testutil::Reply& via_api, const std::string& what) {
        c.expect(via_cli.code == 0, what + ": CLI exit " + std::to_string(via_cli.code));
        c.expect(via_api.status == 201, what + ": API status " + std::to_string(via_api.status));
        if (via_cli.code != 0 || via_api.status != 201) return;
        auto a = json::parse(via_cli.out);
        c.expect(without_identity(a) == without_identity(via_api.body), what + ": labels differ");
        c.expect(same_content(a.get<EnergyLabel>(), via_api.body.get<EnergyLabel>()), what + ": decoded labels differ");
        ++compared;
    };

    for (int i = 0; i < 40; ++i) {
        auto phase = i % 2 ? Phase::Inference : Phase::Training;
        auto ref = reference_point_values(phase);
        std::string pairs;
        json raw = json::object();
        for (const auto& [k, v] : ref) {
            if (i > 0 && rng() % 4 == 0) continue;
            double value = i == 0 ? v : v * gen::log_uniform(rng, 0.05, 20.0);
            raw[k] = value;
            pairs += (pairs.empty() ? "" : ",") + k + "=" + num(value);
        }
        if (pairs.empty()) continue;
        auto model = "eq-" + std::to_string(i);
        std::string phase_text(to_string(phase));
        compare(cli({"--store", store, "--json", "label", phase_text, "--model", model, "--values", pairs}),
                api.send("POST", "/api/v1/labels/" + phase_text, json{{"model_id", model}, {"raw_values", raw}}),
                "values #" + std::to_string(i));
    }

    for (const char* name : {"emissions.csv", "emissions_multi.csv", "emissions.json"}) {
        compare(cli({"--store", store, "--json", "label", "training", "--model", "file", "--file",
                     testutil::fixture_path(name)}),
                api.upload("/api/v1/labels/training/file",
                           {{"file", testutil::read_fixture(name), name, ""}, {"model_id", "file", "", ""}}),
                name);
    }
    c.note(std::to_string(compared) + " label pairs field-identical");
}

void calibration(Checker& c) {
    auto report = [](double co2) {
        PhaseReport r;
        r.model_id = "m";
        r.phase = Phase::Training;
        r.raw_values = {{"co2e_kg", co2}};
        return r;
    };
    auto base = default_config(Phase::Training);
    std::vector<PhaseReport> odd{report(7), report(1), report(3), report(9), report(5)};
    std::vector<PhaseReport> even{report(7), report(1), report(3), report(10)};
    auto odd_ref = calibrate_references(odd, base).find_metric("co2e_kg")->reference;
    auto even_ref = calibrate_references(even, base).find_metric("co2e_kg")->reference;
    c.expect(odd_ref == 5.0, "odd population median " + num(odd_ref));
    c.expect(even_ref == 5.0, "even population median " + num(even_ref) + " (expected mean of 3 and 7)");

    gen::Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> values(1 + rng() % 40);
        for (auto& v : values) v = gen::log_uniform(rng, 1e-3, 1e3);
        c.expect(median(values) == oracle::median_by_sorting(values),
                 "median of " + std::to_string(values.size()) + " values differs from the sorting oracle");
    }

    // through the stored-report path used by the API and CLI
    MemoryStore store;
    Repository repo(store);
    repo.ensure_default_configs();
    LabelService service(repo, {});
    for (double v : {4.0, 1.0, 2.0, 8.0}) {
        service.label_from_form(Phase::Training, "cal-" + num(v), "", {{"co2e_kg", v}});
    }
    auto stored = service.calibrate(Phase::Training).find_metric("co2e_kg")->reference;
    c.expect(stored == 3.0, "calibrate over stored reports gave " + num(stored));
    c.note("odd " + num(odd_ref) + ", even " + num(even_ref) + ", stored population " + num(stored));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Checker&)>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"monotonicity", monotonicity},
        {"renormalization", renormalization},
        {"scale/identity invariants", scale_identity},
        {"grading boundary contract", grading_boundaries},
        {"end-to-end file path", end_to_end_file},
        {"sync idempotency", sync_idempotency},
        {"probe accuracy", probe_accuracy},
        {"API contract", api_contract},
        {"repository substitutability", repository_substitutability},
        {"CLI/API equivalence", cli_api_equivalence},
        {"calibration", calibration},
    };

    auto start = Clock::now();
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Checker c;
        auto t0 = Clock::now();
        try {
            run(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("threw: ") + e.what());
        }
        char elapsed[32];
        std::snprintf(elapsed, sizeof elapsed, "%.2f s", seconds_since(t0));
        std::cout << (c.passed() ? "PASS " : "FAIL ") << name << "  [" << elapsed << "] "
                  << (c.passed() ? c.notes() : c.summary()) << std::endl;
        if (!c.passed()) ++failed;
    }
    double total = seconds_since(start);
    bool fast = total < 120.0;
    char total_text[32];
    std::snprintf(total_text, sizeof total_text, "%.2f s", total);
    std::cout << (fast ? "PASS " : "FAIL ") << "full suite under 2 minutes  [" << total_text << "]" << std::endl;
    if (!fast) ++failed;
    std::cout << (criteria.size() + 1 - failed) << "/" << (criteria.size() + 1) << " criteria passed" << std::endl;
    return failed;
}
