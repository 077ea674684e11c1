#include <doctest.h>

#include <cmath>
#include <random>

#include "ecolabel/defaults.hpp"
#include "ecolabel/ingest.hpp"
#include "support/util.hpp"

using namespace ecolabel;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an ecolabel::Error");
    return ErrorCode::InvalidArgument;
}

const FieldMapping kDefault = FieldMapping::defaults();

}  // namespace

TEST_CASE("parse_emission_report: CSV") {
    SUBCASE("minimal fixture row") {
        auto rows = parse_emission_report("duration,emissions,energy_consumed\n120.0,0.05,0.3", ReportFormat::Csv,
                                          kDefault);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].duration_s() == 120.0);
        CHECK(rows[0].emissions_kg() == 0.05);
        CHECK(rows[0].energy_kwh() == 0.3);
        CHECK(rows[0].extra.empty());
    }
    SUBCASE("tracker export keeps every unmapped column") {
        auto rows = parse_emission_report(testutil::read_fixture("emissions.csv"), ReportFormat::Csv, kDefault);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].duration_s() == 120.0);
        CHECK(rows[0].emissions_kg() == 0.05);
        CHECK(rows[0].energy_kwh() == 0.3);
        CHECK(rows[0].extra.at("cpu_model") == "AMD EPYC 7B12, 8-Core");
        CHECK(rows[0].extra.at("cloud_provider").empty());
        // 29 columns: 3 mapped + 26 extra
        CHECK(rows[0].extra.size() == 26);
    }
    SUBCASE("header only") {
        CHECK(parse_emission_report(testutil::read_fixture("emissions_header_only.csv"), ReportFormat::Csv, kDefault)
                  .empty());
    }
    SUBCASE("non-numeric value identifies row and column") {
        try {
            parse_emission_report("duration,emissions,energy_consumed\nabc,0.05,0.3", ReportFormat::Csv, kDefault);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonNumericValue);
            CHECK(e.details()["row"] == 1);
            CHECK(e.details()["column"] == "duration");
        }
    }
    SUBCASE("missing mapped column") {
        CHECK(code_of([] { parse_emission_report("duration,emissions\n1,2", ReportFormat::Csv, kDefault); }) ==
              ErrorCode::MissingColumn);
    }
    SUBCASE("structural errors") {
        CHECK(code_of([] { parse_emission_report("", ReportFormat::Csv, kDefault); }) == ErrorCode::MalformedFile);
        CHECK(code_of([] {
                  parse_emission_report("duration,emissions,energy_consumed\n1,2", ReportFormat::Csv, kDefault);
              }) == ErrorCode::MalformedFile);
        CHECK(code_of([] {
                  parse_emission_report("duration,emissions,energy_consumed,x\n1,2,3,\"open", ReportFormat::Csv,
                                        kDefault);
              }) == ErrorCode::MalformedFile);
        std::string junk = "\x89PNG\r\n\x1a\n\x00\x00\x00\rIHDR";
        junk.push_back('\xff');
        CHECK(code_of([&] { parse_emission_report(junk, ReportFormat::Csv, kDefault); }) == ErrorCode::MalformedFile);
    }
    SUBCASE("negative value") {
        CHECK(code_of([] {
                  parse_emission_report("duration,emissions,energy_consumed\n1,-2,3", ReportFormat::Csv, kDefault);
              }) == ErrorCode::NegativeValue);
    }
    SUBCASE("CRLF, BOM, blank lines and quoted numbers") {
        auto rows = parse_emission_report("\xEF\xBB\xBF" "duration,emissions,energy_consumed\r\n\"1.5\",2,3\r\n\r\n4,5,6\r\n",
                                          ReportFormat::Csv, kDefault);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].duration_s() == 1.5);
        CHECK(rows[1].energy_kwh() == 6.0);
    }
    SUBCASE("custom mapping with unit scale") {
        FieldMapping grams{{{"co2_g", "co2e_kg", 0.001}, {"secs", "running_time_s", 1.0}}};
        auto rows = parse_emission_report("secs,co2_g\n10,2500", ReportFormat::Csv, grams);
        CHECK(rows[0].emissions_kg() == doctest::Approx(2.5));
        CHECK(rows[0].duration_s() == 10.0);
    }
    SUBCASE("mapping with duplicate targets is rejected") {
        FieldMapping bad{{{"a", "x", 1.0}, {"b", "x", 1.0}}};
        CHECK(code_of([&] { parse_emission_report("a,b\n1,2", ReportFormat::Csv, bad); }) ==
              ErrorCode::InvalidArgument);
    }
}

TEST_CASE("parse_emission_report: JSON") {
    auto rows = parse_emission_report(testutil::read_fixture("emissions.json"), ReportFormat::Json, kDefault);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].duration_s() == 60.0);
    CHECK(rows[0].extra.at("gpu_count") == "1");
    CHECK(rows[0].extra.at("timestamp") == "2026-03-02T10:15:42");

    auto single = parse_emission_report(R"({"duration": 1, "emissions": 2, "energy_consumed": 3})",
                                        ReportFormat::Json, kDefault);
    CHECK(single.size() == 1);

    CHECK(code_of([] { parse_emission_report("42", ReportFormat::Json, kDefault); }) == ErrorCode::MalformedFile);
    CHECK(code_of([] { parse_emission_report("{bad", ReportFormat::Json, kDefault); }) == ErrorCode::MalformedFile);
    CHECK(code_of([] {
              parse_emission_report(R"({"duration": 1, "emissions": 2, "energy_consumed": {"x": 1}})",
                                    ReportFormat::Json, kDefault);
          }) == ErrorCode::MalformedFile);
    CHECK(code_of([] {
              parse_emission_report(R"([{"duration": 1, "emissions": 2}])", ReportFormat::Json, kDefault);
          }) == ErrorCode::MissingColumn);
    CHECK(code_of([] {
              parse_emission_report(R"([{"duration": "fast", "emissions": 2, "energy_consumed": 1}])",
                                    ReportFormat::Json, kDefault);
          }) == ErrorCode::NonNumericValue);
}

TEST_CASE("rows_to_report") {
    auto rows = parse_emission_report(testutil::read_fixture("emissions_multi.csv"), ReportFormat::Csv, kDefault);
    auto report = rows_to_report(rows, "bert", Phase::Training);
    CHECK(report.raw_values.at("running_time_s") == 120.0);
    CHECK(report.raw_values.at("co2e_kg") == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(report.raw_values.at("energy_consumption_kwh") == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(report.provenance == Provenance::File);
    CHECK(report.model_id == "bert");

    auto one = rows_to_report({rows[0]}, "bert", Phase::Training);
    CHECK(one.raw_values == rows[0].values);

    CHECK(code_of([] { rows_to_report({}, "m", Phase::Training); }) == ErrorCode::EmptyRows);
}

TEST_CASE("ingest properties") {
    std::mt19937_64 rng(17);
    // Dyadic values keep floating-point sums exact, so linearity can be checked with ==.
    std::uniform_int_distribution<int> num(0, 4096);
    auto random_rows = [&](int n) {
        std::vector<EmissionReportRow> rows;
        for (int i = 0; i < n; ++i) {
            EmissionReportRow r;
            r.values["running_time_s"] = num(rng) / 64.0;
            r.values["co2e_kg"] = num(rng) / 1024.0;
            r.values["energy_consumption_kwh"] = num(rng) / 256.0;
            r.extra["note"] = i % 2 ? "plain" : "has, comma and \"quotes\"";
            r.extra["tag"] = std::to_string(num(rng));
            rows.push_back(r);
        }
        return rows;
    };

    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_rows(1 + trial % 5);
        auto b = random_rows(1 + trial % 3);
        auto all = a;
        all.insert(all.end(), b.begin(), b.end());
        auto whole = rows_to_report(all, "m", Phase::Training).raw_values;
        auto ra = rows_to_report(a, "m", Phase::Training).raw_values;
        auto rb = rows_to_report(b, "m", Phase::Training).raw_values;
        for (const auto& [k, v] : whole) {
            CHECK(v == ra[k] + rb[k]);
        }

        auto text = serialize_emission_report_csv(all, kDefault);
        CHECK(parse_emission_report(text, ReportFormat::Csv, kDefault) == all);
    }

    SUBCASE("no silent drops") {
        auto text = testutil::read_fixture("emissions.csv");
        auto header = text.substr(0, text.find('\n'));
        auto rows = parse_emission_report(text, ReportFormat::Csv, kDefault);
        std::size_t columns = std::count(header.begin(), header.end(), ',') + 1;
        CHECK(rows[0].values.size() + rows[0].extra.size() == columns);
    }
}

TEST_CASE("validate_form_payload") {
    auto config = default_config(Phase::Training);
    auto ok = validate_form_payload({{"co2e_kg", 2}, {"model_size_mb", 100}}, "m", Phase::Training, config);
    CHECK(ok.warnings.empty());
    CHECK(ok.report.raw_values.at("co2e_kg") == 2.0);
    CHECK(ok.report.provenance == Provenance::Form);

    try {
        validate_form_payload({{"co2e_kg", -1}}, "m", Phase::Training, config);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NegativeValue);
        CHECK(e.details()["field"] == "co2e_kg");
    }
    CHECK(code_of([&] { validate_form_payload({{"co2e_kg", NAN}}, "m", Phase::Training, config); }) ==
          ErrorCode::NonFiniteValue);

    auto unknown = validate_form_payload({{"unknown_metric", 5}}, "m", Phase::Training, config);
    REQUIRE(unknown.warnings.size() == 1);
    CHECK(unknown.warnings[0] == "unknown field 'unknown_metric'");

    auto derived = validate_form_payload({{"size_efficiency", 5}}, "m", Phase::Training, config);
    CHECK(derived.warnings.size() == 1);
}

TEST_CASE("payload helpers") {
    auto p = payload_from_pairs("co2e_kg=2, model_size_mb=100,accuracy=0.8");
    CHECK(p.size() == 3);
    CHECK(p.at("model_size_mb") == 100.0);
    CHECK(code_of([] { payload_from_pairs("co2e_kg"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { payload_from_pairs("co2e_kg=abc"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { payload_from_json(nlohmann::json{{"a", "x"}}); }) == ErrorCode::InvalidArgument);

    auto m = mapping_from_json(nlohmann::json{{"dur", "running_time_s"}});
    CHECK(m.columns.size() == 1);
    auto m2 = mapping_from_json(mapping_to_json(FieldMapping::defaults()));
    CHECK(m2.columns == FieldMapping::defaults().columns);
}
