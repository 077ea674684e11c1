#include "ecolabel/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

namespace ecolabel {

namespace {

using nlohmann::json;

// RFC 3629 well-formedness, including overlong and surrogate checks.
bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    while (i < s.size()) {
        unsigned char c = p[i];
        if (c == 0) return false;
        if (c < 0x80) {
            ++i;
            continue;
        }
        int len;
        std::uint32_t cp;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (int k = 1; k < len; ++k) {
            if ((p[i + k] & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (p[i + k] & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<double> to_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

[[noreturn]] void malformed(const std::string& why) {
    throw Error(ErrorCode::MalformedFile, why);
}

using Record = std::vector<std::string>;

std::vector<Record> split_csv(std::string_view text) {
    std::vector<Record> records;
    Record current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;  // distinguishes "" (empty field) from an empty line
    std::size_t line = 1;

    auto end_record = [&] {
        if (field_started || !current.empty()) {
            current.push_back(std::move(field));
            records.push_back(std::move(current));
        }
        current.clear();
        field.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    if (i + 1 < text.size() && text[i + 1] != ',' && text[i + 1] != '\n' && text[i + 1] != '\r') {
                        malformed("unexpected character after closing quote on line " + std::to_string(line));
                    }
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    malformed("quote inside unquoted field on line " + std::to_string(line));
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                current.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                ++line;
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) {
        malformed("unterminated quoted field");
    }
    end_record();
    return records;
}

void assign_mapped(EmissionReportRow& row, const ColumnMapping& col, std::string_view cell, std::size_t row_number) {
    auto v = to_double(cell);
    if (!v) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + std::to_string(row_number) + ", column '" + col.source + "': not a number",
                    {{"row", row_number}, {"column", col.source}, {"value", std::string(cell)}});
    }
    if (*v < 0) {
        throw Error(ErrorCode::NegativeValue,
                    "row " + std::to_string(row_number) + ", column '" + col.source + "': negative value",
                    {{"row", row_number}, {"column", col.source}});
    }
    row.values[col.target] = *v * col.scale;
}

std::vector<EmissionReportRow> parse_csv(std::string_view text, const FieldMapping& mapping) {
    auto records = split_csv(text);
    if (records.empty()) {
        malformed("CSV has no header row");
    }
    Record header = records.front();
    std::set<std::string> seen;
    for (auto& h : header) {
        h = std::string(trim(h));
        if (!seen.insert(h).second) {
            malformed("duplicate column '" + h + "' in header");
        }
    }
    for (const auto& col : mapping.columns) {
        if (!seen.count(col.source)) {
            throw Error(ErrorCode::MissingColumn, "mapped column '" + col.source + "' not in header",
                        {{"column", col.source}});
        }
    }

    std::vector<EmissionReportRow> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            malformed("row " + std::to_string(r) + " has " + std::to_string(rec.size()) + " fields, header has " +
                      std::to_string(header.size()));
        }
        EmissionReportRow row;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (const auto* col = mapping.for_source(header[c])) {
                assign_mapped(row, *col, rec[c], r);
            } else {
                row.extra[header[c]] = rec[c];
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<EmissionReportRow> parse_json_report(std::string_view text, const FieldMapping& mapping) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        malformed(std::string("invalid JSON: ") + e.what());
    }
    std::vector<json> records;
    if (doc.is_object()) {
        records.push_back(doc);
    } else if (doc.is_array()) {
        records.assign(doc.begin(), doc.end());
    } else {
        malformed("JSON report must be an object or an array of objects");
    }

    std::vector<EmissionReportRow> rows;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        std::size_t row_number = r + 1;
        if (!rec.is_object()) {
            malformed("record " + std::to_string(row_number) + " is not an object");
        }
        EmissionReportRow row;
        for (const auto& col : mapping.columns) {
            if (!rec.contains(col.source)) {
                throw Error(ErrorCode::MissingColumn,
                            "record " + std::to_string(row_number) + " lacks mapped field '" + col.source + "'",
                            {{"row", row_number}, {"column", col.source}});
            }
        }
        for (const auto& [key, value] : rec.items()) {
            if (value.is_object() || value.is_array()) {
                malformed("record " + std::to_string(row_number) + " field '" + key + "' is not flat");
            }
            const auto* col = mapping.for_source(key);
            std::string cell = value.is_string() ? value.get<std::string>() : value.dump();
            if (col) {
                assign_mapped(row, *col, cell, row_number);
            } else {
                row.extra[key] = cell;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos && trim(s).size() == s.size()) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json") return ReportFormat::Json;
    return std::nullopt;
}

FieldMapping FieldMapping::defaults() {
    return FieldMapping{{{"duration", "running_time_s", 1.0},
                         {"emissions", "co2e_kg", 1.0},
                         {"energy_consumed", "energy_consumption_kwh", 1.0}}};
}

const ColumnMapping* FieldMapping::for_source(std::string_view source) const {
    for (const auto& c : columns) {
        if (c.source == source) return &c;
    }
    return nullptr;
}

const ColumnMapping* FieldMapping::for_target(std::string_view target) const {
    for (const auto& c : columns) {
        if (c.target == target) return &c;
    }
    return nullptr;
}

void FieldMapping::validate() const {
    std::set<std::string> sources, targets;
    for (const auto& c : columns) {
        if (c.source.empty() || c.target.empty()) {
            throw Error(ErrorCode::InvalidArgument, "mapping entries need a source and a target");
        }
        if (!sources.insert(c.source).second) {
            throw Error(ErrorCode::InvalidArgument, "column '" + c.source + "' mapped twice");
        }
        if (!targets.insert(c.target).second) {
            throw Error(ErrorCode::InvalidArgument, "field '" + c.target + "' is the target of two columns");
        }
        if (!(std::isfinite(c.scale) && c.scale > 0)) {
            throw Error(ErrorCode::InvalidArgument, "scale for column '" + c.source + "' must be positive");
        }
    }
}

FieldMapping mapping_from_json(const nlohmann::json& j) {
    FieldMapping m;
    try {
        if (j.is_object()) {
            for (const auto& [source, target] : j.items()) {
                m.columns.push_back({source, target.get<std::string>(), 1.0});
            }
        } else if (j.is_array()) {
            for (const auto& e : j) {
                m.columns.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                                     e.value("scale", 1.0)});
            }
        } else {
            throw Error(ErrorCode::InvalidArgument, "mapping must be an object or an array");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("invalid mapping: ") + e.what());
    }
    m.validate();
    return m;
}

nlohmann::json mapping_to_json(const FieldMapping& mapping) {
    auto arr = nlohmann::json::array();
    for (const auto& c : mapping.columns) {
        arr.push_back({{"source", c.source}, {"target", c.target}, {"scale", c.scale}});
    }
    return arr;
}

std::optional<double> EmissionReportRow::field(std::string_view target) const {
    auto it = values.find(target);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

double EmissionReportRow::duration_s() const { return field("running_time_s").value_or(0.0); }
double EmissionReportRow::emissions_kg() const { return field("co2e_kg").value_or(0.0); }
double EmissionReportRow::energy_kwh() const { return field("energy_consumption_kwh").value_or(0.0); }

std::vector<EmissionReportRow> parse_emission_report(std::string_view bytes, ReportFormat format,
                                                     const FieldMapping& mapping) {
    mapping.validate();
    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") {
        bytes.remove_prefix(3);
    }
    if (!valid_utf8(bytes)) {
        malformed("file is not valid UTF-8 text");
    }
    return format == ReportFormat::Csv ? parse_csv(bytes, mapping) : parse_json_report(bytes, mapping);
}

std::string serialize_emission_report_csv(const std::vector<EmissionReportRow>& rows, const FieldMapping& mapping) {
    std::set<std::string> extra_columns;
    for (const auto& r : rows) {
        for (const auto& [k, v] : r.extra) extra_columns.insert(k);
    }
    std::string out;
    bool first = true;
    auto cell = [&](const std::string& s) {
        if (!first) out.push_back(',');
        out += csv_escape(s);
        first = false;
    };
    for (const auto& c : mapping.columns) cell(c.source);
    for (const auto& e : extra_columns) cell(e);
    out.push_back('\n');
    for (const auto& r : rows) {
        first = true;
        for (const auto& c : mapping.columns) {
            auto v = r.field(c.target);
            cell(v ? format_double(*v / c.scale) : std::string());
        }
        for (const auto& e : extra_columns) {
            auto it = r.extra.find(e);
            cell(it == r.extra.end() ? std::string() : it->second);
        }
        out.push_back('\n');
    }
    return out;
}

PhaseReport rows_to_report(const std::vector<EmissionReportRow>& rows, const std::string& model_id, Phase phase) {
    if (rows.empty()) {
        throw Error(ErrorCode::EmptyRows, "the report file contains no data rows");
    }
    PhaseReport report;
    report.model_id = model_id;
    report.phase = phase;
    report.provenance = Provenance::File;
    report.collected_at = now();
    for (const auto& row : rows) {
        for (const auto& [field, value] : row.values) {
            report.raw_values[field] += value;
        }
    }
    return report;
}

FormPayloadResult validate_form_payload(const std::map<std::string, double>& payload, const std::string& model_id,
                                        Phase phase, const EfficiencyConfig& config) {
    std::set<std::string, std::less<>> inputs;
    std::set<std::string, std::less<>> derived_ids;
    for (const auto& m : config.metrics) {
        auto fields = derivation_inputs(m.derivation);
        if (fields.empty()) {
            inputs.insert(m.id);
        } else {
            derived_ids.insert(m.id);
            inputs.insert(fields.begin(), fields.end());
        }
    }

    FormPayloadResult out;
    out.report.model_id = model_id;
    out.report.phase = phase;
    out.report.provenance = Provenance::Form;
    out.report.collected_at = now();
    for (const auto& [field, value] : payload) {
        if (!std::isfinite(value)) {
            throw Error(ErrorCode::NonFiniteValue, "field '" + field + "' is not finite", {{"field", field}});
        }
        if (value < 0) {
            throw Error(ErrorCode::NegativeValue, "field '" + field + "' is negative", {{"field", field}});
        }
        if (inputs.count(field)) {
            // known input
        } else if (derived_ids.count(field)) {
            out.warnings.push_back("field '" + field + "' is derived from other fields and is ignored");
        } else {
            out.warnings.push_back("unknown field '" + field + "'");
        }
        out.report.raw_values[field] = value;
    }
    return out;
}

std::map<std::string, double> payload_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "raw_values must be an object");
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) {
            throw Error(ErrorCode::InvalidArgument, "raw_values['" + k + "'] must be a number", {{"field", k}});
        }
        out[k] = v.get<double>();
    }
    return out;
}

std::map<std::string, double> payload_from_pairs(std::string_view text) {
    std::map<std::string, double> out;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto item = trim(text.substr(0, comma));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::InvalidArgument, "expected key=value, got '" + std::string(item) + "'");
        }
        auto key = std::string(trim(item.substr(0, eq)));
        auto raw = item.substr(eq + 1);
        std::string_view num = trim(raw);
        double v = 0;
        if (num == "nan" || num == "inf" || num == "-inf") {
            v = std::strtod(std::string(num).c_str(), nullptr);
        } else if (auto parsed = to_double(num)) {
            v = *parsed;
        } else {
            throw Error(ErrorCode::InvalidArgument, "value for '" + key + "' is not a number");
        }
        out[key] = v;
    }
    return out;
}

}  // namespace ecolabel
