#include "ecolabel/api.hpp"

namespace ecolabel {

namespace {

constexpr const char* kSchema = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "ecolabel/api/v1",
  "$defs": {
    "timestamp": {"type": "string", "pattern": "^\\d{4}-\\d{2}-\\d{2}T\\d{2}:\\d{2}:\\d{2}\\.\\d{6}Z$"},
    "phase": {"enum": ["training", "inference"]},
    "grade_scale": {
      "type": "array", "minItems": 2, "maxItems": 7, "uniqueItems": true,
      "items": {"type": "string", "minLength": 1}
    },
    "derivation": {
      "oneOf": [
        {"type": "object", "required": ["kind"], "properties": {"kind": {"const": "none"}}},
        {"type": "object", "required": ["kind", "numerator_field", "denominator_field"],
         "properties": {"kind": {"const": "ratio"},
                        "numerator_field": {"type": "string"}, "denominator_field": {"type": "string"}}},
        {"type": "object", "required": ["kind", "source_fields"],
         "properties": {"kind": {"const": "harmonic_mean"},
                        "source_fields": {"type": "array", "minItems": 1, "items": {"type": "string"}}}}
      ]
    },
    "metric_definition": {
      "type": "object",
      "required": ["id", "direction", "weight", "reference", "boundaries"],
      "properties": {
        "id": {"type": "string", "minLength": 1},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "phases": {"type": "array", "items": {"$ref": "#/$defs/phase"}},
        "unit": {"type": "string"},
        "direction": {"enum": ["higher_better", "lower_better"]},
        "weight": {"type": "number", "minimum": 0},
        "reference": {"type": "number", "exclusiveMinimum": 0},
        "boundaries": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "derivation": {"$ref": "#/$defs/derivation"}
      }
    },
    "efficiency_config": {
      "type": "object",
      "required": ["version", "phase", "scale", "metrics", "carbon_intensity", "created_at"],
      "properties": {
        "version": {"type": "integer", "minimum": 0},
        "phase": {"$ref": "#/$defs/phase"},
        "scale": {"$ref": "#/$defs/grade_scale"},
        "metrics": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/metric_definition"}},
        "carbon_intensity": {"type": "number", "exclusiveMinimum": 0},
        "created_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "phase_report": {
      "type": "object",
      "required": ["model_id", "phase", "raw_values", "provenance", "collected_at"],
      "properties": {
        "model_id": {"type": "string"},
        "phase": {"$ref": "#/$defs/phase"},
        "raw_values": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "provenance": {"enum": ["form", "file", "probe", "provider"]},
        "collected_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "rated_metric": {
      "type": "object",
      "required": ["metric_id", "value", "index", "grade", "grade_position", "weight_used", "missing"],
      "properties": {
        "metric_id": {"type": "string"},
        "value": {"type": ["number", "null"]},
        "index": {"type": ["number", "null"]},
        "grade": {"type": ["string", "null"]},
        "grade_position": {"type": ["integer", "null"], "minimum": 0},
        "weight_used": {"type": "number", "minimum": 0},
        "missing": {"type": "boolean"}
      }
    },
    "energy_label": {
      "type": "object",
      "required": ["label_id", "model_id", "provider_id", "phase", "config_version", "scale", "rated_metrics",
                   "overall_score", "overall_grade", "recommendations", "created_at"],
      "properties": {
        "label_id": {"type": "string", "pattern": "^[0-9a-f]{32}$"},
        "model_id": {"type": "string"},
        "provider_id": {"type": "string"},
        "phase": {"$ref": "#/$defs/phase"},
        "config_version": {"type": "integer"},
        "scale": {"$ref": "#/$defs/grade_scale"},
        "rated_metrics": {"type": "array", "items": {"$ref": "#/$defs/rated_metric"}},
        "overall_score": {"type": "number", "minimum": 0},
        "overall_grade": {"type": "string"},
        "recommendations": {
          "type": "array",
          "items": {"type": "object", "required": ["metric_id", "text"],
                    "properties": {"metric_id": {"type": "string"}, "text": {"type": "string"}}}
        },
        "created_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "provider_model_metadata": {
      "type": "object",
      "required": ["provider_id", "model_id", "downloads", "evaluation_metrics", "tags", "description"],
      "properties": {
        "provider_id": {"type": "string"},
        "model_id": {"type": "string"},
        "downloads": {"type": "integer", "minimum": 0},
        "model_size_mb": {"type": ["number", "null"], "minimum": 0},
        "dataset_size_mb": {"type": ["number", "null"], "minimum": 0},
        "evaluation_metrics": {"type": "object", "additionalProperties": {"type": "number"}},
        "tags": {"type": "array", "items": {"type": "string"}},
        "description": {"type": "string"},
        "hardware": {"type": ["string", "null"]},
        "fetched_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "model_record": {
      "type": "object",
      "required": ["id", "provider_id", "model_id", "display_name", "metadata", "content_hash",
                   "created_at", "updated_at"],
      "properties": {
        "id": {"type": "string"},
        "provider_id": {"type": "string"},
        "model_id": {"type": "string"},
        "display_name": {"type": "string"},
        "metadata": {"$ref": "#/$defs/provider_model_metadata"},
        "content_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "created_at": {"$ref": "#/$defs/timestamp"},
        "updated_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "sync_run": {
      "type": "object",
      "required": ["run_id", "provider_id", "started_at", "finished_at", "created", "updated", "unchanged", "failed"],
      "properties": {
        "run_id": {"type": "string"},
        "provider_id": {"type": "string"},
        "started_at": {"$ref": "#/$defs/timestamp"},
        "finished_at": {"$ref": "#/$defs/timestamp"},
        "created": {"type": "integer", "minimum": 0},
        "updated": {"type": "integer", "minimum": 0},
        "unchanged": {"type": "integer", "minimum": 0},
        "labels_created": {"type": "integer", "minimum": 0},
        "failed": {
          "type": "array",
          "items": {"type": "object", "required": ["model_id", "code", "message"],
                    "properties": {"model_id": {"type": "string"}, "code": {"type": "string"},
                                   "message": {"type": "string"}}}
        },
        "warnings": {"type": "array", "items": {"type": "string"}}
      }
    },
    "probe_result": {
      "type": "object",
      "required": ["per_call_latencies_s", "total_running_time_s", "mean_latency_s", "failures",
                   "energy_kwh", "co2e_kg", "power_draw_w", "collected_at"],
      "properties": {
        "per_call_latencies_s": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "total_running_time_s": {"type": "number", "minimum": 0},
        "mean_latency_s": {"type": "number", "minimum": 0},
        "failures": {"type": "integer", "minimum": 0},
        "energy_kwh": {"type": ["number", "null"], "minimum": 0},
        "co2e_kg": {"type": ["number", "null"], "minimum": 0},
        "power_draw_w": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "collected_at": {"$ref": "#/$defs/timestamp"}
      }
    },
    "page": {
      "type": "object",
      "required": ["items", "total", "page", "page_size"],
      "properties": {
        "items": {"type": "array"},
        "total": {"type": "integer", "minimum": 0},
        "page": {"type": "integer", "minimum": 1},
        "page_size": {"type": "integer", "minimum": 1, "maximum": 500}
      }
    },
    "error_envelope": {
      "type": "object",
      "required": ["code", "message"],
      "additionalProperties": false,
      "properties": {
        "code": {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"},
        "message": {"type": "string"},
        "details": {}
      }
    }
  }
})json";

}  // namespace

nlohmann::json api_schema() {
    static const auto schema = nlohmann::json::parse(kSchema);
    return schema;
}

}  // namespace ecolabel
