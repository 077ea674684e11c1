#include "ecolabel/defaults.hpp"

namespace ecolabel {

namespace {

constexpr Phase T = Phase::Training;
constexpr Phase I = Phase::Inference;
constexpr auto Higher = MetricDirection::HigherBetter;
constexpr auto Lower = MetricDirection::LowerBetter;

MetricDefinition metric(std::string id, std::string name, std::string description, std::vector<Phase> phases,
                        std::string unit, MetricDirection direction, double reference,
                        DerivationRule derivation = NoDerivation{}) {
    MetricDefinition m;
    m.id = std::move(id);
    m.name = std::move(name);
    m.description = std::move(description);
    m.phases = std::move(phases);
    m.unit = std::move(unit);
    m.direction = direction;
    m.weight = 1.0;
    m.reference = reference;
    m.boundaries = default_boundaries();
    m.derivation = std::move(derivation);
    return m;
}

const HarmonicMeanDerivation kPerformanceSources{{"accuracy", "f1", "rouge"}};

}  // namespace

std::vector<double> default_boundaries() {
    return {2.0, 1.25, 0.8, 0.5};
}

EfficiencyConfig default_config(Phase phase) {
    EfficiencyConfig config;
    config.version = 0;
    config.phase = phase;
    config.scale = GradeScale::standard();
    config.carbon_intensity = kDefaultCarbonIntensity;

    if (phase == Phase::Training) {
        config.metrics = {
            metric("energy_consumption_kwh", "Energy consumption", "Energy consumed during model training.", {T},
                   "kWh", Lower, 5.0),
            metric("downloads", "Downloads", "Indicator of reusability; more downloads amortize training cost.", {T},
                   "count", Higher, 1000.0),
            metric("size_efficiency", "Size efficiency", "Model size per kg of CO2e emitted.", {T, I}, "MB/kg",
                   Higher, 50.0, RatioDerivation{"model_size_mb", "co2e_kg"}),
            metric("dataset_efficiency", "Dataset efficiency", "Dataset size per kg of CO2e emitted.", {T, I},
                   "MB/kg", Higher, 500.0, RatioDerivation{"dataset_size_mb", "co2e_kg"}),
            metric("performance_score", "Performance score", "Harmonic mean of accuracy, F1 and Rouge.", {T, I},
                   "score", Higher, 0.8, kPerformanceSources),
            metric("co2e_kg", "CO2e", "Carbon footprint of the phase.", {T, I}, "kg", Lower, 2.0),
        };
    } else {
        config.metrics = {
            metric("size_efficiency", "Size efficiency", "Model size per kg of CO2e emitted.", {T, I}, "MB/kg",
                   Higher, 1e7, RatioDerivation{"model_size_mb", "co2e_kg"}),
            metric("dataset_efficiency", "Dataset efficiency", "Dataset size per kg of CO2e emitted.", {T, I},
                   "MB/kg", Higher, 1e8, RatioDerivation{"dataset_size_mb", "co2e_kg"}),
            metric("performance_score", "Performance score", "Harmonic mean of accuracy, F1 and Rouge.", {T, I},
                   "score", Higher, 0.8, kPerformanceSources),
            metric("co2e_kg", "CO2e", "Carbon footprint of the phase.", {T, I}, "kg", Lower, 1e-5),
            metric("file_size_mb", "File size", "Size of the model file.", {I}, "MB", Lower, 100.0),
            metric("power_draw_w", "Power draw", "Power drawn while serving inferences.", {I}, "W", Lower, 100.0),
            metric("running_time_s", "Running time", "Duration of the inference workload.", {I}, "s", Lower, 1.0),
            metric("flops", "FLOPS", "Floating-point operations per second during inference.", {I}, "FLOP/s", Lower,
                   1e9),
        };
    }
    return config;
}

RawValues reference_point_values(Phase phase) {
    if (phase == Phase::Training) {
        return {{"energy_consumption_kwh", 5.0}, {"downloads", 1000.0}, {"model_size_mb", 100.0},
                {"dataset_size_mb", 1000.0},     {"co2e_kg", 2.0},      {"accuracy", 0.8}};
    }
    return {{"model_size_mb", 100.0}, {"dataset_size_mb", 1000.0}, {"co2e_kg", 1e-5},  {"accuracy", 0.8},
            {"file_size_mb", 100.0},  {"power_draw_w", 100.0},     {"running_time_s", 1.0}, {"flops", 1e9}};
}

std::vector<RecommendationEntry> default_recommendations() {
    const int t = kDefaultTriggerPosition;
    return {
        {"energy_consumption_kwh", t,
         "Training energy is high. Consider early stopping, mixed precision, or fine-tuning a pretrained model "
         "instead of training from scratch."},
        {"downloads", t,
         "Few reuses amortize the training footprint. Publish the model with a clear card so others can reuse it."},
        {"size_efficiency", t,
         "Emissions are high relative to model size. Check hardware utilization and batch sizes."},
        {"dataset_efficiency", t,
         "Emissions are high relative to the data processed. Deduplicate or subsample the dataset, and cache "
         "preprocessing."},
        {"performance_score", t,
         "Model quality is low for its footprint. Revisit the architecture or hyperparameters before retraining."},
        {"co2e_kg", t,
         "Carbon footprint is high. Run in a region or time window with lower grid carbon intensity."},
        {"file_size_mb", t, "The model file is large. Consider quantization, pruning, or distillation."},
        {"power_draw_w", t, "Power draw is high. Consider a more efficient accelerator or smaller batch latency "
                            "targets."},
        {"running_time_s", t,
         "Inference is slow. Consider batching requests, compiling the model, or serving a smaller variant."},
        {"flops", t, "Compute per inference is high. Consider a lighter architecture or reduced input resolution."},
    };
}

}  // namespace ecolabel
