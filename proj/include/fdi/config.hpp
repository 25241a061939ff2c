#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fdi/agc.hpp"
#include "fdi/design.hpp"
#include "fdi/plant.hpp"

namespace fdi::config {

/// Abstract model: the area blocks plus the attack topology.
struct ModelConfig {
    std::vector<agc::AreaParams> areas;
    agc::AttackTopology topology;
};

struct DetectorConfig {
    double margin = 0.1;
    int window = 20;
    int warmup = -1;  // < 0 means d_N
};

struct PhaseRuns {
    int instances = 0;
    double horizon = 0.0;
};

struct ExperimentConfig {
    std::string name = "experiment";
    ModelConfig model;
    plant::Nonlinearities nonlinear;
    double dt = 1e-3;
    double Ts = 0.5;
    int d_N = 3;
    double p = 0.8;
    PhaseRuns train{100, 10.0};
    PhaseRuns test{10, 60.0};
    // Template for every run; seed and horizon are filled in per instance.
    plant::DisturbanceSpec disturbance;
    design::AttackModel attack;
    int attack_channel = 0;      // univariate test attack channel
    double attack_value = 0.1;   // univariate test attack value
    double attack_onset = 30.0;  // s
    design::DesignOptions design;
    DetectorConfig detector;
    std::uint64_t seed = 1;
    int jobs = 1;

    /// Cross-field checks; throws ConfigError.
    void validate() const;
    plant::PlantConfig plant_config() const;
    int warmup() const { return detector.warmup < 0 ? d_N : detector.warmup; }
};

ModelConfig parse_model(const std::string& json_text);
std::string model_json(const ModelConfig& model);

/// Canonical text hashed into filter artifacts: the model blocks plus Ts.
std::string canonical_model(const ModelConfig& model, double Ts);
std::uint64_t model_hash(const ModelConfig& model, double Ts);

/// Experiment file; "model" and "plant" may be inline objects or paths
/// relative to the experiment file. Throws ConfigError.
ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig parse_experiment(const std::string& json_text,
                                  const std::filesystem::path& base_dir = {});

/// Fully resolved experiment (model and plant inline), stable key order.
std::string experiment_json(const ExperimentConfig& cfg);

/// Built-in desk-scale experiments on the reference three-area system.
ExperimentConfig univariate_reference();
ExperimentConfig multivariate_reference();

}  // namespace fdi::config
