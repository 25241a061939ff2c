#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fdi/agc.hpp"
#include "fdi/config.hpp"
#include "fdi/design.hpp"
#include "fdi/plant.hpp"
#include "fdi/runtime.hpp"

namespace fdi::pipeline {

inline constexpr const char* kLayoutVersion = "fdi-experiment/1";

/// splitmix64 finalizer (a bijection on 64-bit words).
std::uint64_t splitmix64(std::uint64_t x);
/// Training and held-out seeds come from disjoint input ranges.
std::uint64_t train_seed(std::uint64_t seed, int i);
std::uint64_t test_seed(std::uint64_t seed, int i);

/// Runs fn(0..n-1) on at most `jobs` threads. The exception of the lowest
/// failing index is rethrown after every worker has stopped.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Model-side objects shared by every phase.
struct Context {
    config::ExperimentConfig cfg;
    agc::AgcSystem system;
    lti::LinearModel discrete;
    lti::StackedSystem stacked;
    Matrix G;
    std::uint64_t model_hash = 0;
    int T_train = 0;
};

/// Assembles, checks stability and discretizes. Throws ConfigError.
Context make_context(const config::ExperimentConfig& cfg);

struct TrainingInstance {
    std::uint64_t seed = 0;
    plant::SampledTrajectory plant;  // y_p
    plant::SampledTrajectory model;  // y
    Matrix E;                        // y_p - y
    Matrix Q;
};

struct TrainingBundle {
    std::vector<TrainingInstance> instances;
    Matrix Qbar;
    std::uint64_t model_hash = 0;

    std::vector<Matrix> Qs() const;
};

/// m paired attack-free simulations (nonlinear plant vs. abstract model).
/// A diverging simulation aborts with a SimulationError naming its seed.
TrainingBundle run_train(const Context& ctx, int jobs);

/// Signatures and Q_i recomputed from paired trajectories (used when a bundle is read back).
TrainingBundle bundle_from_trajectories(const Context& ctx, std::vector<plant::SampledTrajectory> plant,
                                        std::vector<plant::SampledTrajectory> model);

struct DesignOutcome {
    design::FilterDesign design;
    runtime::Detector detector;
    std::optional<design::PretrainResult> pretrain;
};

/// Pure mode: tau* = 0 (Qbar forced to 0 for calibration, still used to score
/// the objective). Data-assisted mode: tau* from the training Q_i.
DesignOutcome run_design(const Context& ctx, const TrainingBundle& bundle, design::Mode mode);

struct RunResult {
    std::uint64_t seed = 0;
    runtime::DetectionReport clean;
    runtime::DetectionReport attacked;
};

struct TestOutcome {
    Vector attack;  // applied bias, one entry per channel
    std::vector<RunResult> runs;
    int false_alarms = 0;  // clean runs that alarm
    int early_alarms = 0;  // attacked runs alarming before the onset
    int detections = 0;    // attacked runs alarming at or after the onset
    double mean_latency = -1.0;
    double max_clean_energy = 0.0;
    double min_attacked_peak = 0.0;
    double steady_state_margin = -1.0;  // multivariate only
};

/// Attack applied in the test phase: the configured univariate value or
/// F_b alpha* for the winning branch.
Vector test_attack(const Context& ctx, const design::FilterDesign& design);

TestOutcome run_test(const Context& ctx, const design::Artifact& artifact, int jobs);

// Experiment directory phases. Each reads only what earlier phases wrote.
struct Options {
    std::optional<design::Mode> mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool dump_matrices = false;
};

/// Config with the command-line overrides applied.
config::ExperimentConfig apply_options(config::ExperimentConfig cfg, const Options& opts);

void cmd_pretrain(const config::ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_train(const config::ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_design(const config::ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_test(const config::ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_run_all(const config::ExperimentConfig& cfg, const std::filesystem::path& out);

/// Writes config.json (resolved config) and, if requested, the model matrices.
void prepare_directory(const config::ExperimentConfig& cfg, const std::filesystem::path& out, bool dump_matrices);

TrainingBundle read_bundle(const Context& ctx, const std::filesystem::path& out);
design::Artifact read_artifact(const Context& ctx, const std::filesystem::path& out);

}  // namespace fdi::pipeline
