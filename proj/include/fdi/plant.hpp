#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fdi/agc.hpp"

namespace fdi::plant {

struct Nonlinearities {
    // Clamp of every Pagc state to [first, second] with anti-windup.
    std::optional<std::pair<double, double>> agc_saturation;
    // Half width of the symmetric dead-band applied to the governor frequency input.
    double governor_deadband = 0.0;
    // T_ij sin(delta_i - delta_j) tie flows instead of the linearized integrators.
    bool tie_sine_coupling = false;
    // |dPm/dt| limit in p.u./s.
    std::optional<double> rate_limit;

    bool any() const {
        return agc_saturation || governor_deadband > 0.0 || tie_sine_coupling || rate_limit;
    }
};

struct PlantConfig {
    std::vector<agc::AreaParams> areas;
    agc::AttackTopology topology;
    Nonlinearities nonlinear;
    double dt = 1e-3;
    double Ts = 0.5;

    /// Integration steps per sampling interval. Throws ConfigError unless dt
    /// divides Ts and the saturation interval is nonempty.
    int steps_per_sample() const;
    void validate() const;
};

enum class DisturbanceKind { gaussian, step };

/// Load disturbances on a subset of the areas (one disturbance input per area).
struct DisturbanceSpec {
    std::vector<int> targets{0};
    DisturbanceKind kind = DisturbanceKind::gaussian;
    double sigma = 0.01;       // gaussian std (p.u.)
    double hold = 1.0;         // gaussian hold interval (s), multiple of Ts
    double step_value = 0.0;   // step amplitude (p.u.)
    double step_time = 0.0;    // step onset (s)
    std::uint64_t seed = 0;
    double horizon = 10.0;     // s

    void validate(double Ts) const;
};

enum class AttackMode { none, univariate, multivariate };

/// Constant bias on the attack channels from the onset on.
struct AttackSpec {
    AttackMode mode = AttackMode::none;
    int channel = 0;       // univariate only
    double value = 0.0;    // univariate only
    Vector values;         // multivariate only, one entry per channel
    double onset = 0.0;    // s

    /// Attack vector once active (zero vector for mode none).
    Vector bias(Eigen::Index n_f) const;
};

std::string to_string(AttackMode m);
std::string to_string(DisturbanceKind k);

/// Number of samples covering the horizon: round(horizon / Ts).
int sample_count(double horizon, double Ts);

/// Index of the first sample at or after time t on the Ts grid.
int grid_index(double t, double Ts);

/// Sampled disturbance, n_d x T. Gaussian values are drawn per hold interval
/// and per target area in that order from mt19937_64(seed).
Matrix gen_disturbance(const DisturbanceSpec& spec, Eigen::Index n_d, double Ts);

/// Sampled attack signal, n_f x T.
Matrix attack_signal(const AttackSpec& atk, Eigen::Index n_f, int T, double Ts);

struct TrajectoryMeta {
    double Ts = 0.0;
    std::uint64_t seed = 0;
    std::string source;  // "nonlinear" or "linear"
    std::string attack;
    std::string disturbance;
};

/// Outputs sampled at t_k = k Ts, k = 0..T-1. Y is n_y x T.
struct SampledTrajectory {
    Vector t;
    Matrix Y;
    TrajectoryMeta meta;

    int samples() const { return static_cast<int>(Y.cols()); }
};

/// Fixed-step RK4 integration of the per-area AGC dynamics with the configured
/// nonlinearities, starting from the zero-deviation equilibrium. Inputs are held
/// constant over each sampling interval. Throws SimulationError when a state
/// exceeds 1e6 in magnitude.
SampledTrajectory simulate_nonlinear(const PlantConfig& cfg, const DisturbanceSpec& dist,
                                     const AttackSpec& atk);

/// x[k+1] = A x[k] + B_d d[k] + B_f f[k], y[k] = C x[k] + D_f f[k], x[0] = 0.
SampledTrajectory simulate_linear(const lti::LinearModel& discrete, const Matrix& d, const Matrix& f);

SampledTrajectory simulate_linear(const lti::LinearModel& discrete, const DisturbanceSpec& dist,
                                  const AttackSpec& atk);

/// CSV with header "t,<name_1>,...,<name_ny>" and a JSON sidecar <path>.json.
void write_trajectory(const std::filesystem::path& csv, const SampledTrajectory& traj,
                      const std::vector<std::string>& names);
SampledTrajectory read_trajectory(const std::filesystem::path& csv);

}  // namespace fdi::plant
