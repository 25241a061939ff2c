#include "fdi/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "fdi/error.hpp"
#include "fdi/matrix_io.hpp"

namespace fdi::plant {

using nlohmann::json;

namespace {

constexpr double kBlowUp = 1e6;

bool is_multiple(double x, double of) {
    const double r = x / of;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

double deadband(double v, double half_width) {
    if (half_width <= 0.0) return v;
    if (v > half_width) return v - half_width;
    if (v < -half_width) return v + half_width;
    return 0.0;
}

json describe(const AttackSpec& a) {
    json j{{"mode", to_string(a.mode)}, {"onset", a.onset}};
    if (a.mode == AttackMode::univariate) {
        j["channel"] = a.channel;
        j["value"] = a.value;
    } else if (a.mode == AttackMode::multivariate) {
        j["values"] = std::vector<double>(a.values.data(), a.values.data() + a.values.size());
    }
    return j;
}

json describe(const DisturbanceSpec& d) {
    json j{{"targets", d.targets}, {"kind", to_string(d.kind)}, {"seed", d.seed}, {"horizon", d.horizon}};
    if (d.kind == DisturbanceKind::gaussian) {
        j["sigma"] = d.sigma;
        j["hold"] = d.hold;
    } else {
        j["step_value"] = d.step_value;
        j["step_time"] = d.step_time;
    }
    return j;
}

// Right-hand side of the per-area dynamics with the nonlinearity menu.
class AreaDynamics {
   public:
    AreaDynamics(const PlantConfig& cfg, const agc::AgcSystem& sys) : cfg_(cfg), sys_(sys) {
        n_x_ = sys.model.n_x();
        n_areas_ = static_cast<Eigen::Index>(sys.areas.size());
        gains_.resize(sys.topology.channels.size());
        for (std::size_t c = 0; c < gains_.size(); ++c) gains_[c] = sys.ace_gain(sys.topology.channels[c]);
    }

    Eigen::Index size() const { return n_x_ + n_areas_; }
    Eigen::Index angle(Eigen::Index area) const { return n_x_ + area; }

    // With sine coupling the tie states are algebraic functions of the angles.
    void sync_ties(Vector& x) const {
        if (!cfg_.nonlinear.tie_sine_coupling) return;
        for (std::size_t i = 0; i < sys_.areas.size(); ++i) {
            const auto& l = sys_.layout[i];
            const auto& nbs = sys_.areas[i].neighbors;
            for (int k = 0; k < l.n_ties; ++k) {
                const auto& nb = nbs[static_cast<std::size_t>(k)];
                x(l.tie(k)) = nb.T * std::sin(x(angle(static_cast<Eigen::Index>(i))) - x(angle(nb.area)));
            }
        }
    }

    void clamp(Vector& x) const {
        if (!cfg_.nonlinear.agc_saturation) return;
        const auto [lo, hi] = *cfg_.nonlinear.agc_saturation;
        for (const auto& l : sys_.layout) x(l.agc()) = std::clamp(x(l.agc()), lo, hi);
    }

    void eval(const Vector& x, const Vector& d, const Vector& f, Vector& dx) const {
        const auto& nl = cfg_.nonlinear;
        dx.setZero(size());
        for (std::size_t i = 0; i < sys_.areas.size(); ++i) {
            const auto& a = sys_.areas[i];
            const auto& l = sys_.layout[i];
            const double w = x(l.omega());
            double ties = 0.0;
            for (int k = 0; k < l.n_ties; ++k) {
                const auto& nb = a.neighbors[static_cast<std::size_t>(k)];
                const double wj = x(sys_.layout[static_cast<std::size_t>(nb.area)].omega());
                double rate = nb.T * (w - wj);
                if (nl.tie_sine_coupling) {
                    rate *= std::cos(x(angle(static_cast<Eigen::Index>(i))) - x(angle(nb.area)));
                }
                dx(l.tie(k)) = rate;
                ties += x(l.tie(k));
            }
            double pm = 0.0;
            const double w_gov = deadband(w, nl.governor_deadband);
            for (int g = 0; g < l.n_gens; ++g) {
                const auto& gen = a.generators[static_cast<std::size_t>(g)];
                pm += x(l.pm(g));
                double rate = (-x(l.pm(g)) + gen.phi * x(l.agc()) - w_gov / gen.S) / gen.T_ch;
                if (nl.rate_limit) rate = std::clamp(rate, -*nl.rate_limit, *nl.rate_limit);
                dx(l.pm(g)) = rate;
            }
            dx(l.omega()) = (pm - ties - a.D * w - d(static_cast<Eigen::Index>(i))) / (2.0 * a.H);

            double agc = -a.K_I * (a.beta * w + ties);
            for (std::size_t c = 0; c < gains_.size(); ++c) {
                if (sys_.topology.channels[c].area == static_cast<int>(i)) {
                    agc -= gains_[c] * f(static_cast<Eigen::Index>(c));
                }
            }
            if (nl.agc_saturation) {
                const auto [lo, hi] = *nl.agc_saturation;
                if ((x(l.agc()) >= hi && agc > 0.0) || (x(l.agc()) <= lo && agc < 0.0)) agc = 0.0;
            }
            dx(l.agc()) = agc;
            dx(angle(static_cast<Eigen::Index>(i))) = w;
        }
    }

   private:
    const PlantConfig& cfg_;
    const agc::AgcSystem& sys_;
    Eigen::Index n_x_ = 0;
    Eigen::Index n_areas_ = 0;
    std::vector<double> gains_;
};

}  // namespace

std::string to_string(AttackMode m) {
    switch (m) {
        case AttackMode::none: return "none";
        case AttackMode::univariate: return "univariate";
        case AttackMode::multivariate: return "multivariate";
    }
    return "?";
}

std::string to_string(DisturbanceKind k) { return k == DisturbanceKind::gaussian ? "gaussian" : "step"; }

int PlantConfig::steps_per_sample() const {
    if (!(dt > 0.0) || !(Ts > 0.0)) throw ConfigError("dt and Ts must be positive");
    if (!is_multiple(Ts, dt)) throw ConfigError("integrator step dt must divide the sampling time Ts");
    return static_cast<int>(std::lround(Ts / dt));
}

void PlantConfig::validate() const {
    steps_per_sample();
    if (nonlinear.agc_saturation && !(nonlinear.agc_saturation->first < nonlinear.agc_saturation->second)) {
        throw ConfigError("AGC saturation requires P_agc_min < P_agc_max");
    }
    if (nonlinear.agc_saturation &&
        (nonlinear.agc_saturation->first > 0.0 || nonlinear.agc_saturation->second < 0.0)) {
        throw ConfigError("AGC saturation interval must contain the zero equilibrium");
    }
    if (nonlinear.governor_deadband < 0.0) throw ConfigError("governor dead-band must be nonnegative");
    if (nonlinear.rate_limit && !(*nonlinear.rate_limit > 0.0)) throw ConfigError("rate limit must be positive");
}

void DisturbanceSpec::validate(double Ts) const {
    if (!(horizon > 0.0) || !is_multiple(horizon, Ts)) {
        throw ConfigError("disturbance horizon must be a positive multiple of Ts");
    }
    if (!(sigma >= 0.0)) throw ConfigError("disturbance sigma must be nonnegative");
    if (kind == DisturbanceKind::gaussian && (!(hold > 0.0) || !is_multiple(hold, Ts))) {
        throw ConfigError("disturbance hold interval must be a positive multiple of Ts");
    }
}

Vector AttackSpec::bias(Eigen::Index n_f) const {
    Vector v = Vector::Zero(n_f);
    switch (mode) {
        case AttackMode::none: break;
        case AttackMode::univariate:
            if (channel < 0 || channel >= n_f) throw ConfigError("attack channel out of range");
            v(channel) = value;
            break;
        case AttackMode::multivariate:
            if (values.size() != n_f) {
                throw DimensionError("multivariate attack has " + std::to_string(values.size()) +
                                     " entries, expected " + std::to_string(n_f));
            }
            v = values;
            break;
    }
    return v;
}

int sample_count(double horizon, double Ts) { return static_cast<int>(std::lround(horizon / Ts)); }

int grid_index(double t, double Ts) { return static_cast<int>(std::ceil(t / Ts - 1e-9)); }

Matrix gen_disturbance(const DisturbanceSpec& spec, Eigen::Index n_d, double Ts) {
    spec.validate(Ts);
    const int T = sample_count(spec.horizon, Ts);
    Matrix d = Matrix::Zero(n_d, T);
    for (int target : spec.targets) {
        if (target < 0 || target >= n_d) throw ConfigError("disturbance target out of range");
    }
    if (spec.kind == DisturbanceKind::step) {
        const int k0 = std::max(0, grid_index(spec.step_time, Ts));
        for (int target : spec.targets) {
            for (int k = k0; k < T; ++k) d(target, k) = spec.step_value;
        }
        return d;
    }
    if (spec.sigma == 0.0) return d;
    const int per_hold = sample_count(spec.hold, Ts);
    const int n_holds = (T + per_hold - 1) / per_hold;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.sigma);
    for (int h = 0; h < n_holds; ++h) {
        for (int target : spec.targets) {
            const double v = normal(rng);
            for (int k = h * per_hold; k < std::min(T, (h + 1) * per_hold); ++k) d(target, k) = v;
        }
    }
    return d;
}

Matrix attack_signal(const AttackSpec& atk, Eigen::Index n_f, int T, double Ts) {
    Matrix f = Matrix::Zero(n_f, T);
    if (atk.mode == AttackMode::none) return f;
    const Vector v = atk.bias(n_f);
    for (int k = std::max(0, grid_index(atk.onset, Ts)); k < T; ++k) f.col(k) = v;
    return f;
}

SampledTrajectory simulate_nonlinear(const PlantConfig& cfg, const DisturbanceSpec& dist, const AttackSpec& atk) {
    cfg.validate();
    const auto sys = agc::assemble_multiarea(cfg.areas, cfg.topology);
    const auto& model = sys.model;
    const Matrix d = gen_disturbance(dist, model.n_d(), cfg.Ts);
    const int T = static_cast<int>(d.cols());
    const Matrix f = attack_signal(atk, model.n_f(), T, cfg.Ts);

    const AreaDynamics dyn(cfg, sys);
    const int steps = cfg.steps_per_sample();
    const double h = cfg.dt;
    Vector x = Vector::Zero(dyn.size());
    Vector k1, k2, k3, k4;

    SampledTrajectory out;
    out.t.resize(T);
    out.Y.resize(model.n_y(), T);
    for (int k = 0; k < T; ++k) {
        out.t(k) = k * cfg.Ts;
        out.Y.col(k) = model.C * x.head(model.n_x()) + model.D_f * f.col(k);
        if (k + 1 == T) break;
        const Vector dk = d.col(k);
        const Vector fk = f.col(k);
        for (int s = 0; s < steps; ++s) {
            dyn.eval(x, dk, fk, k1);
            dyn.eval(x + 0.5 * h * k1, dk, fk, k2);
            dyn.eval(x + 0.5 * h * k2, dk, fk, k3);
            dyn.eval(x + h * k3, dk, fk, k4);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            dyn.clamp(x);
            dyn.sync_ties(x);
            const double peak = x.cwiseAbs().maxCoeff();
            if (!std::isfinite(peak) || peak > kBlowUp) {
                const double when = k * cfg.Ts + (s + 1) * h;
                throw SimulationError("plant state diverged at t = " + std::to_string(when) + " s", when);
            }
        }
    }
    out.meta.Ts = cfg.Ts;
    out.meta.seed = dist.seed;
    out.meta.source = "nonlinear";
    out.meta.attack = describe(atk).dump();
    out.meta.disturbance = describe(dist).dump();
    return out;
}

SampledTrajectory simulate_linear(const lti::LinearModel& m, const Matrix& d, const Matrix& f) {
    m.validate();
    if (!m.is_discrete()) throw ConfigError("simulate_linear needs a discrete model");
    if (d.rows() != m.n_d() || f.rows() != m.n_f() || d.cols() != f.cols()) {
        throw DimensionError("input signals do not match the model");
    }
    const auto T = d.cols();
    SampledTrajectory out;
    out.t.resize(T);
    out.Y.resize(m.n_y(), T);
    Vector x = Vector::Zero(m.n_x());
    for (Eigen::Index k = 0; k < T; ++k) {
        out.t(k) = static_cast<double>(k) * *m.Ts;
        out.Y.col(k) = m.C * x + m.D_f * f.col(k);
        x = m.A * x + m.B_d * d.col(k) + m.B_f * f.col(k);
    }
    out.meta.Ts = *m.Ts;
    out.meta.source = "linear";
    return out;
}

SampledTrajectory simulate_linear(const lti::LinearModel& m, const DisturbanceSpec& dist, const AttackSpec& atk) {
    if (!m.is_discrete()) throw ConfigError("simulate_linear needs a discrete model");
    const Matrix d = gen_disturbance(dist, m.n_d(), *m.Ts);
    const Matrix f = attack_signal(atk, m.n_f(), static_cast<int>(d.cols()), *m.Ts);
    auto out = simulate_linear(m, d, f);
    out.meta.seed = dist.seed;
    out.meta.attack = describe(atk).dump();
    out.meta.disturbance = describe(dist).dump();
    return out;
}

void write_trajectory(const std::filesystem::path& csv, const SampledTrajectory& traj,
                      const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != traj.Y.rows()) {
        throw DimensionError("trajectory has " + std::to_string(traj.Y.rows()) + " outputs but " +
                             std::to_string(names.size()) + " names");
    }
    std::ofstream os(csv);
    if (!os) throw ConfigError("cannot write " + csv.string());
    os << 't';
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (Eigen::Index k = 0; k < traj.Y.cols(); ++k) {
        os << io::format_double(traj.t(k));
        for (Eigen::Index i = 0; i < traj.Y.rows(); ++i) os << ',' << io::format_double(traj.Y(i, k));
        os << '\n';
    }
    json meta{{"Ts", traj.meta.Ts},
              {"seed", traj.meta.seed},
              {"source", traj.meta.source},
              {"samples", traj.Y.cols()},
              {"outputs", names}};
    meta["attack"] = traj.meta.attack.empty() ? json() : json::parse(traj.meta.attack);
    meta["disturbance"] = traj.meta.disturbance.empty() ? json() : json::parse(traj.meta.disturbance);
    std::ofstream ms(csv.string() + ".json");
    if (!ms) throw ConfigError("cannot write sidecar for " + csv.string());
    ms << meta.dump(2) << '\n';
}

SampledTrajectory read_trajectory(const std::filesystem::path& csv) {
    std::ifstream is(csv);
    if (!is) throw ConfigError("cannot read " + csv.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("t", 0) != 0) throw ConfigError(csv.string() + ": missing header");
    const auto n_y = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<Eigen::Index>(row.size()) != n_y + 1) throw ConfigError(csv.string() + ": ragged row");
        rows.push_back(std::move(row));
    }
    SampledTrajectory out;
    const auto T = static_cast<Eigen::Index>(rows.size());
    out.t.resize(T);
    out.Y.resize(n_y, T);
    for (Eigen::Index k = 0; k < T; ++k) {
        out.t(k) = rows[static_cast<std::size_t>(k)][0];
        for (Eigen::Index i = 0; i < n_y; ++i) out.Y(i, k) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i + 1)];
    }
    std::ifstream ms(csv.string() + ".json");
    if (ms) {
        const auto meta = json::parse(ms);
        out.meta.Ts = meta.value("Ts", 0.0);
        out.meta.seed = meta.value("seed", std::uint64_t{0});
        out.meta.source = meta.value("source", std::string());
        if (meta.contains("attack") && !meta["attack"].is_null()) out.meta.attack = meta["attack"].dump();
        if (meta.contains("disturbance") && !meta["disturbance"].is_null()) {
            out.meta.disturbance = meta["disturbance"].dump();
        }
    }
    return out;
}

}  // namespace fdi::plant
