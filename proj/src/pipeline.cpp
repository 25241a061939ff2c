#include "fdi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "fdi/error.hpp"
#include "fdi/matrix_io.hpp"
#include "fdi/plant.hpp"
#include "json.hpp"

namespace fdi::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

std::string seed_hex(std::uint64_t s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(s));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string() + " (run the earlier phase first)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string index_name(const char* prefix, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d%s", prefix, i, ext);
    return buf;
}

json branches_json(const std::vector<design::BranchReport>& branches) {
    json arr = json::array();
    for (const auto& b : branches) {
        arr.push_back({{"j", b.j},
                       {"sign", b.sign},
                       {"status", opt::to_string(b.status)},
                       {"value", finite_or_null(b.value)},
                       {"message", b.message}});
    }
    return arr;
}

json pretrain_json(const design::PretrainResult& pre, double bound) {
    json gam = json::array();
    for (double g : pre.gamma) gam.push_back(finite_or_null(g));
    return {{"format", kLayoutVersion},
            {"coefficient_bound", bound},
            {"gamma_star", gam},
            {"j_star", pre.j_star},
            {"best", finite_or_null(pre.best())},
            {"branches", branches_json(pre.branches)}};
}

plant::DisturbanceSpec disturbance_for(const config::ExperimentConfig& cfg, std::uint64_t seed, double horizon) {
    auto d = cfg.disturbance;
    d.seed = seed;
    d.horizon = horizon;
    return d;
}

json detection_json(const runtime::DetectionReport& r) {
    return {{"detected", r.detected()},
            {"first_alarm_time", r.detected() ? json(r.first_alarm_time) : json()},
            {"max_energy", r.max_energy},
            {"final_energy", r.final_energy}};
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t train_seed(std::uint64_t seed, int i) {
    return splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(i));
}

std::uint64_t test_seed(std::uint64_t seed, int i) {
    return splitmix64(splitmix64(seed) + (1ULL << 40) + static_cast<std::uint64_t>(i));
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    jobs = std::clamp(jobs, 1, n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<int> next{0};
        std::atomic<bool> stop{false};
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (int i = next++; i < n && !stop; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[static_cast<std::size_t>(i)] = std::current_exception();
                        stop = true;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

Context make_context(const config::ExperimentConfig& cfg) {
    cfg.validate();
    Context ctx;
    ctx.cfg = cfg;
    ctx.system = agc::assemble_multiarea(cfg.model.areas, cfg.model.topology);
    agc::ensure_stable(ctx.system);
    ctx.discrete = lti::zoh_discretize(ctx.system.model, cfg.Ts);
    ctx.stacked = lti::build_stacked(lti::assemble_dae(ctx.discrete), cfg.d_N);
    ctx.T_train = plant::sample_count(cfg.train.horizon, cfg.Ts);
    ctx.G = design::gram_matrix(design::denominator(cfg.d_N, cfg.p), ctx.T_train);
    ctx.model_hash = config::model_hash(cfg.model, cfg.Ts);
    return ctx;
}

std::vector<Matrix> TrainingBundle::Qs() const {
    std::vector<Matrix> out;
    out.reserve(instances.size());
    for (const auto& in : instances) out.push_back(in.Q);
    return out;
}

TrainingBundle run_train(const Context& ctx, int jobs) {
    const auto& cfg = ctx.cfg;
    const auto pc = cfg.plant_config();
    const int m = cfg.train.instances;
    TrainingBundle b;
    b.model_hash = ctx.model_hash;
    b.instances.resize(static_cast<std::size_t>(m));
    parallel_for(m, jobs, [&](int i) {
        auto& inst = b.instances[static_cast<std::size_t>(i)];
        inst.seed = train_seed(cfg.seed, i);
        const auto dist = disturbance_for(cfg, inst.seed, cfg.train.horizon);
        const plant::AttackSpec none;
        try {
            inst.plant = plant::simulate_nonlinear(pc, dist, none);
        } catch (const SimulationError& e) {
            throw SimulationError("training instance " + std::to_string(i) + " (seed " + seed_hex(inst.seed) +
                                      "): " + e.what(),
                                  e.time());
        }
        inst.model = plant::simulate_linear(ctx.discrete, dist, none);
        inst.E = design::mismatch_signature(inst.plant.Y, inst.model.Y);
        inst.Q = design::q_matrix(ctx.stacked, inst.E, ctx.G).Q;
    });
    b.Qbar = design::average_Q(b.Qs());
    return b;
}

TrainingBundle bundle_from_trajectories(const Context& ctx, std::vector<plant::SampledTrajectory> yp,
                                        std::vector<plant::SampledTrajectory> y) {
    if (yp.size() != y.size() || yp.empty()) throw ConfigError("training bundle is empty or inconsistent");
    TrainingBundle b;
    b.model_hash = ctx.model_hash;
    for (std::size_t i = 0; i < yp.size(); ++i) {
        if (yp[i].meta.seed != y[i].meta.seed) throw ConfigError("training pair " + std::to_string(i) + " mixes seeds");
        auto E = design::mismatch_signature(yp[i].Y, y[i].Y);
        if (E.rows() != ctx.stacked.dae.n_y || E.cols() != ctx.T_train) {
            throw DimensionError("training signature " + std::to_string(i) + " has the wrong shape");
        }
        TrainingInstance inst;
        inst.seed = yp[i].meta.seed;
        inst.Q = design::q_matrix(ctx.stacked, E, ctx.G).Q;
        inst.E = std::move(E);
        inst.plant = std::move(yp[i]);
        inst.model = std::move(y[i]);
        b.instances.push_back(std::move(inst));
    }
    b.Qbar = design::average_Q(b.Qs());
    return b;
}

DesignOutcome run_design(const Context& ctx, const TrainingBundle& bundle, design::Mode mode) {
    const auto& cfg = ctx.cfg;
    auto opts = cfg.design;
    opts.mode = mode;
    opts.d_N = cfg.d_N;
    opts.p = cfg.p;
    DesignOutcome out;
    if (cfg.attack.kind == design::Kind::univariate) {
        out.design = design::design_univariate(ctx.stacked, bundle.Qbar, opts);
    } else {
        out.pretrain = design::pretrain_multivariate(ctx.stacked, cfg.attack, opts.coefficient_bound);
        out.design = design::design_multivariate(ctx.stacked, bundle.Qbar, cfg.attack, out.pretrain->best(),
                                                 out.pretrain->j_star, opts);
    }
    const auto inv = design::check_invariants(ctx.stacked, out.design, &cfg.attack);
    if (!inv.ok()) throw NumericalError("designed filter violates its invariants: " + inv.violations.front());
    if (mode == design::Mode::pure_model) {
        out.detector = runtime::calibrate_threshold(out.design, {Matrix::Zero(1, 1)}, cfg.detector.margin,
                                                    cfg.detector.window);
        out.detector.tau_star = 0.0;
    } else {
        out.detector = runtime::calibrate_threshold(out.design, bundle.Qs(), cfg.detector.margin, cfg.detector.window);
    }
    if (!(out.detector.threshold() > 0.0)) throw ConfigError("threshold tau* + margin must be positive");
    return out;
}

Vector test_attack(const Context& ctx, const design::FilterDesign& d) {
    const auto& cfg = ctx.cfg;
    if (cfg.attack.kind == design::Kind::univariate) return Vector::Constant(1, cfg.attack_value);
    const auto alpha = design::worst_case_alpha(ctx.stacked, d, cfg.attack, d.branch_j);
    return cfg.attack.Fb * alpha;
}

TestOutcome run_test(const Context& ctx, const design::Artifact& art, int jobs) {
    const auto& cfg = ctx.cfg;
    const auto pc = cfg.plant_config();
    const runtime::Detector det{art.tau_star, art.margin, cfg.detector.window};
    const auto& L = ctx.stacked.dae.L;
    TestOutcome out;
    out.attack = test_attack(ctx, art.design);
    if (cfg.attack.kind == design::Kind::multivariate) {
        out.steady_state_margin = design::steady_state_margin(ctx.stacked, art.design, cfg.attack);
    }
    plant::AttackSpec atk;
    atk.onset = cfg.attack_onset;
    if (cfg.attack.kind == design::Kind::univariate) {
        atk.mode = plant::AttackMode::univariate;
        atk.channel = cfg.attack_channel;
        atk.value = cfg.attack_value;
    } else {
        atk.mode = plant::AttackMode::multivariate;
        atk.values = out.attack;
    }
    const int n = cfg.test.instances;
    out.runs.resize(static_cast<std::size_t>(n));
    parallel_for(n, jobs, [&](int i) {
        auto& run = out.runs[static_cast<std::size_t>(i)];
        run.seed = test_seed(cfg.seed, i);
        const auto dist = disturbance_for(cfg, run.seed, cfg.test.horizon);
        const auto y0 = plant::simulate_nonlinear(pc, dist, plant::AttackSpec{});
        const auto y1 = plant::simulate_nonlinear(pc, dist, atk);
        run.clean = runtime::detect(det, runtime::run_filter(art.design, L, y0.Y), cfg.Ts, cfg.warmup());
        run.attacked = runtime::detect(det, runtime::run_filter(art.design, L, y1.Y), cfg.Ts, cfg.warmup());
    });
    const int onset = plant::grid_index(cfg.attack_onset, cfg.Ts);
    double latency = 0.0;
    out.min_attacked_peak = std::numeric_limits<double>::infinity();
    for (const auto& run : out.runs) {
        out.false_alarms += run.clean.detected();
        out.max_clean_energy = std::max(out.max_clean_energy, run.clean.max_energy);
        double peak = 0.0;
        for (Eigen::Index k = onset; k < run.attacked.energy.size(); ++k) peak = std::max(peak, run.attacked.energy(k));
        out.min_attacked_peak = std::min(out.min_attacked_peak, peak);
        if (!run.attacked.detected()) continue;
        if (run.attacked.first_alarm < onset) {
            ++out.early_alarms;
        } else {
            ++out.detections;
            latency += run.attacked.first_alarm_time - cfg.attack_onset;
        }
    }
    if (out.detections > 0) out.mean_latency = latency / out.detections;
    return out;
}

config::ExperimentConfig apply_options(config::ExperimentConfig cfg, const Options& opts) {
    if (opts.mode) cfg.design.mode = *opts.mode;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.jobs) cfg.jobs = *opts.jobs;
    cfg.validate();
    return cfg;
}

void prepare_directory(const config::ExperimentConfig& cfg, const fs::path& out, bool dump_matrices) {
    fs::create_directories(out);
    write_text(out / "config.json", config::experiment_json(cfg));
    if (!dump_matrices) return;
    const auto sys = agc::assemble_multiarea(cfg.model.areas, cfg.model.topology);
    const auto dir = out / "matrices";
    fs::create_directories(dir);
    io::write_matrix_csv(dir / "A_c.csv", sys.model.A);
    io::write_matrix_csv(dir / "B_cd.csv", sys.model.B_d);
    io::write_matrix_csv(dir / "B_cf.csv", sys.model.B_f);
    io::write_matrix_csv(dir / "C.csv", sys.model.C);
    io::write_matrix_csv(dir / "D_f.csv", sys.model.D_f);
}

void cmd_pretrain(const config::ExperimentConfig& cfg, const fs::path& out) {
    if (cfg.attack.kind != design::Kind::multivariate) throw ConfigError("pretrain needs a multivariate attack model");
    const auto ctx = make_context(cfg);
    const auto pre = design::pretrain_multivariate(ctx.stacked, cfg.attack, cfg.design.coefficient_bound);
    write_text(out / "pretrain" / "report.json", pretrain_json(pre, cfg.design.coefficient_bound).dump(2) + "\n");
}

void cmd_train(const config::ExperimentConfig& cfg, const fs::path& out) {
    const auto ctx = make_context(cfg);
    const auto b = run_train(ctx, cfg.jobs);
    const auto dir = out / "train";
    fs::create_directories(dir / "trajectories");
    const auto names = ctx.system.output_names();
    io::write_matrix_csv(dir / "Qbar.csv", b.Qbar);
    std::ostringstream table;
    table << "index,seed,signature_norm,q_trace,q_min_eig\n";
    json seeds = json::array();
    for (std::size_t i = 0; i < b.instances.size(); ++i) {
        const auto& in = b.instances[i];
        plant::write_trajectory(dir / "trajectories" / index_name("plant", static_cast<int>(i), ".csv"), in.plant,
                                names);
        plant::write_trajectory(dir / "trajectories" / index_name("model", static_cast<int>(i), ".csv"), in.model,
                                names);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(in.Q, Eigen::EigenvaluesOnly);
        table << i << ',' << seed_hex(in.seed) << ',' << io::format_double(in.E.norm()) << ','
              << io::format_double(in.Q.trace()) << ',' << io::format_double(es.eigenvalues()(0)) << '\n';
        seeds.push_back(seed_hex(in.seed));
    }
    write_text(dir / "instances.csv", table.str());
    const json meta{{"format", kLayoutVersion},
                    {"model_hash", seed_hex(ctx.model_hash)},
                    {"instances", b.instances.size()},
                    {"T", ctx.T_train},
                    {"Ts", cfg.Ts},
                    {"d_N", cfg.d_N},
                    {"p", cfg.p},
                    {"seeds", seeds}};
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

TrainingBundle read_bundle(const Context& ctx, const fs::path& out) {
    const auto dir = out / "train";
    json meta;
    try {
        meta = json::parse(read_text(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("training meta: ") + e.what());
    }
    if (meta.at("model_hash").get<std::string>() != seed_hex(ctx.model_hash)) {
        throw ConfigError("training bundle was produced for a different model");
    }
    if (meta.at("d_N").get<int>() != ctx.cfg.d_N || meta.at("T").get<int>() != ctx.T_train ||
        meta.at("p").get<double>() != ctx.cfg.p) {
        throw ConfigError("training bundle was produced with different d_N, p or horizon");
    }
    std::vector<plant::SampledTrajectory> yp, y;
    const int m = meta.at("instances").get<int>();
    for (int i = 0; i < m; ++i) {
        yp.push_back(plant::read_trajectory(dir / "trajectories" / index_name("plant", i, ".csv")));
        y.push_back(plant::read_trajectory(dir / "trajectories" / index_name("model", i, ".csv")));
    }
    return bundle_from_trajectories(ctx, std::move(yp), std::move(y));
}

void cmd_design(const config::ExperimentConfig& cfg, const fs::path& out) {
    const auto ctx = make_context(cfg);
    const auto bundle = read_bundle(ctx, out);
    const auto res = run_design(ctx, bundle, cfg.design.mode);
    const auto dir = out / "design";
    write_text(dir / "artifact.json",
               design::artifact_json(res.design, ctx.model_hash, res.detector.tau_star, res.detector.margin));
    json rep{{"format", kLayoutVersion},
             {"kind", design::to_string(res.design.kind)},
             {"mode", design::to_string(res.design.mode)},
             {"objective", res.design.objective},
             {"branch", {{"j", res.design.branch_j}, {"sign", res.design.branch_sign}}},
             {"nbar_inf_norm", res.design.Nbar.cwiseAbs().maxCoeff()},
             {"tau_star", res.detector.tau_star},
             {"margin", res.detector.margin},
             {"threshold", res.detector.threshold()},
             {"training_instances", bundle.instances.size()},
             {"branches", branches_json(res.design.branches)}};
    if (res.pretrain) {
        rep["gamma"] = res.design.gamma;
        rep["pretrain"] = pretrain_json(*res.pretrain, cfg.design.coefficient_bound);
        rep["bisection"] = {{"iterations", cfg.design.bisection_iterations}, {"tol", cfg.design.bisection_tol}};
    }
    write_text(dir / "report.json", rep.dump(2) + "\n");
}

design::Artifact read_artifact(const Context& ctx, const fs::path& out) {
    return design::parse_artifact(read_text(out / "design" / "artifact.json"), ctx.stacked, ctx.model_hash,
                                  &ctx.cfg.attack);
}

void cmd_test(const config::ExperimentConfig& cfg, const fs::path& out) {
    const auto ctx = make_context(cfg);
    const auto art = read_artifact(ctx, out);
    const auto res = run_test(ctx, art, cfg.jobs);
    const auto dir = out / "test";
    fs::create_directories(dir);
    json runs = json::array();
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
        const auto& r = res.runs[i];
        runtime::write_residual_trace(dir / index_name("clean", static_cast<int>(i), ".csv"), r.clean);
        runtime::write_residual_trace(dir / index_name("attack", static_cast<int>(i), ".csv"), r.attacked);
        runs.push_back({{"seed", seed_hex(r.seed)}, {"clean", detection_json(r.clean)},
                        {"attacked", detection_json(r.attacked)}});
    }
    json rep{{"format", kLayoutVersion},
             {"kind", design::to_string(art.design.kind)},
             {"mode", design::to_string(art.design.mode)},
             {"threshold", art.threshold()},
             {"tau_star", art.tau_star},
             {"margin", art.margin},
             {"attack", vec_json(res.attack)},
             {"attack_onset", cfg.attack_onset},
             {"runs", runs},
             {"false_alarms", res.false_alarms},
             {"early_alarms", res.early_alarms},
             {"detections", res.detections},
             {"mean_latency", res.detections > 0 ? json(res.mean_latency) : json()},
             {"max_clean_energy", res.max_clean_energy},
             {"min_attacked_peak", res.min_attacked_peak}};
    if (res.steady_state_margin >= 0.0) rep["steady_state_margin"] = res.steady_state_margin;
    write_text(dir / "report.json", rep.dump(2) + "\n");
}

void cmd_run_all(const config::ExperimentConfig& cfg, const fs::path& out) {
    if (cfg.attack.kind == design::Kind::multivariate) cmd_pretrain(cfg, out);
    cmd_train(cfg, out);
    cmd_design(cfg, out);
    cmd_test(cfg, out);
}

}  // namespace fdi::pipeline
