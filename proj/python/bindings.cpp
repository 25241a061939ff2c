#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fdi/config.hpp"
#include "fdi/design.hpp"
#include "fdi/error.hpp"
#include "fdi/opt.hpp"
#include "fdi/pipeline.hpp"
#include "fdi/runtime.hpp"

namespace py = pybind11;
using namespace fdi;

namespace {

struct Experiment {
    pipeline::Context ctx;
};

struct Bundle {
    pipeline::TrainingBundle bundle;
};

struct Filter {
    design::FilterDesign design;
    runtime::Detector detector;
    std::uint64_t model_hash = 0;

    design::Artifact artifact() const {
        design::Artifact a;
        a.design = design;
        a.model_hash = model_hash;
        a.tau_star = detector.tau_star;
        a.margin = detector.margin;
        return a;
    }
};

Experiment make_experiment(const std::string& text, const std::string& base_dir) {
    return {pipeline::make_context(config::parse_experiment(text, base_dir))};
}

py::dict detection_dict(const runtime::DetectionReport& r) {
    py::dict d;
    d["t"] = r.t;
    d["r"] = r.r;
    d["energy"] = r.energy;
    d["alarm"] = r.alarm;
    d["first_alarm"] = r.first_alarm;
    d["first_alarm_time"] = r.first_alarm_time;
    d["max_energy"] = r.max_energy;
    d["threshold"] = r.threshold;
    return d;
}

py::dict solution_dict(const opt::Solution& s) {
    py::dict d;
    d["status"] = opt::to_string(s.status);
    d["x"] = s.x;
    d["objective"] = s.objective;
    d["eq_dual"] = s.eq_dual;
    d["ineq_dual"] = s.ineq_dual;
    d["iterations"] = s.iterations;
    d["kkt"] = py::dict(py::arg("primal") = s.residuals.primal, py::arg("stationarity") = s.residuals.stationarity,
                        py::arg("complementarity") = s.residuals.complementarity,
                        py::arg("duality_gap") = s.residuals.duality_gap);
    d["message"] = s.message;
    return d;
}

opt::QpProblem make_problem(const Matrix& P, const Vector& c, const Matrix& Aeq, const Vector& beq,
                            const Matrix& Aineq, const Vector& bineq, const Vector& lower, const Vector& upper) {
    opt::QpProblem p;
    p.P = P;
    p.c = c;
    p.Aeq = Aeq;
    p.beq = beq;
    p.Aineq = Aineq;
    p.bineq = bineq;
    p.lower = lower;
    p.upper = upper;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Residual filter design for AGC false data injection detection.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<SimulationError>(m, "SimulationError", base.ptr());

    m.def("denominator", &design::denominator, py::arg("d_N"), py::arg("p"));
    m.def("impulse_response", &design::impulse_response, py::arg("a"), py::arg("T"));
    m.def("gram_matrix", &design::gram_matrix, py::arg("a"), py::arg("T"));
    m.def("residual_energy", &runtime::residual_energy, py::arg("r"), py::arg("window"));

    m.def(
        "solve_qp",
        [](const Matrix& P, const Vector& c, const Matrix& Aeq, const Vector& beq, const Matrix& Aineq,
           const Vector& bineq, const Vector& lower, const Vector& upper) {
            return solution_dict(opt::solve_qp(make_problem(P, c, Aeq, beq, Aineq, bineq, lower, upper)));
        },
        py::arg("P"), py::arg("c"), py::arg("Aeq") = Matrix(), py::arg("beq") = Vector(),
        py::arg("Aineq") = Matrix(), py::arg("bineq") = Vector(), py::arg("lower") = Vector(),
        py::arg("upper") = Vector());
    m.def(
        "solve_lp",
        [](const Vector& c, const Matrix& Aeq, const Vector& beq, const Matrix& Aineq, const Vector& bineq,
           const Vector& lower, const Vector& upper) {
            return solution_dict(
                opt::solve_lp(make_problem(Matrix(), c, Aeq, beq, Aineq, bineq, lower, upper)));
        },
        py::arg("c"), py::arg("Aeq") = Matrix(), py::arg("beq") = Vector(), py::arg("Aineq") = Matrix(),
        py::arg("bineq") = Vector(), py::arg("lower") = Vector(), py::arg("upper") = Vector());

    m.def(
        "reference_config",
        [](const std::string& kind) {
            if (kind == "univariate") return config::experiment_json(config::univariate_reference());
            if (kind == "multivariate") return config::experiment_json(config::multivariate_reference());
            throw ConfigError("unknown reference experiment '" + kind + "'");
        },
        py::arg("kind"), "Resolved JSON of a built-in reference experiment.");
    m.def(
        "load_config", [](const std::filesystem::path& p) { return config::experiment_json(config::load_experiment(p)); },
        py::arg("path"), "Reads an experiment file and returns its resolved JSON.");

    py::class_<Filter>(m, "Filter")
        .def_property_readonly("Nbar", [](const Filter& f) { return f.design.Nbar; })
        .def_property_readonly("a", [](const Filter& f) { return f.design.a; })
        .def_property_readonly("mode", [](const Filter& f) { return design::to_string(f.design.mode); })
        .def_property_readonly("kind", [](const Filter& f) { return design::to_string(f.design.kind); })
        .def_property_readonly("objective", [](const Filter& f) { return f.design.objective; })
        .def_property_readonly("gamma", [](const Filter& f) { return f.design.gamma; })
        .def_property_readonly("branch", [](const Filter& f) { return std::make_pair(f.design.branch_j, f.design.branch_sign); })
        .def_property_readonly("tau_star", [](const Filter& f) { return f.detector.tau_star; })
        .def_property_readonly("threshold", [](const Filter& f) { return f.detector.threshold(); })
        .def("artifact_json", [](const Filter& f) {
            return design::artifact_json(f.design, f.model_hash, f.detector.tau_star, f.detector.margin);
        });

    py::class_<Bundle>(m, "TrainingBundle")
        .def_property_readonly("Qbar", [](const Bundle& b) { return b.bundle.Qbar; })
        .def_property_readonly("Qs", [](const Bundle& b) { return b.bundle.Qs(); })
        .def_property_readonly("signatures", [](const Bundle& b) {
            std::vector<Matrix> out;
            for (const auto& i : b.bundle.instances) out.push_back(i.E);
            return out;
        })
        .def_property_readonly("seeds", [](const Bundle& b) {
            std::vector<std::uint64_t> out;
            for (const auto& i : b.bundle.instances) out.push_back(i.seed);
            return out;
        })
        .def("__len__", [](const Bundle& b) { return b.bundle.instances.size(); });

    py::class_<Experiment>(m, "Experiment")
        .def(py::init(&make_experiment), py::arg("config_json"), py::arg("base_dir") = "")
        .def_static("reference", [](const std::string& kind) {
            return Experiment{pipeline::make_context(kind == "multivariate" ? config::multivariate_reference()
                                                                             : config::univariate_reference())};
        }, py::arg("kind") = "univariate")
        .def_property_readonly("config_json", [](const Experiment& e) { return config::experiment_json(e.ctx.cfg); })
        .def_property_readonly("model_hash", [](const Experiment& e) { return e.ctx.model_hash; })
        .def_property_readonly("output_names", [](const Experiment& e) { return e.ctx.system.output_names(); })
        .def_property_readonly("matrices", [](const Experiment& e) {
            const auto& c = e.ctx.system.model;
            const auto& d = e.ctx.discrete;
            py::dict out;
            out["A_c"] = c.A;
            out["B_cd"] = c.B_d;
            out["B_cf"] = c.B_f;
            out["C"] = c.C;
            out["D_f"] = c.D_f;
            out["A"] = d.A;
            out["B_d"] = d.B_d;
            out["B_f"] = d.B_f;
            out["G"] = e.ctx.G;
            return out;
        })
        .def("simulate", [](const Experiment& e, std::uint64_t seed, double horizon, py::object attack, double onset,
                            bool linear) {
            auto dist = e.ctx.cfg.disturbance;
            dist.seed = seed;
            dist.horizon = horizon;
            plant::AttackSpec atk;
            if (!attack.is_none()) {
                const Vector f = attack.cast<Vector>();
                atk.mode = plant::AttackMode::multivariate;
                atk.values = f;
                atk.onset = onset;
            }
            const auto y = linear ? plant::simulate_linear(e.ctx.discrete, dist, atk)
                                  : plant::simulate_nonlinear(e.ctx.cfg.plant_config(), dist, atk);
            return std::make_pair(y.t, y.Y);
        }, py::arg("seed"), py::arg("horizon"), py::arg("attack") = py::none(), py::arg("onset") = 0.0,
             py::arg("linear") = false, "Sampled outputs (t, Y); attack is one bias per channel.")
        .def("train", [](const Experiment& e, int jobs) {
            py::gil_scoped_release release;
            return Bundle{pipeline::run_train(e.ctx, jobs)};
        }, py::arg("jobs") = 1)
        .def("design", [](const Experiment& e, const Bundle& b, const std::string& mode) {
            const auto out = pipeline::run_design(e.ctx, b.bundle, design::parse_mode(mode));
            return Filter{out.design, out.detector, e.ctx.model_hash};
        }, py::arg("bundle"), py::arg("mode") = "data_assisted")
        .def("pretrain", [](const Experiment& e, double bound) {
            const auto res = design::pretrain_multivariate(e.ctx.stacked, e.ctx.cfg.attack, bound);
            py::dict d;
            d["gamma_star"] = res.gamma;
            d["j_star"] = res.j_star;
            return d;
        }, py::arg("bound") = 1.0)
        .def("load_filter", [](const Experiment& e, const std::string& artifact) {
            const auto* atk = e.ctx.cfg.attack.kind == design::Kind::multivariate ? &e.ctx.cfg.attack : nullptr;
            const auto a = design::parse_artifact(artifact, e.ctx.stacked, e.ctx.model_hash, atk);
            runtime::Detector det;
            det.tau_star = a.tau_star;
            det.margin = a.margin;
            det.window = e.ctx.cfg.detector.window;
            return Filter{a.design, det, a.model_hash};
        }, py::arg("artifact_json"))
        .def("residual", [](const Experiment& e, const Filter& f, const Matrix& Y) {
            return runtime::run_filter(f.design, e.ctx.stacked.dae.L, Y);
        }, py::arg("filter"), py::arg("Y"))
        .def("detect", [](const Experiment& e, const Filter& f, const Matrix& Y) {
            const Vector r = runtime::run_filter(f.design, e.ctx.stacked.dae.L, Y);
            auto det = f.detector;
            det.window = e.ctx.cfg.detector.window;
            return detection_dict(runtime::detect(det, r, e.ctx.cfg.Ts, e.ctx.cfg.warmup()));
        }, py::arg("filter"), py::arg("Y"))
        .def("steady_state_margin", [](const Experiment& e, const Filter& f) {
            return design::steady_state_margin(e.ctx.stacked, f.design, e.ctx.cfg.attack);
        }, py::arg("filter"))
        .def("test", [](const Experiment& e, const Filter& f, int jobs) {
            pipeline::TestOutcome t;
            {
                py::gil_scoped_release release;
                t = pipeline::run_test(e.ctx, f.artifact(), jobs);
            }
            py::dict d;
            d["attack"] = t.attack;
            d["runs"] = t.runs.size();
            d["false_alarms"] = t.false_alarms;
            d["early_alarms"] = t.early_alarms;
            d["detections"] = t.detections;
            d["mean_latency"] = t.mean_latency;
            d["max_clean_energy"] = t.max_clean_energy;
            d["min_attacked_peak"] = t.min_attacked_peak;
            d["steady_state_margin"] = t.steady_state_margin;
            return d;
        }, py::arg("filter"), py::arg("jobs") = 1);

    m.def(
        "run_all",
        [](const std::filesystem::path& config_path, const std::filesystem::path& out, py::object mode,
           py::object seed, py::object jobs) {
            pipeline::Options o;
            if (!mode.is_none()) o.mode = design::parse_mode(mode.cast<std::string>());
            if (!seed.is_none()) o.seed = seed.cast<std::uint64_t>();
            if (!jobs.is_none()) o.jobs = jobs.cast<int>();
            const auto cfg = pipeline::apply_options(config::load_experiment(config_path), o);
            py::gil_scoped_release release;
            pipeline::prepare_directory(cfg, out, false);
            pipeline::cmd_run_all(cfg, out);
        },
        py::arg("config"), py::arg("out"), py::arg("mode") = py::none(), py::arg("seed") = py::none(),
        py::arg("jobs") = py::none(), "Every phase of an experiment into an output directory.");
}
