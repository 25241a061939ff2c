#include "fdi/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fdi/error.hpp"
#include "json.hpp"

namespace fdi::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json matrix_rows(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(M.cols()));
        for (Eigen::Index k = 0; k < M.cols(); ++k) r[static_cast<std::size_t>(k)] = M(i, k);
        rows.push_back(r);
    }
    return rows;
}

Matrix parse_rows(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
            throw ConfigError(std::string(what) + " has ragged rows");
        }
        for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = r[static_cast<std::size_t>(k)].get<double>();
    }
    return M;
}

json area_json(const agc::AreaParams& a) {
    json gens = json::array();
    for (const auto& g : a.generators) gens.push_back({{"T_ch", g.T_ch}, {"S", g.S}, {"phi", g.phi}});
    json nbs = json::array();
    for (const auto& n : a.neighbors) nbs.push_back({{"area", n.area}, {"T", n.T}});
    return {{"name", a.name}, {"H", a.H},         {"D", a.D},          {"beta", a.beta},
            {"K_I", a.K_I},   {"generators", gens}, {"neighbors", nbs}};
}

agc::AreaParams parse_area(const json& j) {
    agc::AreaParams a;
    a.name = j.value("name", std::string());
    a.H = j.value("H", a.H);
    a.D = j.value("D", a.D);
    a.beta = j.value("beta", a.beta);
    a.K_I = j.value("K_I", a.K_I);
    for (const auto& g : j.at("generators")) {
        agc::Generator gen;
        gen.T_ch = g.value("T_ch", gen.T_ch);
        gen.S = g.value("S", gen.S);
        gen.phi = g.value("phi", gen.phi);
        a.generators.push_back(gen);
    }
    for (const auto& n : j.value("neighbors", json::array())) {
        a.neighbors.push_back({n.at("area").get<int>(), n.value("T", 0.545)});
    }
    return a;
}

json model_to_json(const ModelConfig& m) {
    json areas = json::array();
    for (const auto& a : m.areas) areas.push_back(area_json(a));
    json chans = json::array();
    for (const auto& c : m.topology.channels) {
        json jc{{"area", c.area}, {"kind", c.kind == agc::ChannelKind::tie ? "tie" : "tie_total"}};
        if (c.kind == agc::ChannelKind::tie) jc["neighbor"] = c.neighbor;
        if (c.ace_gain >= 0.0) jc["ace_gain"] = c.ace_gain;
        chans.push_back(jc);
    }
    return {{"areas", areas}, {"attack_channels", chans}};
}

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    for (const auto& a : j.at("areas")) m.areas.push_back(parse_area(a));
    for (const auto& c : j.at("attack_channels")) {
        agc::AttackChannel ch;
        ch.area = c.at("area").get<int>();
        const auto kind = c.value("kind", std::string("tie"));
        if (kind == "tie") {
            ch.kind = agc::ChannelKind::tie;
            ch.neighbor = c.at("neighbor").get<int>();
        } else if (kind == "tie_total") {
            ch.kind = agc::ChannelKind::tie_total;
        } else {
            throw ConfigError("unknown attack channel kind '" + kind + "'");
        }
        ch.ace_gain = c.value("ace_gain", -1.0);
        m.topology.channels.push_back(ch);
    }
    return m;
}

json plant_to_json(const ExperimentConfig& c) {
    json nl;
    nl["agc_saturation"] = c.nonlinear.agc_saturation
                               ? json::array({c.nonlinear.agc_saturation->first, c.nonlinear.agc_saturation->second})
                               : json();
    nl["governor_deadband"] = c.nonlinear.governor_deadband;
    nl["tie_sine_coupling"] = c.nonlinear.tie_sine_coupling;
    nl["rate_limit"] = c.nonlinear.rate_limit ? json(*c.nonlinear.rate_limit) : json();
    return {{"dt", c.dt}, {"nonlinear", nl}};
}

void plant_from_json(const json& j, ExperimentConfig& c) {
    c.dt = j.value("dt", c.dt);
    const auto nl = j.value("nonlinear", json::object());
    c.nonlinear = {};
    if (nl.contains("agc_saturation") && !nl["agc_saturation"].is_null()) {
        const auto s = nl["agc_saturation"].get<std::vector<double>>();
        if (s.size() != 2) throw ConfigError("agc_saturation must be [low, high]");
        c.nonlinear.agc_saturation = std::make_pair(s[0], s[1]);
    }
    c.nonlinear.governor_deadband = nl.value("governor_deadband", 0.0);
    c.nonlinear.tie_sine_coupling = nl.value("tie_sine_coupling", false);
    if (nl.contains("rate_limit") && !nl["rate_limit"].is_null()) c.nonlinear.rate_limit = nl["rate_limit"].get<double>();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Inline object or a path relative to base_dir.
json resolve(const json& j, const fs::path& base_dir) {
    if (j.is_string()) {
        const fs::path p = base_dir / j.get<std::string>();
        try {
            return json::parse(read_text(p));
        } catch (const json::exception& e) {
            throw ConfigError(p.string() + ": " + e.what());
        }
    }
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (model.areas.empty()) throw ConfigError("model has no areas");
    if (model.topology.channels.empty()) throw ConfigError("model has no attack channels");
    if (d_N < 1) throw ConfigError("d_N must be at least 1");
    if (!(std::abs(p) < 1.0)) throw ConfigError("pole p must satisfy |p| < 1");
    if (train.instances < 1) throw ConfigError("training needs at least one instance");
    if (test.instances < 1) throw ConfigError("testing needs at least one instance");
    if (!(train.horizon > 0.0) || !(test.horizon > 0.0)) throw ConfigError("horizons must be positive");
    if (plant::sample_count(train.horizon, Ts) < d_N + 2) throw ConfigError("training horizon too short for d_N");
    if (!(attack_onset >= 0.0) || attack_onset >= test.horizon) throw ConfigError("attack onset outside the test horizon");
    if (!(detector.margin >= 0.0)) throw ConfigError("margin must be nonnegative");
    if (detector.window < 1) throw ConfigError("energy window must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    const auto nf = static_cast<Eigen::Index>(model.topology.channels.size());
    attack.validate(nf);
    if (attack.kind == design::Kind::univariate) {
        if (nf != 1) throw ConfigError("univariate experiments need exactly one attack channel");
        if (attack_channel != 0) throw ConfigError("univariate attack channel must be 0");
    }
    const auto na = static_cast<int>(model.areas.size());
    for (int t : disturbance.targets) {
        if (t < 0 || t >= na) throw ConfigError("disturbance target outside the area list");
    }
    auto d = disturbance;
    d.horizon = train.horizon;
    d.validate(Ts);
    plant_config().validate();
}

plant::PlantConfig ExperimentConfig::plant_config() const {
    plant::PlantConfig pc;
    pc.areas = model.areas;
    pc.topology = model.topology;
    pc.nonlinear = nonlinear;
    pc.dt = dt;
    pc.Ts = Ts;
    return pc;
}

ModelConfig parse_model(const std::string& text) {
    try {
        return model_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
}

std::string model_json(const ModelConfig& model) { return model_to_json(model).dump(2); }

std::string canonical_model(const ModelConfig& model, double Ts) {
    json j = model_to_json(model);
    j["Ts"] = Ts;
    return j.dump();
}

std::uint64_t model_hash(const ModelConfig& model, double Ts) { return design::fnv1a(canonical_model(model, Ts)); }

ExperimentConfig parse_experiment(const std::string& text, const fs::path& base_dir) {
    ExperimentConfig c;
    try {
        const auto j = json::parse(text);
        c.name = j.value("name", c.name);
        c.model = model_from_json(resolve(j.at("model"), base_dir));
        if (j.contains("plant")) plant_from_json(resolve(j["plant"], base_dir), c);
        c.Ts = j.value("Ts", c.Ts);
        c.d_N = j.value("d_N", c.d_N);
        c.p = j.value("p", c.p);
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        if (j.contains("train")) {
            c.train.instances = j["train"].value("instances", c.train.instances);
            c.train.horizon = j["train"].value("horizon", c.train.horizon);
        }
        if (j.contains("test")) {
            c.test.instances = j["test"].value("instances", c.test.instances);
            c.test.horizon = j["test"].value("horizon", c.test.horizon);
        }
        if (j.contains("disturbance")) {
            const auto& d = j["disturbance"];
            c.disturbance.targets = d.value("targets", c.disturbance.targets);
            const auto kind = d.value("kind", std::string("gaussian"));
            if (kind == "gaussian") {
                c.disturbance.kind = plant::DisturbanceKind::gaussian;
            } else if (kind == "step") {
                c.disturbance.kind = plant::DisturbanceKind::step;
            } else {
                throw ConfigError("unknown disturbance kind '" + kind + "'");
            }
            c.disturbance.sigma = d.value("sigma", c.disturbance.sigma);
            c.disturbance.hold = d.value("hold", c.disturbance.hold);
            c.disturbance.step_value = d.value("step_value", c.disturbance.step_value);
            c.disturbance.step_time = d.value("step_time", c.disturbance.step_time);
        }
        const auto& a = j.at("attack");
        const auto kind = a.at("kind").get<std::string>();
        if (kind == "univariate") {
            c.attack.kind = design::Kind::univariate;
            c.attack.f_min = a.value("f_min", c.attack.f_min);
            c.attack.f_max = a.value("f_max", c.attack.f_max);
            c.attack_channel = a.value("channel", 0);
            c.attack_value = a.value("value", c.attack_value);
        } else if (kind == "multivariate") {
            c.attack.kind = design::Kind::multivariate;
            c.attack.Fb = parse_rows(a.at("Fb"), "attack.Fb");
            c.attack.A = parse_rows(a.at("A"), "attack.A");
            const auto b = a.at("b").get<std::vector<double>>();
            c.attack.b = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        } else {
            throw ConfigError("unknown attack kind '" + kind + "'");
        }
        c.attack_onset = a.value("onset", c.attack_onset);
        if (j.contains("design")) {
            const auto& d = j["design"];
            if (d.contains("mode")) c.design.mode = design::parse_mode(d["mode"].get<std::string>());
            c.design.track_steady_state = d.value("track_steady_state", c.design.track_steady_state);
            c.design.coefficient_bound = d.value("coefficient_bound", c.design.coefficient_bound);
            c.design.regularization = d.value("regularization", c.design.regularization);
            c.design.bisection_iterations = d.value("bisection_iterations", c.design.bisection_iterations);
            c.design.bisection_tol = d.value("bisection_tol", c.design.bisection_tol);
        }
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            c.detector.margin = d.value("margin", c.detector.margin);
            c.detector.window = d.value("window", c.detector.window);
            c.detector.warmup = d.value("warmup", c.detector.warmup);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    c.design.d_N = c.d_N;
    c.design.p = c.p;
    c.validate();
    return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
    return parse_experiment(read_text(path), path.parent_path());
}

std::string experiment_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["model"] = model_to_json(c.model);
    j["plant"] = plant_to_json(c);
    j["Ts"] = c.Ts;
    j["d_N"] = c.d_N;
    j["p"] = c.p;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["train"] = {{"instances", c.train.instances}, {"horizon", c.train.horizon}};
    j["test"] = {{"instances", c.test.instances}, {"horizon", c.test.horizon}};
    json d{{"targets", c.disturbance.targets}, {"kind", plant::to_string(c.disturbance.kind)}};
    if (c.disturbance.kind == plant::DisturbanceKind::gaussian) {
        d["sigma"] = c.disturbance.sigma;
        d["hold"] = c.disturbance.hold;
    } else {
        d["step_value"] = c.disturbance.step_value;
        d["step_time"] = c.disturbance.step_time;
    }
    j["disturbance"] = d;
    json a{{"kind", design::to_string(c.attack.kind)}, {"onset", c.attack_onset}};
    if (c.attack.kind == design::Kind::univariate) {
        a["f_min"] = c.attack.f_min;
        a["f_max"] = c.attack.f_max;
        a["channel"] = c.attack_channel;
        a["value"] = c.attack_value;
    } else {
        a["Fb"] = matrix_rows(c.attack.Fb);
        a["A"] = matrix_rows(c.attack.A);
        a["b"] = std::vector<double>(c.attack.b.data(), c.attack.b.data() + c.attack.b.size());
    }
    j["attack"] = a;
    j["design"] = {{"mode", design::to_string(c.design.mode)},
                   {"track_steady_state", c.design.track_steady_state},
                   {"coefficient_bound", c.design.coefficient_bound},
                   {"regularization", c.design.regularization},
                   {"bisection_iterations", c.design.bisection_iterations},
                   {"bisection_tol", c.design.bisection_tol}};
    j["detector"] = {{"margin", c.detector.margin}, {"window", c.detector.window}, {"warmup", c.detector.warmup}};
    return j.dump(2) + "\n";
}

ExperimentConfig univariate_reference() {
    ExperimentConfig c;
    c.name = "univariate";
    c.model.areas = agc::reference_areas();
    c.model.topology = agc::univariate_topology();
    c.nonlinear.agc_saturation = std::make_pair(-0.02, 0.02);
    c.nonlinear.governor_deadband = 2e-3;
    c.disturbance.sigma = 0.02;
    c.attack.kind = design::Kind::univariate;
    c.attack.f_min = -1.0;
    c.attack.f_max = 1.0;
    c.attack_value = 0.1;
    c.design.track_steady_state = true;
    c.detector.margin = 0.1;
    c.seed = 2021;
    return c;
}

ExperimentConfig multivariate_reference() {
    ExperimentConfig c = univariate_reference();
    c.name = "multivariate";
    c.model.topology = agc::multivariate_topology();
    c.attack = {};
    c.attack.kind = design::Kind::multivariate;
    c.attack.Fb.resize(5, 3);
    c.attack.Fb << 0.1, 0.1, 0.0,
                   0.0, 0.15, 0.0,
                   0.1, 0.25, 0.0,
                   0.0, 0.0, 0.1,
                   0.0, 0.0, 0.1;
    c.attack.A = Matrix::Ones(1, 3);
    c.attack.b = Vector::Constant(1, 1.5);
    c.design.track_steady_state = false;
    c.design.coefficient_bound = 10.0;
    c.detector.margin = 0.025;
    return c;
}

}  // namespace fdi::config
