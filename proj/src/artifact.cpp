#include <cmath>
#include <cstdio>
#include <sstream>

#include "fdi/design.hpp"
#include "fdi/error.hpp"
#include "json.hpp"

namespace fdi::design {

using nlohmann::json;

namespace {

json to_array(const Eigen::Ref<const Vector>& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector from_array(const json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

opt::Status parse_status(const std::string& s) {
    if (s == "optimal") return opt::Status::optimal;
    if (s == "infeasible") return opt::Status::infeasible;
    if (s == "unbounded") return opt::Status::unbounded;
    return opt::Status::failure;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

InvariantReport check_invariants(const lti::StackedSystem& s, const FilterDesign& d, const AttackModel* atk,
                                 double tol) {
    InvariantReport rep;
    auto fail = [&](const std::string& what) { rep.violations.push_back(what); };
    const auto n = s.n_coeffs();
    if (d.Nbar.size() != n) {
        fail("Nbar has " + std::to_string(d.Nbar.size()) + " entries, expected " + std::to_string(n));
        return rep;
    }
    if (!d.Nbar.allFinite()) fail("Nbar has non-finite entries");
    if (!(std::abs(d.p) < 1.0)) fail("pole p outside the unit disk");
    if (d.d_N != s.d_N) fail("degree differs from the stacked system");
    if (d.a.size() != d.d_N + 1 || (std::abs(d.p) < 1.0 && (d.a - denominator(d.d_N, d.p)).cwiseAbs().maxCoeff() >
                                                              1e-12 * (1.0 + d.a.cwiseAbs().maxCoeff()))) {
        fail("a(q) coefficients do not match (q - p)^d_N / (1 - p)^d_N");
    }
    const double scale = std::max(1.0, d.Nbar.cwiseAbs().maxCoeff());
    rep.nullspace = (d.Nbar * s.barH).cwiseAbs().maxCoeff();
    if (rep.nullspace > tol * scale) fail("Nbar barH != 0");

    const RowVector NF = d.Nbar * s.barF;
    if (d.kind == Kind::univariate) {
        rep.detection = NF.cwiseAbs().maxCoeff();
        if (rep.detection < 1.0 - tol) fail("|Nbar barF|_inf < 1");
    } else {
        if (!(d.coefficient_bound > 0.0)) fail("coefficient bound must be positive");
        if (d.Nbar.cwiseAbs().maxCoeff() > d.coefficient_bound * (1.0 + tol)) fail("|Nbar|_inf exceeds its bound");
        if (!(d.gamma > 0.0)) fail("gamma must be positive");
        if (atk) {
            if (d.lambda.size() != atk->A.rows()) {
                fail("lambda length differs from the polytope");
            } else {
                if (d.lambda.size() && d.lambda.minCoeff() < -tol) fail("lambda < 0");
                rep.detection = atk->b.dot(d.lambda);
                if (rep.detection < d.gamma - tol * (1.0 + d.gamma)) fail("b'lambda < gamma");
                const auto nf = s.dae.n_f;
                const int k = branch_coeff(d.branch_j);
                const RowVector lhs = branch_sign(d.branch_j) * d.Nbar * s.barF.middleCols(k * nf, nf) * atk->Fb;
                rep.attack_map = (lhs - d.lambda.transpose() * atk->A).cwiseAbs().maxCoeff();
                if (rep.attack_map > tol * scale) fail("(-1)^j N_k F F_b != lambda' A");
            }
        }
    }
    if (d.track_steady_state) {
        RowVector gain = RowVector::Zero(s.dae.n_f);
        for (int i = 0; i <= s.d_N; ++i) gain += NF.segment(i * s.dae.n_f, s.dae.n_f);
        rep.tracking = std::abs(-gain.sum() / d.a.sum() - 1.0);
        if (rep.tracking > tol) fail("steady-state gain differs from 1");
    }
    return rep;
}

std::string artifact_json(const FilterDesign& d, std::uint64_t model_hash, double tau_star, double margin) {
    json j;
    j["format"] = "fdi-filter/1";
    j["kind"] = to_string(d.kind);
    j["mode"] = to_string(d.mode);
    j["d_N"] = d.d_N;
    j["p"] = d.p;
    j["a"] = to_array(d.a);
    j["Nbar"] = to_array(d.Nbar.transpose());
    j["objective"] = d.objective;
    j["branch"] = {{"j", d.branch_j}, {"sign", d.branch_sign}};
    j["track_steady_state"] = d.track_steady_state;
    if (d.kind == Kind::multivariate) {
        j["gamma"] = d.gamma;
        j["lambda"] = to_array(d.lambda);
        j["coefficient_bound"] = d.coefficient_bound;
    }
    json branches = json::array();
    for (const auto& b : d.branches) {
        branches.push_back({{"j", b.j}, {"sign", b.sign}, {"status", opt::to_string(b.status)},
                            {"value", finite_or_null(b.value)}});
    }
    j["branches"] = branches;
    j["tau_star"] = tau_star;
    j["margin"] = margin;
    j["threshold"] = tau_star + margin;
    j["model_hash"] = hex64(model_hash);
    return j.dump(2) + "\n";
}

Artifact parse_artifact(const std::string& text, const lti::StackedSystem& s, std::uint64_t expected_hash,
                        const AttackModel* atk) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed filter artifact: ") + e.what());
    }
    Artifact art;
    try {
        if (j.at("format").get<std::string>() != "fdi-filter/1") throw ConfigError("unknown artifact format");
        const auto hash = j.at("model_hash").get<std::string>();
        art.model_hash = std::stoull(hash, nullptr, 16);
        if (art.model_hash != expected_hash) {
            throw ConfigError("filter artifact was designed for model " + hash + ", current model is " +
                              hex64(expected_hash));
        }
        auto& d = art.design;
        d.kind = j.at("kind").get<std::string>() == "univariate" ? Kind::univariate : Kind::multivariate;
        d.mode = parse_mode(j.at("mode").get<std::string>());
        d.d_N = j.at("d_N").get<int>();
        d.p = j.at("p").get<double>();
        d.a = from_array(j.at("a"));
        d.Nbar = from_array(j.at("Nbar")).transpose();
        d.objective = j.at("objective").get<double>();
        d.branch_j = j.at("branch").at("j").get<int>();
        d.branch_sign = j.at("branch").at("sign").get<int>();
        d.track_steady_state = j.at("track_steady_state").get<bool>();
        if (d.kind == Kind::multivariate) {
            d.gamma = j.at("gamma").get<double>();
            d.lambda = from_array(j.at("lambda"));
            d.coefficient_bound = j.at("coefficient_bound").get<double>();
        }
        for (const auto& b : j.at("branches")) {
            BranchReport r;
            r.j = b.at("j").get<int>();
            r.sign = b.at("sign").get<int>();
            r.status = parse_status(b.at("status").get<std::string>());
            r.value = b.at("value").is_null() ? std::numeric_limits<double>::infinity() : b.at("value").get<double>();
            d.branches.push_back(r);
        }
        art.tau_star = j.at("tau_star").get<double>();
        art.margin = j.at("margin").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("filter artifact is missing fields: ") + e.what());
    }
    if (art.tau_star < 0.0 || art.margin < 0.0 || !(art.threshold() > 0.0)) {
        throw ConfigError("filter artifact threshold must be positive");
    }
    const auto rep = check_invariants(s, art.design, atk);
    if (!rep.ok()) {
        std::string msg = "filter artifact violates its invariants:";
        for (const auto& v : rep.violations) msg += " " + v + ";";
        throw ConfigError(msg);
    }
    return art;
}

}  // namespace fdi::design
