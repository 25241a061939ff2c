#include <cmath>
#include <random>

#include "doctest.h"
#include "fdi/agc.hpp"
#include "fdi/config.hpp"
#include "fdi/design.hpp"
#include "fdi/error.hpp"
#include "oracles.hpp"

using namespace fdi;

namespace {

const lti::StackedSystem& stacked() {
    static const auto s = [] {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
        return lti::build_stacked(lti::assemble_dae(lti::zoh_discretize(sys.model, 0.5)), 3);
    }();
    return s;
}

design::AttackModel attack() { return config::multivariate_reference().attack; }

Matrix sample_Qbar(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Matrix G = design::gram_matrix(design::denominator(3, 0.8), 20);
    std::vector<Matrix> Qs;
    for (int i = 0; i < 3; ++i) {
        Qs.push_back(design::q_matrix(stacked(), oracle::random_matrix(rng, stacked().dae.n_y, 20, 1e-3), G).Q);
    }
    return design::average_Q(Qs);
}

// c = (-1)^j N_k F F_b, written out from the stacked blocks.
RowVector attack_cost(const design::FilterDesign& d, const design::AttackModel& atk, int j) {
    const auto nf = stacked().dae.n_f;
    const int k = design::branch_coeff(j);
    const RowVector NF = d.Nbar * stacked().barF;
    return design::branch_sign(j) * NF.segment(k * nf, nf) * atk.Fb;
}

}  // namespace

TEST_SUITE("multivariate") {
    TEST_CASE("zero attack basis is infeasible") {
        auto atk = attack();
        atk.Fb.setZero();
        CHECK_THROWS_AS(design::pretrain_multivariate(stacked(), atk), InfeasibleError);
    }

    TEST_CASE("pretraining finds a positive gamma at unit bound") {
        const auto res = design::pretrain_multivariate(stacked(), attack(), 1.0);
        REQUIRE(res.gamma.size() == 8);
        CHECK(res.best() > 0.0);
        CHECK(std::isfinite(res.best()));
        for (double g : res.gamma) CHECK(g <= res.best() + 1e-9);
        // lowest index among equal optima
        for (int j = 1; j < res.j_star; ++j) CHECK(res.gamma[static_cast<std::size_t>(j - 1)] < res.best() - 1e-9);
        // the LP is homogeneous in the box
        const auto ten = design::pretrain_multivariate(stacked(), attack(), 10.0);
        CHECK(ten.best() == doctest::Approx(10.0 * res.best()).epsilon(1e-7));
        CHECK(ten.j_star == res.j_star);
    }

    TEST_CASE("LP duality between the certificate and the worst-case attack") {
        const auto res = design::pretrain_multivariate(stacked(), attack(), 1.0);
        design::DesignOptions o;
        o.mode = design::Mode::pure_model;
        const auto d = design::design_multivariate(stacked(), Matrix(), attack(), res.best(), res.j_star, o);
        CHECK(d.gamma == doctest::Approx(res.best()).epsilon(1e-9));
        const auto atk = attack();
        const RowVector c = attack_cost(d, atk, res.j_star);
        CHECK((c - d.lambda.transpose() * atk.A).cwiseAbs().maxCoeff() <= 1e-7);
        const Vector alpha = design::worst_case_alpha(stacked(), d, atk, res.j_star);
        CHECK(((atk.A * alpha - atk.b).array() >= -1e-9).all());
        const double worst = c.dot(alpha);
        // weak duality: every feasible alpha costs at least b'lambda; the minimizer attains it
        CHECK(worst >= atk.b.dot(d.lambda) - 1e-7);
        CHECK(worst == doctest::Approx(atk.b.dot(d.lambda)).epsilon(1e-7));
        std::mt19937_64 rng(3);
        for (int t = 0; t < 50; ++t) {
            Vector a = oracle::random_matrix(rng, atk.dims(), 1).col(0).cwiseAbs();
            a *= atk.b(0) / a.sum() * 1.3;
            CHECK(c.dot(a) >= atk.b.dot(d.lambda) - 1e-9);
        }
    }

    TEST_CASE("worst-case attack over a half-space") {
        design::AttackModel atk;
        atk.kind = design::Kind::multivariate;
        atk.Fb = Matrix::Zero(5, 2);
        atk.Fb(0, 0) = 1.0;
        atk.Fb(2, 1) = 1.0;
        atk.A = Matrix(3, 2);
        atk.A << 1, 1, 1, 0, 0, 1;
        atk.b = Vector(3);
        atk.b << 1, 0, 0;
        const auto res = design::pretrain_multivariate(stacked(), atk, 1.0);
        design::DesignOptions o;
        o.mode = design::Mode::pure_model;
        const auto d = design::design_multivariate(stacked(), Matrix(), atk, res.best(), res.j_star, o);
        const RowVector c = attack_cost(d, atk, res.j_star);
        const Vector alpha = design::worst_case_alpha(stacked(), d, atk, res.j_star);
        // minimum of a linear cost over the simplex edge alpha1 + alpha2 >= 1, alpha >= 0
        CHECK(c.dot(alpha) == doctest::Approx(std::min(c(0), c(1))).epsilon(1e-9));
        CHECK(c.dot(alpha) >= res.best() - 1e-7);

        // without the positivity rows the cost can run off to -inf
        design::FilterDesign tilted = d;
        auto open = atk;
        open.A = Matrix::Ones(1, 2);
        open.b = Vector::Ones(1);
        if (std::abs(c(0) - c(1)) > 1e-9) {
            CHECK_THROWS_AS(design::worst_case_alpha(stacked(), tilted, open, res.j_star), NumericalError);
        }
    }

    TEST_CASE("designs satisfy every invariant") {
        const auto atk = attack();
        const auto res = design::pretrain_multivariate(stacked(), atk, 10.0);
        design::DesignOptions o;
        o.coefficient_bound = 10.0;
        const Matrix Qbar = sample_Qbar(1);
        const auto a = design::design_multivariate(stacked(), Qbar, atk, res.best(), res.j_star, o);
        const auto ra = design::check_invariants(stacked(), a, &atk);
        CHECK(ra.ok());
        CHECK(ra.nullspace <= 1e-7);
        CHECK(a.gamma > 0.0);
        CHECK(a.gamma <= res.best() * (1.0 + 1e-12));
        CHECK(a.Nbar.cwiseAbs().maxCoeff() <= 10.0 * (1.0 + 1e-7));
        CHECK((a.lambda.array() >= -1e-9).all());
        o.mode = design::Mode::pure_model;
        const auto p = design::design_multivariate(stacked(), Qbar, atk, res.best(), res.j_star, o);
        CHECK(design::check_invariants(stacked(), p, &atk).ok());
        CHECK(design::check_invariants(stacked(), a, &atk).detection > 0.0);
    }

    TEST_CASE("QP cost grows with gamma") {
        const auto atk = attack();
        const auto res = design::pretrain_multivariate(stacked(), atk, 1.0);
        const Matrix Qbar = sample_Qbar(2);
        double prev = -1.0;
        double first = 0.0;
        for (double g : {0.25, 0.5, 1.0, 2.0}) {
            const auto s = design::solve_qp_j(stacked(), Qbar, atk, res.j_star, g, 1e-10);
            REQUIRE(s.optimal());
            CHECK(s.objective > prev);
            if (prev < 0.0) first = s.objective;
            prev = s.objective;
        }
        // constraints are homogeneous, so the optimum scales with gamma^2
        CHECK(prev == doctest::Approx(64.0 * first).epsilon(1e-5));
    }

    TEST_CASE("detectability holds over sampled attacks") {
        const auto atk = attack();
        const auto res = design::pretrain_multivariate(stacked(), atk, 10.0);
        design::DesignOptions o;
        o.coefficient_bound = 10.0;
        const auto d = design::design_multivariate(stacked(), sample_Qbar(3), atk, res.best(), res.j_star, o);
        const RowVector c = attack_cost(d, atk, d.branch_j);
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(-2.0, 4.0);
        int tried = 0;
        for (int t = 0; t < 500; ++t) {
            Vector a(atk.dims());
            for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = u(rng);
            if (((atk.A * a - atk.b).array() < 0.0).any()) continue;
            ++tried;
            CHECK(c.dot(a) >= d.gamma - 1e-7);
        }
        CHECK(tried > 50);
    }

    TEST_CASE("steady-state residual is linear in the attack") {
        const auto atk = attack();
        const auto res = design::pretrain_multivariate(stacked(), atk, 1.0);
        design::DesignOptions o;
        o.mode = design::Mode::pure_model;
        const auto d = design::design_multivariate(stacked(), Matrix(), atk, res.best(), res.j_star, o);
        std::mt19937_64 rng(8);
        const Vector f = oracle::random_matrix(rng, 5, 1).col(0);
        const Vector g = oracle::random_matrix(rng, 5, 1).col(0);
        const double rf = design::steady_state_residual(stacked(), d, f);
        const double rg = design::steady_state_residual(stacked(), d, g);
        CHECK(design::steady_state_residual(stacked(), d, 2.0 * f - g) == doctest::Approx(2.0 * rf - rg));
        CHECK(design::steady_state_residual(stacked(), d, Vector::Zero(5)) == 0.0);
        CHECK_THROWS_AS(design::steady_state_residual(stacked(), d, Vector::Zero(3)), DimensionError);
        CHECK(design::steady_state_margin(stacked(), d, atk) >= 0.0);
    }

    TEST_CASE("bad inputs") {
        auto atk = attack();
        design::DesignOptions o;
        CHECK_THROWS_AS(design::design_multivariate(stacked(), Matrix(), atk, 1.0, 9, o), ConfigError);
        CHECK_THROWS_AS(design::design_multivariate(stacked(), Matrix(), atk, 0.0, 1, o), InfeasibleError);
        CHECK_THROWS_AS(design::pretrain_multivariate(stacked(), atk, 0.0), ConfigError);
        atk.Fb = Matrix::Ones(4, 3);
        CHECK_THROWS_AS(design::pretrain_multivariate(stacked(), atk, 1.0), DimensionError);
        atk = attack();
        atk.A = Matrix(2, 3);
        atk.A << 1, 0, 0, -1, 0, 0;
        atk.b = Vector(2);
        atk.b << 1, 0;
        CHECK_THROWS_AS(atk.validate(5), ConfigError);
    }
}
