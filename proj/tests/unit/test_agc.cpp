#include <cmath>

#include "doctest.h"
#include "fdi/agc.hpp"
#include "fdi/error.hpp"
#include "fdi/plant.hpp"

using namespace fdi;

namespace {

agc::AreaParams area1() { return agc::reference_areas().front(); }

}  // namespace

TEST_SUITE("agc") {
    TEST_CASE("area 1 layout") {
        const auto m = agc::build_area(area1());
        CHECK(m.A_ii.rows() == 6);
        CHECK(m.A_ii.cols() == 6);
        CHECK(m.C_i.rows() == 8);
        CHECK(m.C_i.cols() == 6);
        CHECK(m.B_id.rows() == 6);
    }

    TEST_CASE("area matrix entries") {
        auto p = area1();
        p.H = 5.0;
        p.D = 1.0;
        const auto m = agc::build_area(p);
        agc::AreaLayout l;
        l.n_ties = 2;
        l.n_gens = 2;
        const auto w = l.omega();
        CHECK(m.A_ii(w, w) == doctest::Approx(-0.1));
        CHECK(m.A_ii(w, l.tie(0)) == doctest::Approx(-0.1));
        CHECK(m.A_ii(w, l.pm(1)) == doctest::Approx(0.1));
        CHECK(m.B_id(w, 0) == doctest::Approx(-0.1));
        const auto& g = p.generators[1];
        CHECK(m.A_ii(l.pm(1), w) == doctest::Approx(-1.0 / (g.T_ch * g.S)));
        CHECK(m.A_ii(l.pm(1), l.pm(1)) == doctest::Approx(-1.0 / g.T_ch));
        CHECK(m.A_ii(l.pm(1), l.agc()) == doctest::Approx(g.phi / g.T_ch));
        CHECK(m.A_ii(l.agc(), w) == doctest::Approx(-p.K_I * p.beta));
        CHECK(m.A_ii(l.agc(), l.tie(1)) == doctest::Approx(-p.K_I));
        CHECK(m.A_ii(l.tie(0), w) == doctest::Approx(p.neighbors[0].T));
    }

    TEST_CASE("zero damping and zero integral gain give exact zeros") {
        auto p = area1();
        p.D = 0.0;
        p.K_I = 0.0;
        const auto m = agc::build_area(p);
        agc::AreaLayout l;
        l.n_ties = 2;
        l.n_gens = 2;
        CHECK(m.A_ii(l.omega(), l.omega()) == 0.0);
        CHECK(m.A_ii.row(l.agc()).isZero(0.0));
    }

    TEST_CASE("aggregate output rows are sums of their constituents") {
        const auto m = agc::build_area(area1());
        CHECK(m.C_i.row(6) == m.C_i.row(0) + m.C_i.row(1));
        CHECK(m.C_i.row(7) == m.C_i.row(3) + m.C_i.row(4));
        CHECK(m.C_i.topRows(6) == Matrix::Identity(6, 6));
    }

    TEST_CASE("invalid area parameters") {
        auto p = area1();
        p.generators[0].T_ch = 0.0;
        CHECK_THROWS_AS(agc::build_area(p), ConfigError);
        p = area1();
        p.H = -1.0;
        CHECK_THROWS_AS(agc::build_area(p), ConfigError);
        p = area1();
        p.generators[0].phi = 0.9;
        CHECK_THROWS_AS(agc::build_area(p), ConfigError);
        p = area1();
        p.generators[1].S = 0.0;
        CHECK_THROWS_AS(agc::build_area(p), ConfigError);
    }

    TEST_CASE("three areas give 19 states") {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
        CHECK(sys.model.n_x() == 19);
        CHECK(sys.model.n_y() == 25);
        CHECK(sys.model.n_d() == 3);
        CHECK(sys.model.n_f() == 5);
    }

    TEST_CASE("single isolated area") {
        auto p = area1();
        p.neighbors.clear();
        agc::AttackTopology t;
        t.channels = {{0, agc::ChannelKind::tie_total, -1, -1.0}};
        const auto sys = agc::assemble_multiarea({p}, t);
        CHECK(sys.model.A == agc::build_area(p).A_ii);
        CHECK(sys.model.n_x() == 4);
    }

    TEST_CASE("area 1 attack output matrix") {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
        const Matrix D1 = sys.model.D_f.block(0, 0, 8, 3);
        Matrix want = Matrix::Zero(8, 3);
        want(0, 0) = 1.0;
        want(1, 1) = 1.0;
        want(6, 2) = 1.0;
        CHECK(D1 == want);
        for (Eigen::Index c = 0; c < sys.model.n_f(); ++c) CHECK(sys.model.D_f.col(c).sum() == 1.0);
        // tie channels feed the AGC integrator with -K_I; the aggregate channel is monitored only
        const auto agc_row = sys.layout[0].agc();
        CHECK(sys.model.B_f(agc_row, 0) == doctest::Approx(-0.3));
        CHECK(sys.model.B_f(agc_row, 1) == doctest::Approx(-0.3));
        CHECK(sys.model.B_f.col(2).isZero(0.0));
        CHECK(sys.model.B_f(sys.layout[1].agc(), 3) == doctest::Approx(-0.3));
    }

    TEST_CASE("coupling blocks") {
        const auto areas = agc::reference_areas();
        const auto sys = agc::assemble_multiarea(areas, agc::multivariate_topology());
        for (std::size_t j = 0; j < areas.size(); ++j) {
            const auto col = sys.layout[j].omega();
            int count = 0;
            for (std::size_t i = 0; i < areas.size(); ++i) {
                if (i == j) continue;
                const auto& l = sys.layout[i];
                for (int k = 0; k < l.n_ties; ++k) {
                    const double v = sys.model.A(l.tie(k), col);
                    if (areas[i].neighbors[static_cast<std::size_t>(k)].area == static_cast<int>(j)) {
                        CHECK(v == doctest::Approx(-areas[i].neighbors[static_cast<std::size_t>(k)].T));
                        ++count;
                    } else {
                        CHECK(v == 0.0);
                    }
                }
            }
            CHECK(count == 2);
            // no other off-block entries in this column
            for (std::size_t i = 0; i < areas.size(); ++i) {
                if (i == j) continue;
                const auto& l = sys.layout[i];
                for (Eigen::Index r = l.n_ties; r < l.n_states(); ++r) CHECK(sys.model.A(l.state_offset + r, col) == 0.0);
            }
        }
    }

    TEST_CASE("asymmetric topology is rejected") {
        auto areas = agc::reference_areas();
        areas[1].neighbors.pop_back();  // area 2 forgets area 3
        CHECK_THROWS_AS(agc::assemble_multiarea(areas, agc::univariate_topology()), ConfigError);
        areas = agc::reference_areas();
        agc::AttackTopology t;
        t.channels = {{1, agc::ChannelKind::tie, 1, -1.0}};
        CHECK_THROWS_AS(agc::assemble_multiarea(areas, t), ConfigError);
    }

    TEST_CASE("corrupted ace") {
        const auto p = area1();
        CHECK(agc::corrupted_ace(p, 0.01, {0.02, -0.01}, 0.0) == doctest::Approx(20 * 0.01 + 0.01));
        CHECK(agc::corrupted_ace(p, 0.0, {0.0, 0.0}, 0.1) == doctest::Approx(0.1));
        CHECK(agc::corrupted_ace(p, 0.01, {-0.05}, 0.1) == doctest::Approx(0.25));
    }

    TEST_CASE("zeroed attack channels match an empty topology") {
        const auto areas = agc::reference_areas();
        const auto with = agc::assemble_multiarea(areas, agc::multivariate_topology());
        const auto without = agc::assemble_multiarea(areas, agc::AttackTopology{});
        CHECK(with.model.A == without.model.A);
        CHECK(with.model.B_d == without.model.B_d);
        CHECK(with.model.C == without.model.C);
        CHECK(without.model.n_f() == 0);
        const auto dw = lti::zoh_discretize(with.model, 0.5);
        const auto dn = lti::zoh_discretize(without.model, 0.5);
        plant::DisturbanceSpec d;
        d.targets = {0, 2};
        d.seed = 4;
        d.horizon = 20.0;
        const auto yw = plant::simulate_linear(dw, d, plant::AttackSpec{});
        const auto yn = plant::simulate_linear(dn, d, plant::AttackSpec{});
        CHECK((yw.Y - yn.Y).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("stability check") {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
        CHECK_NOTHROW(agc::ensure_stable(sys));
        auto areas = agc::reference_areas();
        for (auto& a : areas) a.K_I = -2.0;
        const auto bad = agc::assemble_multiarea(areas, agc::multivariate_topology());
        CHECK_THROWS_AS(agc::ensure_stable(bad), ConfigError);
    }

    TEST_CASE("output names follow the frozen ordering") {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::univariate_topology());
        const auto names = sys.output_names();
        REQUIRE(names.size() == 25);
        CHECK(names[0] == "Ptie_1_2");
        CHECK(names[2] == "dw_1");
        CHECK(names[5] == "Pagc_1");
        CHECK(names[6] == "Ptie_1");
        CHECK(names[7] == "Pm_1");
    }
}
