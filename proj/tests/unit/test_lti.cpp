#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "fdi/agc.hpp"
#include "fdi/error.hpp"
#include "fdi/lti.hpp"
#include "oracles.hpp"

using namespace fdi;

namespace {

lti::LinearModel continuous(const Matrix& A, const Matrix& Bd, const Matrix& Bf, const Matrix& C, const Matrix& Df) {
    lti::LinearModel m;
    m.A = A;
    m.B_d = Bd;
    m.B_f = Bf;
    m.C = C;
    m.D_f = Df;
    return m;
}

lti::LinearModel scalar_discrete() {
    auto m = continuous(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0),
                        Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1));
    m.Ts = 0.5;
    return m;
}

lti::LinearModel reference_discrete() {
    const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
    return lti::zoh_discretize(sys.model, 0.5);
}

}  // namespace

TEST_SUITE("lti") {
    TEST_CASE("poly matrix evaluation matches direct summation") {
        std::mt19937_64 rng(7);
        std::vector<Matrix> c;
        for (int i = 0; i < 4; ++i) c.push_back(oracle::random_matrix(rng, 3, 2));
        const lti::PolyMatrix P(c);
        CHECK(P.degree() == 3);
        CHECK(P.rows() == 3);
        CHECK(P.cols() == 2);
        for (double q0 : {-1.3, 0.0, 0.4, 2.0}) {
            Matrix direct = Matrix::Zero(3, 2);
            for (int i = 0; i < 4; ++i) direct += c[static_cast<std::size_t>(i)] * std::pow(q0, i);
            CHECK((P.evaluate(q0) - direct).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    TEST_CASE("poly matrix rejects mixed shapes") {
        CHECK_THROWS_AS(lti::PolyMatrix({Matrix::Zero(2, 2), Matrix::Zero(2, 3)}), DimensionError);
    }

    TEST_CASE("eval_at_one examples") {
        const auto I = Matrix::Identity(3, 3);
        CHECK(lti::eval_at_one(lti::PolyMatrix({I, I})).isApprox(2.0 * I));
        for (double p : {0.0, 0.5, 0.8, -0.3}) {
            const auto a = lti::PolyMatrix::scalar(oracle::binomial_denominator(3, p));
            CHECK(lti::eval_at_one(a)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        }
        Matrix N0(1, 2), N1(1, 2);
        N0 << 1, 0;
        N1 << 0, 2;
        const Matrix s = lti::eval_at_one(lti::PolyMatrix({N0, N1}));
        CHECK(s(0, 0) == 1.0);
        CHECK(s(0, 1) == 2.0);
    }

    TEST_CASE("zoh of a pure integrator") {
        const auto m = continuous(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 1),
                                  Matrix::Identity(2, 2), Matrix::Zero(2, 1));
        const auto d = lti::zoh_discretize(m, 0.5);
        CHECK((d.A - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((d.B_d - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
        REQUIRE(d.Ts.has_value());
        CHECK(*d.Ts == 0.5);
    }

    TEST_CASE("zoh scalar closed form") {
        const auto m = continuous(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1),
                                  Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1));
        const auto d = lti::zoh_discretize(m, 0.5);
        CHECK(d.A(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
        CHECK(d.B_d(0, 0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-14));
        // fine-step Euler oracle
        const Vector x = oracle::euler_step(m.A, m.B_d, Vector::Zero(1), Vector::Ones(1), 0.5, 100000);
        CHECK(d.B_d(0, 0) == doctest::Approx(x(0)).epsilon(1e-4));
    }

    TEST_CASE("zoh agrees with fine-step euler on random stable systems") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 5; ++trial) {
            Matrix A = oracle::random_matrix(rng, 4, 4);
            const double shift = lti::spectral_abscissa(A) + 0.5;
            A -= shift * Matrix::Identity(4, 4);
            const Matrix B = oracle::random_matrix(rng, 4, 2);
            const auto m = continuous(A, B, Matrix::Zero(4, 1), Matrix::Identity(4, 4), Matrix::Zero(4, 1));
            const double Ts = 0.5;
            const auto d = lti::zoh_discretize(m, Ts);
            Vector xd = oracle::random_matrix(rng, 4, 1);
            Vector xe = xd;
            for (int k = 0; k < 10; ++k) {
                const Vector u = oracle::random_matrix(rng, 2, 1);
                xd = d.A * xd + d.B_d * u;
                xe = oracle::euler_step(A, B, xe, u, Ts, 500);
                CHECK((xd - xe).norm() <= 1e-4 * std::max(1.0, xe.norm()) * 20);
            }
            // with dt = Ts / 1000 as in the property
            Vector x0 = Vector::Ones(4);
            const Vector u = Vector::Ones(2);
            const Vector ye = oracle::euler_step(A, B, x0, u, Ts, 1000);
            const Vector yd = d.A * x0 + d.B_d * u;
            CHECK((yd - ye).norm() <= 1e-3 * std::max(1.0, ye.norm()));
        }
    }

    TEST_CASE("zoh rejects bad input") {
        auto m = continuous(Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN()),
                            Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0),
                            Matrix::Zero(1, 1));
        CHECK_THROWS_AS(lti::zoh_discretize(m, 0.5), ConfigError);
        m.A(0, 0) = -1.0;
        CHECK_THROWS_AS(lti::zoh_discretize(m, 0.0), ConfigError);
        CHECK_THROWS_AS(lti::zoh_discretize(scalar_discrete(), 0.5), ConfigError);
    }

    TEST_CASE("assemble_dae scalar example") {
        const auto dae = lti::assemble_dae(scalar_discrete());
        Matrix H0(2, 2), H1(2, 2), L(2, 1), F(2, 1);
        H0 << 0.5, 1, 1, 0;
        H1 << -1, 0, 0, 0;
        L << 0, -1;
        F << 2, 0;
        CHECK(dae.H0 == H0);
        CHECK(dae.H1 == H1);
        CHECK(dae.L == L);
        CHECK(dae.F == F);
        CHECK(dae.n_r == 2);
    }

    TEST_CASE("n_r equals n_x + n_y") {
        const auto dae = lti::assemble_dae(reference_discrete());
        CHECK(dae.n_x == 19);
        CHECK(dae.n_y == 25);
        CHECK(dae.n_r == dae.n_x + dae.n_y);
    }

    TEST_CASE("build_stacked structure") {
        const auto dae = lti::assemble_dae(scalar_discrete());
        const auto s0 = lti::build_stacked(dae, 0);
        Matrix expect(2, 4);
        expect << dae.H0, dae.H1;
        CHECK(s0.barH == expect);
        CHECK(s0.barL == dae.L);
        CHECK(s0.barF == dae.F);

        // scalar blocks: 1x1 H0 = 2, H1 = 3
        lti::DaeSystem sc;
        sc.H0 = Matrix::Constant(1, 1, 2.0);
        sc.H1 = Matrix::Constant(1, 1, 3.0);
        sc.L = Matrix::Constant(1, 1, 1.0);
        sc.F = Matrix::Constant(1, 1, 1.0);
        sc.n_r = 1;
        sc.n_x = 1;
        sc.n_y = 1;
        sc.n_d = 0;
        sc.n_f = 1;
        const auto s3 = lti::build_stacked(sc, 3);
        REQUIRE(s3.barH.rows() == 4);
        REQUIRE(s3.barH.cols() == 5);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 5; ++j) {
                const double want = j == i ? 2.0 : (j == i + 1 ? 3.0 : 0.0);
                CHECK(s3.barH(i, j) == want);
            }
        }
        CHECK(s3.barL == Matrix::Identity(4, 4));

        const auto big = lti::build_stacked(lti::assemble_dae(reference_discrete()), 3);
        CHECK(big.barH.rows() == 4 * 44);
        CHECK(big.barH.cols() == 5 * 22);
        CHECK(big.barL.rows() == 176);
        CHECK(big.barL.cols() == 4 * 25);
        CHECK(big.barF.cols() == 4 * 5);
    }

    TEST_CASE("stacked product reproduces the polynomial product") {
        std::mt19937_64 rng(3);
        const auto dae = lti::assemble_dae(reference_discrete());
        const int d = 3;
        const auto s = lti::build_stacked(dae, d);
        const RowVector Nbar = oracle::random_matrix(rng, 1, s.n_coeffs()).row(0);
        for (double q0 : {-0.7, 0.3, 1.1}) {
            // N(q0) H(q0) directly
            RowVector Nq = RowVector::Zero(dae.n_r);
            for (int i = 0; i <= d; ++i) Nq += std::pow(q0, i) * Nbar.segment(i * dae.n_r, dae.n_r);
            const RowVector direct = Nq * (dae.H0 + q0 * dae.H1);
            Matrix powers(s.barH.cols(), dae.n_xbar());
            for (int i = 0; i <= d + 1; ++i) {
                powers.block(i * dae.n_xbar(), 0, dae.n_xbar(), dae.n_xbar()) =
                    std::pow(q0, i) * Matrix::Identity(dae.n_xbar(), dae.n_xbar());
            }
            const RowVector stacked = Nbar * s.barH * powers;
            CHECK((stacked - direct).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
        }
    }

    TEST_CASE("dae relation holds along linear trajectories") {
        std::mt19937_64 rng(5);
        const auto m = reference_discrete();
        const auto dae = lti::assemble_dae(m);
        Vector x = Vector::Zero(m.n_x());
        std::vector<Vector> xs, ds, ys;
        for (int k = 0; k < 30; ++k) {
            const Vector d = oracle::random_matrix(rng, m.n_d(), 1, 0.05);
            xs.push_back(x);
            ds.push_back(d);
            ys.push_back(m.C * x);
            x = m.A * x + m.B_d * d;
        }
        for (int k = 0; k + 1 < 30; ++k) {
            Vector xb(dae.n_xbar()), xb1(dae.n_xbar());
            xb << xs[static_cast<std::size_t>(k)], ds[static_cast<std::size_t>(k)];
            xb1 << xs[static_cast<std::size_t>(k + 1)], ds[static_cast<std::size_t>(k + 1)];
            const Vector res = dae.H0 * xb + dae.H1 * xb1 + dae.L * ys[static_cast<std::size_t>(k)];
            const double scale = std::max({1e-12, xb.norm(), xb1.norm()});
            CHECK(res.norm() / scale <= 1e-9);
        }
    }

    TEST_CASE("shift matrix") {
        const Matrix D = lti::shift_matrix(3);
        RowVector E(3);
        E << 1, 2, 3;
        const RowVector ED = E * D;
        CHECK(ED(0) == 2.0);
        CHECK(ED(1) == 3.0);
        CHECK(ED(2) == 0.0);

        const int T = 5;
        const Matrix D5 = lti::shift_matrix(T);
        Matrix P = Matrix::Identity(T, T);
        for (int j = 0; j < T; ++j) P = P * D5;
        CHECK(P.isZero(0.0));

        std::mt19937_64 rng(1);
        const Matrix Er = oracle::random_matrix(rng, 3, T);
        Matrix Dj = Matrix::Identity(T, T);
        for (int j = 0; j <= T; ++j) {
            const Matrix S = Er * Dj;
            for (int k = 0; k < T; ++k) {
                for (int r = 0; r < 3; ++r) {
                    const double want = k + j < T ? Er(r, k + j) : 0.0;
                    CHECK(S(r, k) == want);
                }
            }
            Dj = Dj * D5;
        }
    }

    TEST_CASE("agc model is stable on its reachable subspace") {
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::multivariate_topology());
        const auto d = lti::zoh_discretize(sys.model, 0.5);
        CHECK(d.A.rows() == 19);
        Matrix B(19, d.n_d() + d.n_f());
        B << d.B_d, d.B_f;
        const Matrix V = lti::reachable_basis(d.A, B);
        CHECK(V.cols() == 15);
        const Matrix Ar = V.transpose() * d.A * V;
        CHECK(lti::spectral_radius(Ar) < 1.0);
        // the conserved tie sums sit exactly on the unit circle
        CHECK(lti::spectral_radius(d.A) == doctest::Approx(1.0).epsilon(1e-9));
    }
}
