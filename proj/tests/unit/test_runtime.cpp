#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fdi/agc.hpp"
#include "fdi/error.hpp"
#include "fdi/plant.hpp"
#include "fdi/runtime.hpp"
#include "oracles.hpp"

using namespace fdi;

namespace {

design::FilterDesign random_design(std::mt19937_64& rng, Eigen::Index n_r, int d_N = 3, double p = 0.8) {
    design::FilterDesign d;
    d.d_N = d_N;
    d.p = p;
    d.a = design::denominator(d_N, p);
    d.Nbar = oracle::random_matrix(rng, 1, (d_N + 1) * n_r).row(0);
    return d;
}

std::vector<RowVector> split(const RowVector& Nbar, Eigen::Index n_r) {
    std::vector<RowVector> out;
    for (Eigen::Index i = 0; i * n_r < Nbar.size(); ++i) out.push_back(Nbar.segment(i * n_r, n_r));
    return out;
}

struct Reference {
    lti::LinearModel model;
    lti::StackedSystem stacked;
};

const Reference& reference() {
    static const Reference r = [] {
        Reference out;
        const auto sys = agc::assemble_multiarea(agc::reference_areas(), agc::univariate_topology());
        out.model = lti::zoh_discretize(sys.model, 0.5);
        out.stacked = lti::build_stacked(lti::assemble_dae(out.model), 3);
        return out;
    }();
    return r;
}

}  // namespace

TEST_SUITE("runtime") {
    TEST_CASE("zero input gives zero residual") {
        std::mt19937_64 rng(1);
        const Matrix L = oracle::random_matrix(rng, 4, 3);
        const auto d = random_design(rng, 4);
        const Vector r = runtime::run_filter(d, L, Matrix::Zero(3, 50));
        CHECK(r.isZero(0.0));
    }

    TEST_CASE("streamed residual equals the convolution oracle") {
        std::mt19937_64 rng(2);
        for (double p : {0.0, 0.5, 0.8}) {
            const Matrix L = oracle::random_matrix(rng, 5, 3);
            const auto d = random_design(rng, 5, 3, p);
            const Matrix Y = oracle::random_matrix(rng, 3, 40);
            const Vector r = runtime::run_filter(d, L, Y);
            const Vector o = oracle::filter_direct(split(d.Nbar, 5), L, d.a, Y);
            CHECK((r - o).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, o.cwiseAbs().maxCoeff()));
        }
    }

    TEST_CASE("residual energy matches the quadratic form") {
        const auto& ref = reference();
        std::mt19937_64 rng(3);
        design::FilterDesign d;
        d.d_N = 3;
        d.a = design::denominator(3, 0.8);
        d.Nbar = oracle::random_matrix(rng, 1, ref.stacked.n_coeffs()).row(0);
        const Matrix E = oracle::random_matrix(rng, ref.stacked.dae.n_y, 20, 0.01);
        const Matrix G = design::gram_matrix(d.a, 20);
        const auto md = design::q_matrix(ref.stacked, E, G);
        const Vector r = runtime::run_filter(d, ref.stacked.dae.L, E);
        const double quad = d.Nbar * md.Q * d.Nbar.transpose();
        CHECK(r.squaredNorm() == doctest::Approx(quad).epsilon(1e-9));
        const Vector e = runtime::residual_energy(r, 20);
        CHECK(e(19) * e(19) == doctest::Approx(quad).epsilon(1e-9));
    }

    TEST_CASE("a kernel filter is blind to the linear model") {
        const auto& ref = reference();
        design::DesignOptions o;
        o.mode = design::Mode::pure_model;
        const auto d = design::design_univariate(ref.stacked, Matrix(), o);
        plant::DisturbanceSpec dist;
        dist.targets = {0, 1, 2};
        dist.sigma = 0.05;
        dist.seed = 31;
        dist.horizon = 60.0;
        const auto y = plant::simulate_linear(ref.model, dist, plant::AttackSpec{});
        const Vector r = runtime::run_filter(d, ref.stacked.dae.L, y.Y);
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-6);

        plant::AttackSpec atk;
        atk.mode = plant::AttackMode::univariate;
        atk.value = 0.1;
        atk.onset = 30.0;
        const auto ya = plant::simulate_linear(ref.model, dist, atk);
        const Vector ra = runtime::run_filter(d, ref.stacked.dae.L, ya.Y);
        CHECK(ra.head(60).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(ra.tail(40).cwiseAbs().maxCoeff() > 1e-3);
    }

    TEST_CASE("residual energy examples") {
        const Vector e = runtime::residual_energy(Vector::Ones(6), 3);
        CHECK(e(0) == doctest::Approx(1.0));
        CHECK(e(1) == doctest::Approx(std::sqrt(2.0)));
        for (int k = 2; k < 6; ++k) CHECK(e(k) == doctest::Approx(std::sqrt(3.0)));
        Vector r = Vector::Zero(8);
        r(2) = 3.0;
        r(3) = -4.0;
        const Vector f = runtime::residual_energy(r, 2);
        CHECK(f(3) == doctest::Approx(5.0));
        CHECK(f(4) == doctest::Approx(4.0));
        CHECK(f(5) == 0.0);
    }

    TEST_CASE("threshold calibration") {
        std::mt19937_64 rng(4);
        const Matrix X = oracle::random_matrix(rng, 4, 4);
        const Matrix Q1 = X * X.transpose();
        const Matrix Q2 = 3.0 * Q1;
        design::FilterDesign d;
        d.Nbar = oracle::random_matrix(rng, 1, 4).row(0);
        const auto det = runtime::calibrate_threshold(d, {Q1, Q2}, 0.1, 20);
        CHECK(det.tau_star == doctest::Approx(std::sqrt(double(d.Nbar * Q2 * d.Nbar.transpose()))));
        CHECK(det.threshold() == doctest::Approx(det.tau_star + 0.1));
        CHECK_THROWS_AS(runtime::calibrate_threshold(d, {}, 0.1), ConfigError);
        CHECK_THROWS_AS(runtime::calibrate_threshold(d, {Q1}, -0.1), ConfigError);
    }

    TEST_CASE("training signatures never cross the calibrated threshold") {
        const auto& ref = reference();
        std::mt19937_64 rng(5);
        design::FilterDesign d;
        d.d_N = 3;
        d.a = design::denominator(3, 0.8);
        d.Nbar = oracle::random_matrix(rng, 1, ref.stacked.n_coeffs()).row(0);
        const Matrix G = design::gram_matrix(d.a, 20);
        std::vector<Matrix> Es, Qs;
        for (int i = 0; i < 5; ++i) {
            Es.push_back(oracle::random_matrix(rng, ref.stacked.dae.n_y, 20, 0.01));
            Qs.push_back(design::q_matrix(ref.stacked, Es.back(), G).Q);
        }
        const auto det = runtime::calibrate_threshold(d, Qs, 0.0, 20);
        for (const auto& E : Es) {
            const auto rep = runtime::detect(det, runtime::run_filter(d, ref.stacked.dae.L, E), 0.5, 0);
            CHECK(rep.max_energy <= det.tau_star * (1.0 + 1e-9));
        }
    }

    TEST_CASE("causality") {
        std::mt19937_64 rng(6);
        const Matrix L = oracle::random_matrix(rng, 3, 2);
        const auto d = random_design(rng, 3);
        Matrix Y = oracle::random_matrix(rng, 2, 30);
        const Vector a = runtime::run_filter(d, L, Y);
        Y.rightCols(12) = oracle::random_matrix(rng, 2, 12);
        const Vector b = runtime::run_filter(d, L, Y);
        CHECK(a.head(18) == b.head(18));
        CHECK(a.tail(12) != b.tail(12));
    }

    TEST_CASE("bounded input gives bounded residual") {
        std::mt19937_64 rng(7);
        const Matrix L = oracle::random_matrix(rng, 3, 2);
        const auto d = random_design(rng, 3);
        const Vector h = design::impulse_response(d.a, 400);
        double wsum = 0.0;
        for (int i = 0; i <= 3; ++i) wsum += (d.coeff(i, 3) * L).cwiseAbs().sum();
        const double bound = wsum * h.cwiseAbs().sum();
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Matrix Y(2, 400);
        for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = u(rng);
        const Vector r = runtime::run_filter(d, L, Y);
        CHECK(r.cwiseAbs().maxCoeff() <= bound);
        CHECK(std::isfinite(r.cwiseAbs().maxCoeff()));
    }

    TEST_CASE("filter state and reset") {
        std::mt19937_64 rng(8);
        const Matrix L = oracle::random_matrix(rng, 3, 2);
        const auto d = random_design(rng, 3);
        runtime::ResidualFilter f(d, L);
        CHECK(f.warming_up());
        const Matrix Y = oracle::random_matrix(rng, 2, 10);
        Vector r1(10);
        for (int k = 0; k < 10; ++k) r1(k) = f.step(Y.col(k));
        CHECK_FALSE(f.warming_up());
        CHECK(f.samples() == 10);
        f.reset();
        CHECK(f.samples() == 0);
        for (int k = 0; k < 10; ++k) CHECK(f.step(Y.col(k)) == r1(k));
        CHECK_THROWS_AS(f.step(Vector::Zero(3)), DimensionError);
        CHECK_THROWS_AS(runtime::ResidualFilter(d, Matrix::Zero(4, 2)), DimensionError);
    }

    TEST_CASE("alarm latches after warm-up") {
        runtime::Detector det;
        det.tau_star = 0.5;
        det.margin = 0.1;
        det.window = 2;
        Vector r = Vector::Zero(12);
        r(1) = 5.0;  // inside the warm-up
        r(7) = 1.0;
        const auto rep = runtime::detect(det, r, 0.5, 3);
        CHECK(rep.first_alarm == 7);
        CHECK(rep.first_alarm_time == doctest::Approx(3.5));
        for (int k = 0; k < 12; ++k) CHECK(rep.alarm[static_cast<std::size_t>(k)] == (k >= 7 ? 1 : 0));
        CHECK(rep.max_energy == doctest::Approx(1.0));
        CHECK(rep.final_energy == 0.0);
        const auto early = runtime::detect(det, r, 0.5, 0);
        CHECK(early.first_alarm == 1);

        const auto dir = std::filesystem::temp_directory_path() / "fdi_runtime_trace";
        std::filesystem::create_directories(dir);
        runtime::write_residual_trace(dir / "r.csv", rep);
        std::ifstream is(dir / "r.csv");
        std::string header;
        std::getline(is, header);
        CHECK(header == "t,r,energy,alarm");
        int lines = 0;
        for (std::string s; std::getline(is, s);) ++lines;
        CHECK(lines == 12);
        std::filesystem::remove_all(dir);
    }
}
