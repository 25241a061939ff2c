#include <Eigen/Eigenvalues>
#include <cmath>

#include "fdi/design.hpp"
#include "fdi/error.hpp"

namespace fdi::design {

std::string to_string(Mode m) { return m == Mode::pure_model ? "pure_model" : "data_assisted"; }

std::string to_string(Kind k) { return k == Kind::univariate ? "univariate" : "multivariate"; }

Mode parse_mode(const std::string& s) {
    if (s == "pure" || s == "pure_model") return Mode::pure_model;
    if (s == "assisted" || s == "data_assisted") return Mode::data_assisted;
    throw ConfigError("unknown design mode '" + s + "'");
}

Vector denominator(int d_N, double p) {
    if (d_N < 0) throw ConfigError("filter degree must be nonnegative");
    if (!(std::abs(p) < 1.0)) throw ConfigError("pole p must satisfy |p| < 1");
    // (q - p)^d_N by repeated multiplication, lowest degree first.
    Vector c = Vector::Ones(1);
    for (int n = 0; n < d_N; ++n) {
        Vector next = Vector::Zero(c.size() + 1);
        next.tail(c.size()) += c;
        next.head(c.size()) -= p * c;
        c = next;
    }
    return c / std::pow(1.0 - p, d_N);
}

Vector impulse_response(const Vector& a, int T) {
    if (a.size() == 0 || a(a.size() - 1) == 0.0) throw ConfigError("a(q) needs a nonzero leading coefficient");
    const auto deg = a.size() - 1;
    const double lead = a(deg);
    if (deg > 0) {
        Matrix comp = Matrix::Zero(deg, deg);
        comp.bottomLeftCorner(deg - 1, deg - 1).setIdentity();
        comp.col(deg - 1) = -a.head(deg) / lead;
        const double rho = Eigen::EigenSolver<Matrix>(comp, false).eigenvalues().cwiseAbs().maxCoeff();
        if (!(rho < 1.0)) throw ConfigError("a(q) has a root outside the open unit disk");
    }
    // a(q) h = delta: h[m] = (delta[m - deg] - sum_{i<deg} a_i h[m - deg + i]) / a_deg.
    Vector h = Vector::Zero(T);
    for (int m = static_cast<int>(deg); m < T; ++m) {
        double acc = (m == deg) ? 1.0 : 0.0;
        for (Eigen::Index i = 0; i < deg; ++i) {
            const auto idx = m - deg + i;
            if (idx >= 0) acc -= a(i) * h(idx);
        }
        h(m) = acc / lead;
    }
    return h;
}

Matrix gram_matrix(const Vector& a, int T) {
    if (T < 1) throw ConfigError("horizon must be positive");
    const Vector h = impulse_response(a, T);
    // Hm(l, k) = h[k - l]; G = Hm Hm^T.
    Matrix Hm = Matrix::Zero(T, T);
    for (int l = 0; l < T; ++l) {
        for (int k = l; k < T; ++k) Hm(l, k) = h(k - l);
    }
    Matrix G = Hm * Hm.transpose();
    return 0.5 * (G + G.transpose());
}

Matrix mismatch_signature(const Matrix& y_p, const Matrix& y) {
    if (y_p.rows() != y.rows() || y_p.cols() != y.cols()) {
        throw DimensionError("mismatch_signature: trajectories are " + std::to_string(y_p.rows()) + "x" +
                             std::to_string(y_p.cols()) + " and " + std::to_string(y.rows()) + "x" +
                             std::to_string(y.cols()));
    }
    return y_p - y;
}

Matrix stacked_regressor(const Matrix& E, int d_N) {
    const auto n_y = E.rows();
    const auto T = E.cols();
    Matrix S = Matrix::Zero((d_N + 1) * n_y, T);
    for (int j = 0; j <= d_N; ++j) {
        if (j < T) S.block(j * n_y, 0, n_y, T - j) = E.rightCols(T - j);
    }
    return S;
}

MismatchData q_matrix(const lti::StackedSystem& stacked, const Matrix& E, const Matrix& G) {
    if (E.rows() != stacked.dae.n_y) throw DimensionError("signature rows do not match the model outputs");
    if (G.rows() != E.cols() || G.cols() != E.cols()) throw DimensionError("Gram matrix does not match the horizon");
    MismatchData md;
    md.E = E;
    md.Dstack = stacked_regressor(E, stacked.d_N);
    const Matrix LD = stacked.barL * md.Dstack;
    Matrix Q = LD * G * LD.transpose();
    md.Q = 0.5 * (Q + Q.transpose());
    return md;
}

Matrix average_Q(const std::vector<Matrix>& Qs) {
    if (Qs.empty()) throw ConfigError("average_Q needs at least one training instance");
    Matrix sum = Matrix::Zero(Qs.front().rows(), Qs.front().cols());
    for (const auto& Q : Qs) {
        if (Q.rows() != sum.rows() || Q.cols() != sum.cols()) throw DimensionError("Q_i shapes differ");
        sum += Q;
    }
    return sum / static_cast<double>(Qs.size());
}

double worst_case_cost(const RowVector& Nbar, const std::vector<Matrix>& Qs) {
    if (Qs.empty()) throw ConfigError("worst_case_cost needs at least one training instance");
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& Q : Qs) worst = std::max(worst, (Nbar * Q * Nbar.transpose())(0, 0));
    return worst;
}

}  // namespace fdi::design
