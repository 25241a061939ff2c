#include "fdi/lti.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <limits>
#include <string>

#include "fdi/error.hpp"

namespace fdi::lti {

namespace {

void require_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (M.rows() != rows || M.cols() != cols) {
        throw DimensionError(std::string(name) + " is " + std::to_string(M.rows()) + "x" +
                             std::to_string(M.cols()) + ", expected " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

}  // namespace

PolyMatrix::PolyMatrix(std::vector<Matrix> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw DimensionError("PolyMatrix needs at least one coefficient");
    for (const auto& M : coeffs_) {
        if (M.rows() != coeffs_.front().rows() || M.cols() != coeffs_.front().cols()) {
            throw DimensionError("PolyMatrix coefficients must share one shape");
        }
    }
}

PolyMatrix PolyMatrix::scalar(const Vector& coeffs) {
    std::vector<Matrix> c;
    c.reserve(static_cast<std::size_t>(coeffs.size()));
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) c.push_back(Matrix::Constant(1, 1, coeffs(i)));
    return PolyMatrix(std::move(c));
}

Matrix PolyMatrix::evaluate(double q0) const {
    if (coeffs_.empty()) return {};
    Matrix acc = coeffs_.back();
    for (int i = degree() - 1; i >= 0; --i) acc = acc * q0 + coeffs_[static_cast<std::size_t>(i)];
    return acc;
}

Matrix eval_at_one(const PolyMatrix& poly) {
    Matrix sum = Matrix::Zero(poly.rows(), poly.cols());
    for (const auto& M : poly.coeffs()) sum += M;
    return sum;
}

void LinearModel::validate() const {
    const auto n = A.rows();
    require_shape(A, n, n, "A");
    if (B_d.rows() != n) throw DimensionError("B_d row count must equal the state dimension");
    if (B_f.rows() != n) throw DimensionError("B_f row count must equal the state dimension");
    if (C.cols() != n) throw DimensionError("C column count must equal the state dimension");
    require_shape(D_f, C.rows(), B_f.cols(), "D_f");
    if (Ts && !(*Ts > 0.0)) throw ConfigError("discrete models need a strictly positive sampling time");
}

LinearModel zoh_discretize(const LinearModel& model, double Ts) {
    model.validate();
    if (model.is_discrete()) throw ConfigError("zoh_discretize expects a continuous model");
    if (!(Ts > 0.0)) throw ConfigError("sampling time must be strictly positive");
    if (!model.A.allFinite() || !model.B_d.allFinite() || !model.B_f.allFinite()) {
        throw ConfigError("continuous model contains non-finite entries");
    }

    const auto n = model.n_x();
    const auto nd = model.n_d();
    const auto nf = model.n_f();
    Matrix aug = Matrix::Zero(n + nd + nf, n + nd + nf);
    aug.topLeftCorner(n, n) = model.A * Ts;
    aug.block(0, n, n, nd) = model.B_d * Ts;
    aug.block(0, n + nd, n, nf) = model.B_f * Ts;

    const Matrix E = aug.exp();
    if (!E.allFinite()) throw NumericalError("matrix exponential did not converge");

    LinearModel out;
    out.A = E.topLeftCorner(n, n);
    out.B_d = E.block(0, n, n, nd);
    out.B_f = E.block(0, n + nd, n, nf);
    out.C = model.C;
    out.D_f = model.D_f;
    out.Ts = Ts;
    return out;
}

DaeSystem assemble_dae(const LinearModel& m) {
    m.validate();
    if (!m.is_discrete()) throw ConfigError("assemble_dae expects a discrete model");

    DaeSystem dae;
    dae.n_x = m.n_x();
    dae.n_d = m.n_d();
    dae.n_y = m.n_y();
    dae.n_f = m.n_f();
    dae.n_r = dae.n_x + dae.n_y;
    const auto nxb = dae.n_xbar();

    dae.H0 = Matrix::Zero(dae.n_r, nxb);
    dae.H0.topLeftCorner(dae.n_x, dae.n_x) = m.A;
    dae.H0.block(0, dae.n_x, dae.n_x, dae.n_d) = m.B_d;
    dae.H0.block(dae.n_x, 0, dae.n_y, dae.n_x) = m.C;

    dae.H1 = Matrix::Zero(dae.n_r, nxb);
    dae.H1.topLeftCorner(dae.n_x, dae.n_x) = -Matrix::Identity(dae.n_x, dae.n_x);

    dae.L = Matrix::Zero(dae.n_r, dae.n_y);
    dae.L.bottomRows(dae.n_y) = -Matrix::Identity(dae.n_y, dae.n_y);

    dae.F.resize(dae.n_r, dae.n_f);
    dae.F << m.B_f, m.D_f;
    return dae;
}

StackedSystem build_stacked(const DaeSystem& dae, int d_N) {
    if (d_N < 0) throw ConfigError("filter degree must be nonnegative");
    const auto blocks = static_cast<Eigen::Index>(d_N) + 1;
    const auto nr = dae.n_r;
    const auto nxb = dae.n_xbar();

    StackedSystem s;
    s.d_N = d_N;
    s.dae = dae;
    s.barH = Matrix::Zero(blocks * nr, (blocks + 1) * nxb);
    s.barL = Matrix::Zero(blocks * nr, blocks * dae.n_y);
    s.barF = Matrix::Zero(blocks * nr, blocks * dae.n_f);
    for (Eigen::Index i = 0; i < blocks; ++i) {
        s.barH.block(i * nr, i * nxb, nr, nxb) = dae.H0;
        s.barH.block(i * nr, (i + 1) * nxb, nr, nxb) = dae.H1;
        s.barL.block(i * nr, i * dae.n_y, nr, dae.n_y) = dae.L;
        s.barF.block(i * nr, i * dae.n_f, nr, dae.n_f) = dae.F;
    }
    return s;
}

Matrix shift_matrix(int T) {
    if (T < 1) throw ConfigError("shift horizon must be at least one sample");
    Matrix D = Matrix::Zero(T, T);
    for (int k = 0; k + 1 < T; ++k) D(k + 1, k) = 1.0;
    return D;
}

double spectral_radius(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_abscissa(const Matrix& A) {
    if (A.size() == 0) return -std::numeric_limits<double>::infinity();
    return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().real().maxCoeff();
}

Matrix reachable_basis(const Matrix& A, const Matrix& B, double tol) {
    const auto n = A.rows();
    if (B.rows() != n || A.cols() != n) throw DimensionError("reachable_basis: shape mismatch");
    Matrix K(n, 0);
    Matrix block = B;
    for (Eigen::Index i = 0; i < n && block.cols() > 0; ++i) {
        Matrix next(n, K.cols() + block.cols());
        next << K, block;
        Eigen::ColPivHouseholderQR<Matrix> qr(next);
        qr.setThreshold(tol);
        const auto rank = qr.rank();
        if (rank == K.cols() && i > 0) break;
        K = Matrix(qr.householderQ()).leftCols(rank);
        block = A * K;
    }
    return K;
}

double reachable_spectral_abscissa(const Matrix& A, const Matrix& B) {
    const Matrix V = reachable_basis(A, B);
    return spectral_abscissa(Matrix(V.transpose() * A * V));
}

}  // namespace fdi::lti
