#pragma once

#include <optional>
#include <vector>

#include "fdi/types.hpp"

namespace fdi::lti {

/// Matrix polynomial in the forward shift operator q:
/// M(q) = M_0 + M_1 q + ... + M_deg q^deg.
class PolyMatrix {
   public:
    PolyMatrix() = default;
    explicit PolyMatrix(std::vector<Matrix> coeffs);

    /// Scalar polynomial from its coefficients, lowest degree first.
    static PolyMatrix scalar(const Vector& coeffs);

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    Eigen::Index rows() const { return coeffs_.empty() ? 0 : coeffs_.front().rows(); }
    Eigen::Index cols() const { return coeffs_.empty() ? 0 : coeffs_.front().cols(); }

    const Matrix& coeff(int i) const { return coeffs_.at(static_cast<std::size_t>(i)); }
    const std::vector<Matrix>& coeffs() const { return coeffs_; }

    /// Sum_i M_i q0^i (Horner).
    Matrix evaluate(double q0) const;

   private:
    std::vector<Matrix> coeffs_;
};

/// M(1) = sum of all coefficient matrices.
Matrix eval_at_one(const PolyMatrix& poly);

/// State-space model
///   continuous: x' = A x + B_d d + B_f f,     y = C x + D_f f
///   discrete:   x+ = A x + B_d d + B_f f,     y = C x + D_f f
struct LinearModel {
    Matrix A, B_d, B_f, C, D_f;
    /// Sampling time in seconds for discrete models, empty for continuous ones.
    std::optional<double> Ts;

    bool is_discrete() const { return Ts.has_value(); }
    Eigen::Index n_x() const { return A.rows(); }
    Eigen::Index n_d() const { return B_d.cols(); }
    Eigen::Index n_f() const { return B_f.cols(); }
    Eigen::Index n_y() const { return C.rows(); }

    /// Throws DimensionError / ConfigError on inconsistent shapes or Ts <= 0.
    void validate() const;
};

/// Zero-order-hold discretization through the exponential of the augmented
/// matrix [[A, B_d, B_f], [0, 0, 0]] * Ts.
LinearModel zoh_discretize(const LinearModel& continuous, double Ts);

/// H(q) xbar + L y + F f = 0 with xbar = [x; d]:
///   H(q) = H0 + q H1,  H0 = [A, B_d; C, 0],  H1 = [-I, 0; 0, 0],
///   L = [0; -I],  F = [B_f; D_f].
struct DaeSystem {
    Matrix H0, H1, L, F;
    Eigen::Index n_r = 0, n_x = 0, n_d = 0, n_y = 0, n_f = 0;

    Eigen::Index n_xbar() const { return n_x + n_d; }
    PolyMatrix H() const { return PolyMatrix({H0, H1}); }
};

DaeSystem assemble_dae(const LinearModel& discrete);

/// Block matrices for a filter N(q) = sum_i N_i q^i of degree d_N, with the
/// coefficients laid out as the row block Nbar = [N_0, ..., N_{d_N}]:
///   N(q) H(q) = Nbar * barH * [I; qI; ...; q^{d_N+1} I]
///   N(q) L    = Nbar * barL * [I; qI; ...; q^{d_N} I]
///   N(q) F    = Nbar * barF * [I; qI; ...; q^{d_N} I]
struct StackedSystem {
    Matrix barH, barL, barF;
    int d_N = 0;
    DaeSystem dae;

    Eigen::Index n_coeffs() const { return (d_N + 1) * dae.n_r; }
};

StackedSystem build_stacked(const DaeSystem& dae, int d_N);

/// T x T column left-shift: (E * D)[:, k] = E[:, k + 1], last column zero.
Matrix shift_matrix(int T);

/// Largest modulus among the eigenvalues of a square matrix.
double spectral_radius(const Matrix& A);

/// Largest real part among the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& A);

/// Orthonormal basis of the reachable subspace span[B, AB, ..., A^{n-1}B].
Matrix reachable_basis(const Matrix& A, const Matrix& B, double tol = 1e-10);

/// Spectral abscissa of A restricted to the subspace reachable from B. Modes
/// that no input can excite (e.g. conserved tie-flow sums) are ignored.
double reachable_spectral_abscissa(const Matrix& A, const Matrix& B);

}  // namespace fdi::lti
