#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fdi/lti.hpp"
#include "fdi/opt.hpp"

namespace fdi::design {

enum class Mode { pure_model, data_assisted };
enum class Kind { univariate, multivariate };

std::string to_string(Mode m);
std::string to_string(Kind k);
Mode parse_mode(const std::string& s);

/// Coefficients of a(q) = (q - p)^d_N / (1 - p)^d_N, lowest degree first, so a(1) = 1.
Vector denominator(int d_N, double p);

/// Impulse response of 1/a(q) over T samples, h[m] = 0 for m < deg(a).
/// Throws ConfigError unless every root of a(q) lies strictly inside the unit circle.
Vector impulse_response(const Vector& a, int T);

/// G(i, j) = sum_k h[k - i] h[k - j] over k = 0..T-1.
Matrix gram_matrix(const Vector& a, int T);

/// E = y_p - y column by column; rejects differing shapes or sampling times.
Matrix mismatch_signature(const Matrix& y_p, const Matrix& y);

/// [E; E D; ...; E D^d_N] with the zero-filled left shift D.
Matrix stacked_regressor(const Matrix& E, int d_N);

struct MismatchData {
    Matrix E;
    Matrix Dstack;
    Matrix Q;
};

/// Q = (barL Dstack) G (barL Dstack)^T, symmetrized.
MismatchData q_matrix(const lti::StackedSystem& stacked, const Matrix& E, const Matrix& G);

/// (1/m) sum Q_i. Throws ConfigError on an empty list.
Matrix average_Q(const std::vector<Matrix>& Qs);

/// max_i Nbar Q_i Nbar^T (evaluation only).
double worst_case_cost(const RowVector& Nbar, const std::vector<Matrix>& Qs);

/// Univariate {f : f_min <= f <= f_max} or multivariate {F_b alpha : A alpha >= b}.
/// F_b is n_f x d with one basis vector per column.
struct AttackModel {
    Kind kind = Kind::univariate;
    double f_min = -1.0;
    double f_max = 1.0;
    Matrix Fb;
    Matrix A;
    Vector b;

    Eigen::Index dims() const { return Fb.cols(); }
    /// Shapes, nonzero univariate bounds, and one phase-one LP for a nonempty polytope.
    void validate(Eigen::Index n_f) const;
};

struct BranchReport {
    int j = 0;     // coefficient index (univariate) or LP/QP index 1..2d_N+2 (multivariate)
    int sign = 1;
    opt::Status status = opt::Status::failure;
    double value = 0.0;  // objective (QP) or gamma* (LP)
    opt::KktResiduals kkt;
    std::string message;
};

struct FilterDesign {
    Kind kind = Kind::univariate;
    Mode mode = Mode::data_assisted;
    int d_N = 3;
    double p = 0.8;
    Vector a;
    RowVector Nbar;
    double objective = 0.0;      // Nbar Qbar Nbar^T without regularization
    int branch_j = 0;
    int branch_sign = 1;
    bool track_steady_state = false;
    // multivariate only
    double gamma = 0.0;
    Vector lambda;
    double coefficient_bound = 1.0;  // |Nbar|_inf normalization
    std::vector<BranchReport> branches;

    /// N_i as a row of width n_r.
    RowVector coeff(int i, Eigen::Index n_r) const { return Nbar.segment(i * n_r, n_r); }
};

struct DesignOptions {
    int d_N = 3;
    double p = 0.8;
    Mode mode = Mode::data_assisted;
    bool track_steady_state = false;
    // Solve only the positive-sign branches when no extra linear constraint breaks the symmetry.
    bool symmetric_shortcut = true;
    double regularization = 1e-10;
    double feasibility_tol = 1e-7;
    // |Nbar|_inf <= coefficient_bound normalizes LP_j and stops the gamma tuning loop.
    double coefficient_bound = 1.0;
    // gamma tuning loop
    int bisection_iterations = 40;
    double bisection_tol = 1e-7;
};

/// Minimum of Nbar (Qbar + reg I) Nbar^T over the 2(d_N + 1) branches
/// {Nbar barH = 0, s N_j F >= 1} (plus the unit steady-state gain when tracking).
/// In pure_model mode each branch is a zero-cost feasibility LP and Qbar only scores the
/// result. Throws InfeasibleError when no branch is feasible.
FilterDesign design_univariate(const lti::StackedSystem& stacked, const Matrix& Qbar, const DesignOptions& opts);

struct PretrainResult {
    std::vector<double> gamma;  // gamma*_j for j = 1..2d_N+2, +inf when unbounded
    int j_star = 0;             // 1-based argmax
    std::vector<BranchReport> branches;
    double best() const { return gamma.at(static_cast<std::size_t>(j_star - 1)); }
};

/// Coefficient index and sign of branch j (1-based): k = ceil(j/2) - 1, sign (-1)^j.
int branch_coeff(int j);
int branch_sign(int j);

/// LP_j: max b'lambda s.t. (-1)^j N_k F F_b = lambda' A, Nbar barH = 0, lambda >= 0,
/// |Nbar|_inf <= bound. Throws InfeasibleError when every gamma*_j <= 0.
PretrainResult pretrain_multivariate(const lti::StackedSystem& stacked, const AttackModel& attack,
                                     double bound = 1.0);

/// QP_j for a fixed gamma (no normalization box). Returns the raw solution.
opt::Solution solve_qp_j(const lti::StackedSystem& stacked, const Matrix& Qbar, const AttackModel& attack, int j,
                         double gamma, double regularization);

/// QP_j with the gamma tuning loop: bisection for the largest gamma in (0, gamma_start]
/// whose optimum still satisfies |Nbar|_inf <= coefficient_bound. In pure_model mode the LP_j vertex is
/// returned with gamma = gamma*_j.
FilterDesign design_multivariate(const lti::StackedSystem& stacked, const Matrix& Qbar, const AttackModel& attack,
                                 double gamma_start, int j, const DesignOptions& opts);

/// argmin over A alpha >= b of c' alpha with c = ((-1)^j N_k F F_b)'.
/// Throws NumericalError on an unbounded or failed LP.
Vector worst_case_alpha(const lti::StackedSystem& stacked, const FilterDesign& design, const AttackModel& attack,
                        int j);

/// -a(1)^{-1} (sum_i N_i) F f.
double steady_state_residual(const lti::StackedSystem& stacked, const FilterDesign& design, const Vector& f);

/// min over A alpha >= b of |steady_state_residual(F_b alpha)|, from two LPs.
double steady_state_margin(const lti::StackedSystem& stacked, const FilterDesign& design, const AttackModel& attack);

struct InvariantReport {
    double nullspace = 0.0;      // max |Nbar barH|
    double detection = 0.0;      // univariate: max |N_i F|; multivariate: b'lambda
    double tracking = 0.0;       // |steady-state gain - 1| when tracking
    double attack_map = 0.0;     // multivariate: max |(-1)^j N_k F F_b - lambda' A|
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Every FilterDesign invariant, each against the 1e-7 feasibility tolerance.
InvariantReport check_invariants(const lti::StackedSystem& stacked, const FilterDesign& design,
                                 const AttackModel* attack = nullptr, double tol = 1e-7);

/// Filter artifact as JSON, doubles written in round-trip form.
std::string artifact_json(const FilterDesign& design, std::uint64_t model_hash, double tau_star, double margin);

struct Artifact {
    FilterDesign design;
    std::uint64_t model_hash = 0;
    double tau_star = 0.0;
    double margin = 0.0;
    double threshold() const { return tau_star + margin; }
};

/// Parses an artifact and checks the model hash and the invariants.
/// Throws ConfigError on hash mismatch or violated invariants.
Artifact parse_artifact(const std::string& text, const lti::StackedSystem& stacked, std::uint64_t expected_hash,
                        const AttackModel* attack = nullptr);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace fdi::design
