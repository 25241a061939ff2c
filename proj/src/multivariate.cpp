#include <cmath>
#include <sstream>

#include "fdi/design.hpp"
#include "fdi/error.hpp"

namespace fdi::design {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Columns of barF belonging to coefficient k, times F_b: N_k F F_b = Nbar * attack_block(k).
Matrix attack_block(const lti::StackedSystem& s, const AttackModel& atk, int k) {
    const auto nf = s.dae.n_f;
    return s.barF.middleCols(k * nf, nf) * atk.Fb;
}

// Equality rows shared by LP_j and QP_j over z = [Nbar'; lambda].
void attack_equalities(const lti::StackedSystem& s, const AttackModel& atk, int j, Matrix& Aeq, Vector& beq) {
    const auto n = s.n_coeffs();
    const auto nb = atk.A.rows();
    const auto d = atk.dims();
    const auto nh = s.barH.cols();
    Aeq = Matrix::Zero(nh + d, n + nb);
    Aeq.topLeftCorner(nh, n) = s.barH.transpose();
    Aeq.block(nh, 0, d, n) = branch_sign(j) * attack_block(s, atk, branch_coeff(j)).transpose();
    Aeq.block(nh, n, d, nb) = -atk.A.transpose();
    beq = Vector::Zero(nh + d);
}

// LP_j over z = [Nbar'; lambda] with the normalization box |Nbar|_inf <= bound.
opt::Solution solve_lp_j(const lti::StackedSystem& s, const AttackModel& atk, int j, double bound) {
    const auto n = s.n_coeffs();
    const auto nb = atk.A.rows();
    opt::QpProblem lp;
    attack_equalities(s, atk, j, lp.Aeq, lp.beq);
    lp.c = Vector::Zero(n + nb);
    lp.c.tail(nb) = -atk.b;
    lp.lower = Vector::Constant(n + nb, -bound);
    lp.upper = Vector::Constant(n + nb, bound);
    lp.lower.tail(nb).setZero();
    lp.upper.tail(nb).setConstant(kInf);
    return opt::solve_lp(lp);
}

double quad(const RowVector& x, const Matrix& Q) { return Q.size() ? (x * Q * x.transpose())(0, 0) : 0.0; }

}  // namespace

void AttackModel::validate(Eigen::Index n_f) const {
    if (kind == Kind::univariate) {
        if (f_min == 0.0 || f_max == 0.0 || !(f_min <= f_max)) {
            throw ConfigError("univariate attack bounds must be nonzero with f_min <= f_max");
        }
        return;
    }
    if (Fb.rows() != n_f) {
        throw DimensionError("attack basis has " + std::to_string(Fb.rows()) + " rows, model has " +
                             std::to_string(n_f) + " attack channels");
    }
    if (A.cols() != Fb.cols() || A.rows() != b.size() || A.rows() == 0) {
        throw DimensionError("polytope A alpha >= b does not match the attack basis");
    }
    opt::QpProblem p;
    p.c = Vector::Zero(A.cols());
    p.Aineq = A;
    p.bineq = b;
    if (!opt::is_feasible(p)) throw ConfigError("attack polytope is empty");
}

int branch_coeff(int j) { return (j + 1) / 2 - 1; }

int branch_sign(int j) { return (j % 2 == 0) ? 1 : -1; }

PretrainResult pretrain_multivariate(const lti::StackedSystem& s, const AttackModel& atk, double bound) {
    if (atk.kind != Kind::multivariate) throw ConfigError("pretraining needs a multivariate attack model");
    if (!(bound > 0.0)) throw ConfigError("coefficient bound must be positive");
    atk.validate(s.dae.n_f);
    const int count = 2 * s.d_N + 2;

    PretrainResult res;
    res.gamma.assign(static_cast<std::size_t>(count), -kInf);
    for (int j = 1; j <= count; ++j) {
        const auto sol = solve_lp_j(s, atk, j, bound);
        BranchReport rep;
        rep.j = j;
        rep.sign = branch_sign(j);
        rep.status = sol.status;
        rep.message = sol.message;
        rep.kkt = sol.residuals;
        if (sol.status == opt::Status::optimal) {
            rep.value = -sol.objective;
        } else if (sol.status == opt::Status::unbounded) {
            rep.value = kInf;
        } else {
            rep.value = -kInf;
        }
        res.gamma[static_cast<std::size_t>(j - 1)] = rep.value;
        res.branches.push_back(rep);
    }
    // Strict comparison keeps the lowest j among equal optima.
    int best = 1;
    for (int j = 2; j <= count; ++j) {
        const double g = res.gamma[static_cast<std::size_t>(j - 1)];
        const double cur = res.gamma[static_cast<std::size_t>(best - 1)];
        if (g > cur + 1e-9 * (1.0 + std::abs(std::isfinite(cur) ? cur : 0.0))) best = j;
    }
    res.j_star = best;
    if (!(res.best() > 1e-9)) {
        throw InfeasibleError("no detectable attack direction: every gamma*_j <= 0");
    }
    return res;
}

opt::Solution solve_qp_j(const lti::StackedSystem& s, const Matrix& Qbar, const AttackModel& atk, int j,
                         double gamma, double regularization) {
    const auto n = s.n_coeffs();
    const auto nb = atk.A.rows();
    opt::QpProblem qp;
    attack_equalities(s, atk, j, qp.Aeq, qp.beq);
    qp.P = Matrix::Zero(n + nb, n + nb);
    qp.P.topLeftCorner(n, n) = 2.0 * regularization * Matrix::Identity(n, n);
    if (Qbar.size()) qp.P.topLeftCorner(n, n) += 2.0 * Qbar;
    qp.P = 0.5 * (qp.P + qp.P.transpose());
    qp.c = Vector::Zero(n + nb);
    qp.Aineq = Matrix::Zero(1, n + nb);
    qp.Aineq.block(0, n, 1, nb) = atk.b.transpose();
    qp.bineq = Vector::Constant(1, gamma);
    qp.lower = Vector::Constant(n + nb, -kInf);
    qp.upper = Vector::Constant(n + nb, kInf);
    qp.lower.tail(nb).setZero();
    return opt::solve_qp(qp);
}

FilterDesign design_multivariate(const lti::StackedSystem& s, const Matrix& Qbar, const AttackModel& atk,
                                 double gamma_start, int j, const DesignOptions& opts) {
    if (atk.kind != Kind::multivariate) throw ConfigError("design_multivariate needs a multivariate attack model");
    atk.validate(s.dae.n_f);
    if (s.d_N != opts.d_N) throw ConfigError("stacked system degree differs from the design degree");
    if (j < 1 || j > 2 * s.d_N + 2) throw ConfigError("branch index out of range");
    if (!(gamma_start > 0.0) || !std::isfinite(gamma_start)) {
        throw InfeasibleError("gamma tuning needs a finite positive starting value");
    }
    const auto n = s.n_coeffs();
    const bool use_data = opts.mode == Mode::data_assisted;
    if (use_data && (Qbar.rows() != n || Qbar.cols() != n)) {
        throw DimensionError("Qbar must be " + std::to_string(n) + "x" + std::to_string(n));
    }

    FilterDesign out;
    out.kind = Kind::multivariate;
    out.mode = opts.mode;
    out.d_N = opts.d_N;
    out.p = opts.p;
    out.a = denominator(opts.d_N, opts.p);
    out.branch_j = j;
    out.branch_sign = branch_sign(j);
    out.coefficient_bound = opts.coefficient_bound;
    if (!(opts.coefficient_bound > 0.0)) throw ConfigError("coefficient bound must be positive");

    Vector best_z;
    if (!use_data) {
        // Pure mode: the LP_j vertex itself, gamma = gamma*_j.
        const auto sol = solve_lp_j(s, atk, j, opts.coefficient_bound);
        BranchReport rep;
        rep.j = j;
        rep.sign = branch_sign(j);
        rep.status = sol.status;
        rep.value = sol.optimal() ? -sol.objective : 0.0;
        rep.message = sol.message;
        rep.kkt = sol.residuals;
        out.branches.push_back(rep);
        if (!sol.optimal() || !(-sol.objective > 0.0)) {
            throw InfeasibleError("LP_" + std::to_string(j) + " has no detecting solution (" +
                                  opt::to_string(sol.status) + ")");
        }
        out.gamma = -sol.objective;
        out.Nbar = sol.x.head(n).transpose();
        out.lambda = sol.x.tail(atk.A.rows());
        out.objective = (Qbar.rows() == n) ? quad(out.Nbar, Qbar) : 0.0;
        return out;
    }
    auto probe = [&](double gamma) {
        const auto sol = solve_qp_j(s, Qbar, atk, j, gamma, opts.regularization);
        BranchReport rep;
        rep.j = j;
        rep.sign = branch_sign(j);
        rep.status = sol.status;
        rep.value = gamma;
        rep.message = sol.message;
        rep.kkt = sol.residuals;
        bool fits = false;
        if (sol.optimal()) {
            const double peak = sol.x.head(n).cwiseAbs().maxCoeff();
            fits = peak <= opts.coefficient_bound * (1.0 + opts.feasibility_tol);
            std::ostringstream os;
            os << "max|Nbar| = " << peak;
            rep.message = os.str();
        }
        out.branches.push_back(rep);
        if (fits) {
            best_z = sol.x;
            out.gamma = gamma;
        }
        return fits;
    };

    if (!probe(gamma_start)) {
        double lo = 0.0, hi = gamma_start;
        for (int it = 0; it < opts.bisection_iterations; ++it) {
            const double mid = 0.5 * (lo + hi);
            (probe(mid) ? lo : hi) = mid;
            if (hi - lo <= opts.bisection_tol * hi) break;
        }
    }
    if (best_z.size() == 0) {
        std::ostringstream os;
        os << "QP_" << j << " infeasible at every probed gamma in (0, " << gamma_start << "]";
        throw InfeasibleError(os.str());
    }
    out.Nbar = best_z.head(n).transpose();
    out.lambda = best_z.tail(atk.A.rows());
    out.objective = (Qbar.rows() == n) ? quad(out.Nbar, Qbar) : 0.0;
    return out;
}

Vector worst_case_alpha(const lti::StackedSystem& s, const FilterDesign& design, const AttackModel& atk, int j) {
    const RowVector c = branch_sign(j) * design.Nbar * attack_block(s, atk, branch_coeff(j));
    const auto sol = opt::solve_lp(c.transpose(), Matrix(0, atk.dims()), Vector(0), atk.A, atk.b);
    if (sol.status == opt::Status::unbounded) {
        throw NumericalError("worst-case attack LP is unbounded: the polytope recedes along a descent direction");
    }
    if (!sol.optimal()) throw NumericalError("worst-case attack LP failed: " + opt::to_string(sol.status));
    return sol.x;
}

double steady_state_residual(const lti::StackedSystem& s, const FilterDesign& design, const Vector& f) {
    const auto nf = s.dae.n_f;
    if (f.size() != nf) throw DimensionError("attack vector length differs from the model");
    const RowVector NF = design.Nbar * s.barF;
    RowVector gain = RowVector::Zero(nf);
    for (int i = 0; i <= s.d_N; ++i) gain += NF.segment(i * nf, nf);
    return -gain.dot(f) / design.a.sum();
}

double steady_state_margin(const lti::StackedSystem& s, const FilterDesign& design, const AttackModel& atk) {
    const auto nf = s.dae.n_f;
    const RowVector NF = design.Nbar * s.barF;
    RowVector gain = RowVector::Zero(nf);
    for (int i = 0; i <= s.d_N; ++i) gain += NF.segment(i * nf, nf);
    const Vector w = -(gain * atk.Fb).transpose() / design.a.sum();

    auto extreme = [&](double sign) {
        const auto sol = opt::solve_lp(sign * w, Matrix(0, atk.dims()), Vector(0), atk.A, atk.b);
        if (sol.status == opt::Status::unbounded) return -kInf;
        if (!sol.optimal()) throw NumericalError("steady-state margin LP failed: " + opt::to_string(sol.status));
        return sol.objective;
    };
    const double lo = extreme(1.0);    // min w'alpha
    const double hi = -extreme(-1.0);  // max w'alpha
    if (lo <= 0.0 && hi >= 0.0) return 0.0;
    return lo > 0.0 ? lo : -hi;
}

}  // namespace fdi::design
