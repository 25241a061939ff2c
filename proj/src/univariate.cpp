#include <cmath>
#include <sstream>

#include "fdi/design.hpp"
#include "fdi/error.hpp"

namespace fdi::design {

namespace {

double quad(const RowVector& x, const Matrix& Q) { return Q.size() ? (x * Q * x.transpose())(0, 0) : 0.0; }

}  // namespace

FilterDesign design_univariate(const lti::StackedSystem& stacked, const Matrix& Qbar, const DesignOptions& opts) {
    const auto& dae = stacked.dae;
    if (dae.n_f != 1) throw DimensionError("design_univariate needs exactly one attack channel");
    if (stacked.d_N != opts.d_N) throw ConfigError("stacked system degree differs from the design degree");
    const auto n = stacked.n_coeffs();
    const bool use_data = opts.mode == Mode::data_assisted;
    if (use_data && (Qbar.rows() != n || Qbar.cols() != n)) {
        throw DimensionError("Qbar must be " + std::to_string(n) + "x" + std::to_string(n));
    }

    FilterDesign out;
    out.kind = Kind::univariate;
    out.mode = opts.mode;
    out.d_N = opts.d_N;
    out.p = opts.p;
    out.a = denominator(opts.d_N, opts.p);
    out.track_steady_state = opts.track_steady_state;
    const double a1 = out.a.sum();

    opt::QpProblem base;
    base.P = 2.0 * opts.regularization * Matrix::Identity(n, n);
    if (use_data) base.P += 2.0 * Qbar;
    base.P = 0.5 * (base.P + base.P.transpose());
    base.c = Vector::Zero(n);
    const Matrix HT = stacked.barH.transpose();
    if (opts.track_steady_state) {
        base.Aeq.resize(HT.rows() + 1, n);
        base.Aeq << HT, stacked.barF.rowwise().sum().transpose();
        base.beq = Vector::Zero(HT.rows() + 1);
        base.beq(HT.rows()) = -a1;
    } else {
        base.Aeq = HT;
        base.beq = Vector::Zero(HT.rows());
    }

    const bool both_signs = opts.track_steady_state || !opts.symmetric_shortcut;
    double best = std::numeric_limits<double>::infinity();
    Vector best_x;
    for (int j = 0; j <= opts.d_N; ++j) {
        for (int sign : {1, -1}) {
            if (sign < 0 && !both_signs) continue;
            opt::QpProblem qp = base;
            qp.Aineq = sign * stacked.barF.col(j).transpose();
            qp.bineq = Vector::Ones(1);
            // Pure mode: a feasibility LP per branch (zero cost, simplex vertex).
            const auto sol = use_data ? opt::solve_qp(qp) : opt::solve_lp(qp);
            BranchReport rep;
            rep.j = j;
            rep.sign = sign;
            rep.status = sol.status;
            rep.message = sol.message;
            rep.kkt = sol.residuals;
            if (sol.optimal()) {
                const double reg = use_data ? 0.5 * sol.x.dot(base.P * sol.x) : 0.0;
                rep.value = use_data ? quad(sol.x.transpose(), Qbar) : 0.0;
                // Strict improvement keeps the lowest j, positive sign first, on ties.
                if (reg < best - 1e-12 * (1.0 + std::abs(best)) || best_x.size() == 0) {
                    best = reg;
                    best_x = sol.x;
                    out.branch_j = j;
                    out.branch_sign = sign;
                }
            }
            out.branches.push_back(rep);
        }
    }
    if (best_x.size() == 0) {
        std::ostringstream os;
        os << "no univariate filter exists:";
        for (const auto& b : out.branches) os << " [j=" << b.j << (b.sign > 0 ? "+" : "-") << ' ' << opt::to_string(b.status) << ']';
        throw InfeasibleError(os.str());
    }
    out.Nbar = best_x.transpose();

    if (!opts.track_steady_state) {
        // Sign-canonical: first nonzero entry of Nbar barF positive.
        const RowVector nf = out.Nbar * stacked.barF;
        for (Eigen::Index i = 0; i < nf.size(); ++i) {
            if (std::abs(nf(i)) > 1e-12) {
                if (nf(i) < 0.0) {
                    out.Nbar = -out.Nbar;
                    out.branch_sign = -out.branch_sign;
                }
                break;
            }
        }
    }
    out.objective = (Qbar.rows() == n) ? quad(out.Nbar, Qbar) : 0.0;
    return out;
}

}  // namespace fdi::design
