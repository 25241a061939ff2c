#pragma once

#include <iosfwd>
#include <string>

#include "fdi/types.hpp"

namespace fdi::opt {

/// minimize 0.5 x'Px + c'x
/// s.t.     Aeq x = beq,  Aineq x >= bineq,  lower <= x <= upper.
///
/// Empty bound vectors mean "free". Either constraint block may have zero rows.
struct QpProblem {
    Matrix P;
    Vector c;
    Matrix Aeq;
    Vector beq;
    Matrix Aineq;
    Vector bineq;
    Vector lower;
    Vector upper;

    Eigen::Index n() const { return c.size(); }

    /// Fills empty blocks with correctly shaped zero-row matrices and infinite
    /// bounds, then checks every shape. Throws DimensionError.
    void normalize();
};

enum class Status { optimal, infeasible, unbounded, failure };

std::string to_string(Status s);

struct KktResiduals {
    double primal = 0.0;         // max equality / inequality / bound violation
    double stationarity = 0.0;   // |Px + c - Aeq'y - Aineq'z - mu|_inf, scaled
    double complementarity = 0.0;
    double duality_gap = 0.0;    // |primal objective - dual objective|, scaled (LP only)
};

struct Solution {
    Status status = Status::failure;
    Vector x;
    double objective = 0.0;
    Vector eq_dual;     // multipliers of Aeq rows
    Vector ineq_dual;   // multipliers of Aineq rows, >= 0
    Vector bound_dual;  // > 0 at an active lower bound, < 0 at an active upper bound
    int iterations = 0;
    KktResiduals residuals;
    std::string message;

    bool optimal() const { return status == Status::optimal; }
};

struct SolverOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-10;
    int max_iterations = 20000;
};

/// Two-phase bounded-variable revised simplex. P is ignored.
Solution solve_lp(QpProblem problem, const SolverOptions& opts = {});

/// Convenience overload with free variables.
Solution solve_lp(const Vector& c, const Matrix& Aeq, const Vector& beq, const Matrix& Aineq,
                  const Vector& bineq, const SolverOptions& opts = {});

/// Convex QP (P symmetric PSD). Feasibility is settled by a simplex phase one,
/// then a primal active-set method on the bound constraints runs from that
/// vertex. Falls back to solve_lp when P is identically zero.
Solution solve_qp(QpProblem problem, const SolverOptions& opts = {});

/// Phase one only: true iff the constraint set is nonempty.
bool is_feasible(QpProblem problem, const SolverOptions& opts = {});

/// Residuals of the KKT conditions at (x, duals), independent of how the
/// solution was produced. Stationarity and gap are divided by
/// 1 + max(|c|_inf, |Px|_inf).
KktResiduals kkt_residuals(const QpProblem& problem, const Solution& sol, bool linear);

/// Text dump: dimensions line "n m_eq m_ineq", then P, c, Aeq, beq, Aineq,
/// bineq, lower, upper as "# rows cols" CSV blocks.
void dump_problem(std::ostream& os, const QpProblem& problem);
QpProblem read_problem(std::istream& is);

}  // namespace fdi::opt
