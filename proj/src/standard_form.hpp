#pragma once

// Internal: the bounded standard form shared by the LP and QP solvers.
//
//   [Aeq  0] [x]   [beq  ]
//   [Aineq -I] [s] = [bineq],   lower <= x <= upper,  s >= 0

#include <vector>

#include "fdi/opt.hpp"

namespace fdi::opt::detail {

struct StandardForm {
    Matrix M;
    Vector rhs;
    Vector lo, hi;
    Vector cost;
    Eigen::Index n_struct = 0;
    Eigen::Index m_eq = 0;
    Eigen::Index m_in = 0;

    Eigen::Index n() const { return cost.size(); }
    Eigen::Index m() const { return rhs.size(); }
};

StandardForm to_standard_form(const QpProblem& p);

enum class VarState : unsigned char { basic, at_lower, at_upper, free_zero };

struct SimplexResult {
    Status status = Status::failure;
    Vector z;        // standard-form point (structural + slack)
    Vector y;        // row multipliers
    Vector reduced;  // reduced costs of standard-form variables
    std::vector<VarState> state;
    int iterations = 0;
    std::string message;
};

/// Phase one then (optionally) phase two. With phase_two=false the result is
/// a feasible vertex, status optimal, or an infeasibility verdict.
SimplexResult run_simplex(const StandardForm& sf, const SolverOptions& opts, bool phase_two);

/// Builds a Solution for the original problem from a standard-form point.
Solution unpack(const QpProblem& p, const StandardForm& sf, const Vector& z, const Vector& y,
                const Vector& reduced);

}  // namespace fdi::opt::detail
