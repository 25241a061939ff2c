#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "fdi/error.hpp"
#include "standard_form.hpp"

namespace fdi::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void fill_block(Matrix& A, Vector& b, Eigen::Index n, const char* name) {
    if (A.size() == 0 && b.size() == 0) {
        A.resize(0, n);
        b.resize(0);
        return;
    }
    if (A.cols() != n) throw DimensionError(std::string(name) + " has the wrong column count");
    if (A.rows() != b.size()) throw DimensionError(std::string(name) + " rows and rhs length differ");
}

}  // namespace

std::string to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::failure: return "failure";
    }
    return "failure";
}

void QpProblem::normalize() {
    const auto nv = c.size();
    if (P.size() == 0) P = Matrix::Zero(nv, nv);
    if (P.rows() != nv || P.cols() != nv) throw DimensionError("P must be n x n");
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ConfigError("QP cost matrix is not symmetric");
    }
    P = 0.5 * (P + P.transpose());
    fill_block(Aeq, beq, nv, "Aeq");
    fill_block(Aineq, bineq, nv, "Aineq");
    if (lower.size() == 0) lower = Vector::Constant(nv, -kInf);
    if (upper.size() == 0) upper = Vector::Constant(nv, kInf);
    if (lower.size() != nv || upper.size() != nv) throw DimensionError("bound vectors must have length n");
    for (Eigen::Index j = 0; j < nv; ++j) {
        if (lower(j) > upper(j)) throw ConfigError("lower bound exceeds upper bound");
    }
    if (!P.allFinite() || !c.allFinite() || !Aeq.allFinite() || !beq.allFinite() || !Aineq.allFinite() ||
        !bineq.allFinite()) {
        throw ConfigError("problem data contains non-finite entries");
    }
}

namespace detail {

StandardForm to_standard_form(const QpProblem& p) {
    StandardForm sf;
    sf.n_struct = p.n();
    sf.m_eq = p.Aeq.rows();
    sf.m_in = p.Aineq.rows();
    const auto n = sf.n_struct + sf.m_in;
    const auto m = sf.m_eq + sf.m_in;
    sf.M = Matrix::Zero(m, n);
    sf.M.topLeftCorner(sf.m_eq, sf.n_struct) = p.Aeq;
    sf.M.bottomLeftCorner(sf.m_in, sf.n_struct) = p.Aineq;
    sf.M.bottomRightCorner(sf.m_in, sf.m_in) = -Matrix::Identity(sf.m_in, sf.m_in);
    sf.rhs.resize(m);
    sf.rhs << p.beq, p.bineq;
    sf.lo.resize(n);
    sf.hi.resize(n);
    sf.lo << p.lower, Vector::Zero(sf.m_in);
    sf.hi << p.upper, Vector::Constant(sf.m_in, kInf);
    sf.cost = Vector::Zero(n);
    sf.cost.head(sf.n_struct) = p.c;
    return sf;
}

namespace {

// Dense revised simplex over [M | artificials] with bounded variables.
class Simplex {
   public:
    Simplex(const Matrix& M, const Vector& rhs, Vector lo, Vector hi, const SolverOptions& opts)
        : M_(M), rhs_(rhs), lo_(std::move(lo)), hi_(std::move(hi)), opts_(opts) {}

    Matrix& matrix() { return M_; }
    Vector& lo() { return lo_; }
    Vector& hi() { return hi_; }
    Vector& x() { return x_; }
    std::vector<VarState>& state() { return state_; }
    std::vector<Eigen::Index>& head() { return head_; }
    const Vector& y() const { return y_; }
    const Vector& reduced() const { return d_; }
    int iterations() const { return iterations_; }

    Status optimize(const Vector& cost) {
        const auto m = M_.rows();
        const auto n = M_.cols();
        int degenerate_run = 0;
        for (;;) {
            if (iterations_ >= opts_.max_iterations) return Status::failure;

            Eigen::PartialPivLU<Matrix> lu;
            if (m > 0) {
                Matrix B(m, m);
                for (Eigen::Index i = 0; i < m; ++i) B.col(i) = M_.col(head_[static_cast<std::size_t>(i)]);
                lu.compute(B);
            }
            refresh_basic(lu);

            Vector cB(m);
            for (Eigen::Index i = 0; i < m; ++i) cB(i) = cost(head_[static_cast<std::size_t>(i)]);
            y_ = m > 0 ? Vector(lu.transpose().solve(cB)) : Vector();
            d_ = cost;
            if (m > 0) d_.noalias() -= M_.transpose() * y_;

            const bool bland = degenerate_run > 50;
            Eigen::Index q = -1;
            double best = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto s = state_[static_cast<std::size_t>(j)];
                if (s == VarState::basic || lo_(j) == hi_(j)) continue;
                double score = 0.0;
                if (s == VarState::at_lower && d_(j) < -opts_.optimality_tol) score = -d_(j);
                else if (s == VarState::at_upper && d_(j) > opts_.optimality_tol) score = d_(j);
                else if (s == VarState::free_zero && std::abs(d_(j)) > opts_.optimality_tol) score = std::abs(d_(j));
                if (score <= 0.0) continue;
                if (bland) {
                    q = j;
                    break;
                }
                if (score > best) {
                    best = score;
                    q = j;
                }
            }
            if (q < 0) return Status::optimal;
            ++iterations_;

            const double dir = d_(q) < 0.0 ? 1.0 : -1.0;
            const Vector alpha = m > 0 ? Vector(lu.solve(M_.col(q))) : Vector();

            // Harris two-pass ratio test. x_B(i) changes by -t * dir * alpha(i).
            double t_relaxed = kInf;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double a = dir * alpha(i);
                const auto bi = head_[static_cast<std::size_t>(i)];
                if (a > opts_.pivot_tol && std::isfinite(lo_(bi))) {
                    t_relaxed = std::min(t_relaxed, (x_(bi) - lo_(bi) + opts_.feasibility_tol) / a);
                } else if (a < -opts_.pivot_tol && std::isfinite(hi_(bi))) {
                    t_relaxed = std::min(t_relaxed, (hi_(bi) - x_(bi) + opts_.feasibility_tol) / -a);
                }
            }
            Eigen::Index leave = -1;
            double t_step = kInf;
            double best_pivot = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double a = dir * alpha(i);
                const auto bi = head_[static_cast<std::size_t>(i)];
                double t = kInf;
                if (a > opts_.pivot_tol && std::isfinite(lo_(bi))) t = (x_(bi) - lo_(bi)) / a;
                else if (a < -opts_.pivot_tol && std::isfinite(hi_(bi))) t = (hi_(bi) - x_(bi)) / -a;
                else continue;
                if (t <= t_relaxed && std::abs(a) > best_pivot) {
                    best_pivot = std::abs(a);
                    leave = i;
                    t_step = std::max(t, 0.0);
                }
            }

            const double range = hi_(q) - lo_(q);
            const bool can_flip = std::isfinite(range) && state_[static_cast<std::size_t>(q)] != VarState::free_zero;
            if (leave < 0 && !can_flip) return Status::unbounded;

            if (can_flip && range <= t_step) {
                state_[static_cast<std::size_t>(q)] =
                    dir > 0 ? VarState::at_upper : VarState::at_lower;
                x_(q) = dir > 0 ? hi_(q) : lo_(q);
                degenerate_run = 0;
                continue;
            }

            x_(q) += dir * t_step;
            const auto out = head_[static_cast<std::size_t>(leave)];
            const double a_out = dir * alpha(leave);
            if (a_out > 0) {
                state_[static_cast<std::size_t>(out)] = VarState::at_lower;
                x_(out) = lo_(out);
            } else {
                state_[static_cast<std::size_t>(out)] = VarState::at_upper;
                x_(out) = hi_(out);
            }
            head_[static_cast<std::size_t>(leave)] = q;
            state_[static_cast<std::size_t>(q)] = VarState::basic;
            degenerate_run = t_step < 1e-12 ? degenerate_run + 1 : 0;
        }
    }

    void refresh_basic(const Eigen::PartialPivLU<Matrix>& lu) {
        const auto m = M_.rows();
        if (m == 0) return;
        Vector r = rhs_;
        for (Eigen::Index j = 0; j < M_.cols(); ++j) {
            if (state_[static_cast<std::size_t>(j)] != VarState::basic && x_(j) != 0.0) r -= M_.col(j) * x_(j);
        }
        const Vector xb = lu.solve(r);
        for (Eigen::Index i = 0; i < m; ++i) x_(head_[static_cast<std::size_t>(i)]) = xb(i);
    }

   private:
    Matrix M_;
    Vector rhs_;
    Vector lo_, hi_;
    Vector x_;
    Vector y_, d_;
    std::vector<VarState> state_;
    std::vector<Eigen::Index> head_;
    SolverOptions opts_;
    int iterations_ = 0;
};

}  // namespace

SimplexResult run_simplex(const StandardForm& sf, const SolverOptions& opts, bool phase_two) {
    const auto m = sf.m();
    const auto n = sf.n();

    // Nonbasic structural variables start at a finite bound (or zero when free);
    // one artificial per row absorbs the residual.
    Vector x0 = Vector::Zero(n);
    std::vector<VarState> state(static_cast<std::size_t>(n + m));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(sf.lo(j))) {
            x0(j) = sf.lo(j);
            state[static_cast<std::size_t>(j)] = VarState::at_lower;
        } else if (std::isfinite(sf.hi(j))) {
            x0(j) = sf.hi(j);
            state[static_cast<std::size_t>(j)] = VarState::at_upper;
        } else {
            state[static_cast<std::size_t>(j)] = VarState::free_zero;
        }
    }
    const Vector residual = sf.rhs - sf.M * x0;

    Matrix Mx(m, n + m);
    Mx.leftCols(n) = sf.M;
    Mx.rightCols(m).setZero();
    Vector lo(n + m), hi(n + m), x(n + m);
    lo << sf.lo, Vector::Zero(m);
    hi << sf.hi, Vector::Constant(m, kInf);
    x << x0, residual.cwiseAbs();
    std::vector<Eigen::Index> head(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        Mx(i, n + i) = residual(i) >= 0.0 ? 1.0 : -1.0;
        head[static_cast<std::size_t>(i)] = n + i;
        state[static_cast<std::size_t>(n + i)] = VarState::basic;
    }

    Simplex sx(Mx, sf.rhs, lo, hi, opts);
    sx.x() = x;
    sx.state() = state;
    sx.head() = head;

    SimplexResult res;
    Vector phase1_cost = Vector::Zero(n + m);
    phase1_cost.tail(m).setOnes();
    Status st = sx.optimize(phase1_cost);
    res.iterations = sx.iterations();
    if (st != Status::optimal) {
        res.status = Status::failure;
        res.message = "phase one did not terminate";
        return res;
    }
    const double infeas = sx.x().tail(m).sum();
    const double scale = 1.0 + (m > 0 ? sf.rhs.cwiseAbs().maxCoeff() : 0.0);
    if (infeas > 1e2 * opts.feasibility_tol * scale) {
        res.status = Status::infeasible;
        res.message = "phase one optimum " + std::to_string(infeas) + " > 0";
        return res;
    }
    // Artificials are pinned to zero from here on; basic ones on redundant rows stay.
    for (Eigen::Index i = 0; i < m; ++i) sx.hi()(n + i) = 0.0;

    if (phase_two) {
        Vector cost = Vector::Zero(n + m);
        cost.head(n) = sf.cost;
        st = sx.optimize(cost);
        res.iterations = sx.iterations();
        if (st != Status::optimal) {
            res.status = st;
            res.message = st == Status::unbounded ? "objective unbounded below" : "iteration limit";
            return res;
        }
        res.y = sx.y();
        res.reduced = sx.reduced().head(n);
    } else {
        res.y = Vector::Zero(m);
        res.reduced = Vector::Zero(n);
    }
    res.status = Status::optimal;
    res.z = sx.x().head(n);
    res.state.assign(sx.state().begin(), sx.state().begin() + n);
    return res;
}

Solution unpack(const QpProblem& p, const StandardForm& sf, const Vector& z, const Vector& y,
                const Vector& reduced) {
    Solution s;
    s.x = z.head(sf.n_struct);
    s.eq_dual = y.head(sf.m_eq);
    s.ineq_dual = y.tail(sf.m_in);
    s.bound_dual = reduced.head(sf.n_struct);
    s.objective = 0.5 * s.x.dot(p.P * s.x) + p.c.dot(s.x);
    return s;
}

}  // namespace detail

Solution solve_lp(QpProblem problem, const SolverOptions& opts) {
    problem.normalize();
    const auto sf = detail::to_standard_form(problem);
    auto r = detail::run_simplex(sf, opts, true);
    Solution sol;
    if (r.status != Status::optimal) {
        sol.status = r.status;
        sol.iterations = r.iterations;
        sol.message = r.message;
        return sol;
    }
    Vector reduced = r.reduced;
    for (Eigen::Index j = 0; j < reduced.size(); ++j) {
        if (r.state[static_cast<std::size_t>(j)] == detail::VarState::basic) reduced(j) = 0.0;
    }
    sol = detail::unpack(problem, sf, r.z, r.y, reduced);
    sol.status = Status::optimal;
    sol.iterations = r.iterations;
    sol.residuals = kkt_residuals(problem, sol, true);
    return sol;
}

Solution solve_lp(const Vector& c, const Matrix& Aeq, const Vector& beq, const Matrix& Aineq,
                  const Vector& bineq, const SolverOptions& opts) {
    QpProblem p;
    p.c = c;
    p.Aeq = Aeq;
    p.beq = beq;
    p.Aineq = Aineq;
    p.bineq = bineq;
    return solve_lp(std::move(p), opts);
}

bool is_feasible(QpProblem problem, const SolverOptions& opts) {
    problem.normalize();
    const auto sf = detail::to_standard_form(problem);
    const auto r = detail::run_simplex(sf, opts, false);
    if (r.status == Status::failure) throw NumericalError("phase one failed: " + r.message);
    return r.status == Status::optimal;
}

}  // namespace fdi::opt
