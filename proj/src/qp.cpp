#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <vector>

#include "fdi/error.hpp"
#include "standard_form.hpp"

namespace fdi::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Orthonormal basis of range(Mt) and of its complement, Mt = M_F^T.
struct RangeSplit {
    Matrix Y;  // |F| x rank
    Matrix Z;  // |F| x (|F| - rank)
    Eigen::ColPivHouseholderQR<Matrix> qr;
};

RangeSplit split_range(const Matrix& Mt) {
    RangeSplit s;
    const auto nf = Mt.rows();
    if (Mt.cols() == 0) {
        s.Y.resize(nf, 0);
        s.Z = Matrix::Identity(nf, nf);
        return s;
    }
    s.qr.setThreshold(1e-11);
    s.qr.compute(Mt);
    const auto rank = s.qr.rank();
    const Matrix Q = s.qr.householderQ();
    s.Y = Q.leftCols(rank);
    s.Z = Q.rightCols(nf - rank);
    return s;
}

}  // namespace

// Primal active-set method on the bounded standard form. The working set is a
// set of variables pinned at one of their bounds; the row constraints are
// always enforced through a nullspace basis of the free columns.
Solution solve_qp(QpProblem problem, const SolverOptions& opts) {
    problem.normalize();
    if (problem.P.cwiseAbs().maxCoeff() == 0.0) return solve_lp(std::move(problem), opts);

    const auto sf = detail::to_standard_form(problem);
    const auto n = sf.n();
    const auto ns = sf.n_struct;

    Solution sol;
    auto start = detail::run_simplex(sf, opts, false);
    sol.iterations = start.iterations;
    if (start.status != Status::optimal) {
        sol.status = start.status;
        sol.message = start.message;
        return sol;
    }

    Matrix P = Matrix::Zero(n, n);
    P.topLeftCorner(ns, ns) = problem.P;
    Vector z = start.z;

    std::vector<signed char> pinned(static_cast<std::size_t>(n), 0);  // -1 lower, +1 upper
    for (Eigen::Index j = 0; j < n; ++j) {
        const double tol = opts.feasibility_tol * (1.0 + std::abs(z(j)));
        if (sf.lo(j) == sf.hi(j)) {
            pinned[static_cast<std::size_t>(j)] = -1;
            z(j) = sf.lo(j);
        } else if (std::isfinite(sf.lo(j)) && z(j) - sf.lo(j) <= tol) {
            pinned[static_cast<std::size_t>(j)] = -1;
            z(j) = sf.lo(j);
        } else if (std::isfinite(sf.hi(j)) && sf.hi(j) - z(j) <= tol) {
            pinned[static_cast<std::size_t>(j)] = 1;
            z(j) = sf.hi(j);
        }
    }

    const int limit = opts.max_iterations;
    // Set after an unblocked Newton step: z is then the subspace minimizer and
    // recomputing the step would only chase round-off.
    bool at_minimizer = false;
    for (int it = 0;; ++it) {
        if (it >= limit) {
            sol.status = Status::failure;
            sol.message = "active-set iteration limit";
            return sol;
        }
        ++sol.iterations;

        std::vector<Eigen::Index> freev, fixedv;
        for (Eigen::Index j = 0; j < n; ++j) {
            (pinned[static_cast<std::size_t>(j)] ? fixedv : freev).push_back(j);
        }
        const auto nf = static_cast<Eigen::Index>(freev.size());
        const Vector g = P * z + sf.cost;

        Matrix Mt(nf, sf.m());
        Vector gF(nf);
        for (Eigen::Index k = 0; k < nf; ++k) {
            Mt.row(k) = sf.M.col(freev[static_cast<std::size_t>(k)]).transpose();
            gF(k) = g(freev[static_cast<std::size_t>(k)]);
        }
        const auto split = split_range(Mt);
        const Matrix& Z = split.Z;

        Vector p = Vector::Zero(nf);
        bool ray = false;
        if (Z.cols() > 0) {
            Matrix PF(nf, nf);
            for (Eigen::Index a = 0; a < nf; ++a) {
                for (Eigen::Index b = 0; b < nf; ++b) {
                    PF(a, b) = P(freev[static_cast<std::size_t>(a)], freev[static_cast<std::size_t>(b)]);
                }
            }
            const Matrix Hr = Z.transpose() * PF * Z;
            const Vector gr = Z.transpose() * gF;
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Hr + Hr.transpose()));
            const Vector& lam = es.eigenvalues();
            const Matrix& V = es.eigenvectors();
            const double lam_max = std::max(lam.cwiseAbs().maxCoeff(), 0.0);
            const double curv_tol = std::max(1e-13 * lam_max, 1e-300);
            const Vector gv = V.transpose() * gr;
            const double grad_tol = opts.optimality_tol * (1.0 + g.cwiseAbs().maxCoeff());

            Vector w = Vector::Zero(lam.size());
            for (Eigen::Index i = 0; i < lam.size(); ++i) {
                if (lam(i) <= curv_tol && std::abs(gv(i)) > grad_tol) ray = true;
            }
            if (ray) {
                for (Eigen::Index i = 0; i < lam.size(); ++i) {
                    if (lam(i) <= curv_tol) w(i) = -gv(i);
                }
            } else {
                for (Eigen::Index i = 0; i < lam.size(); ++i) {
                    if (lam(i) > curv_tol) w(i) = -gv(i) / lam(i);
                }
            }
            p = Z * (V * w);
        }

        const double step_floor = 1e-13 * (1.0 + z.cwiseAbs().maxCoeff());
        if (!ray && (at_minimizer || p.cwiseAbs().maxCoeff() <= step_floor)) {
            // Subspace minimizer: row multipliers by least squares on M_F^T y = g_F.
            Vector y = Vector::Zero(sf.m());
            if (sf.m() > 0 && nf > 0) y = split.qr.solve(gF);
            Eigen::Index release = -1;
            double worst = opts.optimality_tol * (1.0 + g.cwiseAbs().maxCoeff());
            for (auto j : fixedv) {
                if (sf.lo(j) == sf.hi(j)) continue;
                const double mu = g(j) - sf.M.col(j).dot(y);
                const double viol = pinned[static_cast<std::size_t>(j)] < 0 ? -mu : mu;
                if (viol > worst) {
                    worst = viol;
                    release = j;
                }
            }
            if (release < 0) {
                Vector mu = Vector::Zero(n);
                for (auto j : fixedv) mu(j) = g(j) - sf.M.col(j).dot(y);
                const auto iters = sol.iterations;
                sol = detail::unpack(problem, sf, z, y, mu);
                sol.status = Status::optimal;
                sol.iterations = iters;
                sol.residuals = kkt_residuals(problem, sol, false);
                return sol;
            }
            pinned[static_cast<std::size_t>(release)] = 0;
            at_minimizer = false;
            continue;
        }

        // Ratio test along p over the free variables.
        double t = ray ? kInf : 1.0;
        Eigen::Index block = -1;
        signed char block_side = 0;
        for (Eigen::Index k = 0; k < nf; ++k) {
            const auto j = freev[static_cast<std::size_t>(k)];
            if (p(k) < -1e-15 && std::isfinite(sf.lo(j))) {
                const double tk = std::max(0.0, (sf.lo(j) - z(j)) / p(k));
                if (tk < t) {
                    t = tk;
                    block = j;
                    block_side = -1;
                }
            } else if (p(k) > 1e-15 && std::isfinite(sf.hi(j))) {
                const double tk = std::max(0.0, (sf.hi(j) - z(j)) / p(k));
                if (tk < t) {
                    t = tk;
                    block = j;
                    block_side = 1;
                }
            }
        }
        if (!std::isfinite(t)) {
            sol.status = Status::unbounded;
            sol.message = "objective unbounded along a zero-curvature direction";
            return sol;
        }
        for (Eigen::Index k = 0; k < nf; ++k) z(freev[static_cast<std::size_t>(k)]) += t * p(k);
        if (block >= 0) {
            pinned[static_cast<std::size_t>(block)] = block_side;
            z(block) = block_side < 0 ? sf.lo(block) : sf.hi(block);
        }
        at_minimizer = !ray && block < 0;
    }
}

}  // namespace fdi::opt
