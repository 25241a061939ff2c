#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "fdi/error.hpp"
#include "fdi/matrix_io.hpp"
#include "fdi/opt.hpp"

namespace fdi::opt {

namespace {

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

KktResiduals kkt_residuals(const QpProblem& p, const Solution& s, bool linear) {
    KktResiduals r;
    const Vector& x = s.x;

    double primal = 0.0;
    if (p.Aeq.rows()) primal = std::max(primal, inf_norm(p.Aeq * x - p.beq));
    Vector slack = p.Aineq.rows() ? Vector(p.Aineq * x - p.bineq) : Vector();
    for (Eigen::Index i = 0; i < slack.size(); ++i) primal = std::max(primal, -slack(i));
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        primal = std::max(primal, p.lower(j) - x(j));
        primal = std::max(primal, x(j) - p.upper(j));
    }
    r.primal = primal;

    const Vector Px = linear ? Vector::Zero(x.size()) : Vector(p.P * x);
    const double scale = 1.0 + std::max(inf_norm(p.c), inf_norm(Px));
    Vector grad = Px + p.c;
    if (p.Aeq.rows()) grad -= p.Aeq.transpose() * s.eq_dual;
    if (p.Aineq.rows()) grad -= p.Aineq.transpose() * s.ineq_dual;
    grad -= s.bound_dual;
    r.stationarity = inf_norm(grad) / scale;

    double comp = 0.0;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
        comp = std::max(comp, std::max(0.0, -s.ineq_dual(i)));  // dual sign
        comp = std::max(comp, std::abs(s.ineq_dual(i) * slack(i)));
    }
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double mu = s.bound_dual(j);
        if (mu > 0.0) {
            const double gap = x(j) - p.lower(j);
            comp = std::max(comp, std::isfinite(gap) ? mu * gap : (mu > 1e-12 ? mu : 0.0));
        } else if (mu < 0.0) {
            const double gap = p.upper(j) - x(j);
            comp = std::max(comp, std::isfinite(gap) ? -mu * gap : (mu < -1e-12 ? -mu : 0.0));
        }
    }
    r.complementarity = comp / scale;

    if (linear) {
        double dual_obj = 0.0;
        if (p.Aeq.rows()) dual_obj += p.beq.dot(s.eq_dual);
        if (p.Aineq.rows()) dual_obj += p.bineq.dot(s.ineq_dual);
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double mu = s.bound_dual(j);
            if (mu > 0.0 && std::isfinite(p.lower(j))) dual_obj += mu * p.lower(j);
            if (mu < 0.0 && std::isfinite(p.upper(j))) dual_obj += mu * p.upper(j);
        }
        const double primal_obj = p.c.dot(x);
        r.duality_gap = std::abs(primal_obj - dual_obj) / (1.0 + std::abs(primal_obj));
    }
    return r;
}

void dump_problem(std::ostream& os, const QpProblem& p) {
    os << p.n() << ' ' << p.Aeq.rows() << ' ' << p.Aineq.rows() << '\n';
    io::write_matrix_csv(os, p.P);
    io::write_matrix_csv(os, p.c);
    io::write_matrix_csv(os, p.Aeq);
    io::write_matrix_csv(os, p.beq);
    io::write_matrix_csv(os, p.Aineq);
    io::write_matrix_csv(os, p.bineq);
    io::write_matrix_csv(os, p.lower);
    io::write_matrix_csv(os, p.upper);
}

QpProblem read_problem(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty problem dump");
    std::istringstream hs(line);
    Eigen::Index n = 0, meq = 0, min = 0;
    hs >> n >> meq >> min;
    if (!hs) throw ConfigError("malformed problem dump header");
    QpProblem p;
    p.P = io::read_matrix_csv(is);
    p.c = io::read_matrix_csv(is);
    p.Aeq = io::read_matrix_csv(is);
    p.beq = io::read_matrix_csv(is);
    p.Aineq = io::read_matrix_csv(is);
    p.bineq = io::read_matrix_csv(is);
    p.lower = io::read_matrix_csv(is);
    p.upper = io::read_matrix_csv(is);
    if (p.n() != n || p.Aeq.rows() != meq || p.Aineq.rows() != min) {
        throw ConfigError("problem dump dimensions disagree with its header");
    }
    return p;
}

}  // namespace fdi::opt
