#include "fdi/agc.hpp"

#include <cmath>
#include <string>

#include "fdi/error.hpp"

namespace fdi::agc {

void AreaParams::validate() const {
    const std::string who = name.empty() ? std::string("area") : name;
    if (!(H > 0.0)) throw ConfigError(who + ": inertia H must be positive");
    if (!(D >= 0.0)) throw ConfigError(who + ": damping D must be nonnegative");
    if (generators.empty()) throw ConfigError(who + ": at least one AGC generator is required");
    double phi_sum = 0.0;
    for (const auto& g : generators) {
        if (!(g.T_ch > 0.0)) throw ConfigError(who + ": T_ch must be positive");
        if (!(g.S > 0.0)) throw ConfigError(who + ": droop S must be positive");
        phi_sum += g.phi;
    }
    if (std::abs(phi_sum - 1.0) > 1e-9) throw ConfigError(who + ": participation factors must sum to one");
    for (const auto& nb : neighbors) {
        if (!(nb.T > 0.0)) throw ConfigError(who + ": synchronizing coefficient must be positive");
    }
}

AreaMatrices build_area(const AreaParams& p) {
    p.validate();
    AreaLayout l;
    l.n_ties = static_cast<int>(p.neighbors.size());
    l.n_gens = static_cast<int>(p.generators.size());
    const auto n = l.n_states();

    AreaMatrices m;
    m.A_ii = Matrix::Zero(n, n);
    const double inv2H = 1.0 / (2.0 * p.H);
    for (int k = 0; k < l.n_ties; ++k) {
        m.A_ii(l.tie(k), l.omega()) = p.neighbors[static_cast<std::size_t>(k)].T;
        m.A_ii(l.omega(), l.tie(k)) = -inv2H;
        m.A_ii(l.agc(), l.tie(k)) = -p.K_I;
    }
    m.A_ii(l.omega(), l.omega()) = -p.D * inv2H;
    for (int g = 0; g < l.n_gens; ++g) {
        const auto& gen = p.generators[static_cast<std::size_t>(g)];
        m.A_ii(l.omega(), l.pm(g)) = inv2H;
        m.A_ii(l.pm(g), l.omega()) = -1.0 / (gen.T_ch * gen.S);
        m.A_ii(l.pm(g), l.pm(g)) = -1.0 / gen.T_ch;
        m.A_ii(l.pm(g), l.agc()) = gen.phi / gen.T_ch;
    }
    m.A_ii(l.agc(), l.omega()) = -p.K_I * p.beta;

    m.B_id = Matrix::Zero(n, 1);
    m.B_id(l.omega(), 0) = -inv2H;

    m.C_i = Matrix::Zero(l.n_outputs(), n);
    m.C_i.topLeftCorner(n, n).setIdentity();
    for (int k = 0; k < l.n_ties; ++k) m.C_i(n, l.tie(k)) = 1.0;
    for (int g = 0; g < l.n_gens; ++g) m.C_i(n + 1, l.pm(g)) = 1.0;
    return m;
}

double AgcSystem::ace_gain(const AttackChannel& ch) const {
    if (ch.ace_gain >= 0.0) return ch.ace_gain;
    return ch.kind == ChannelKind::tie ? areas[static_cast<std::size_t>(ch.area)].K_I : 0.0;
}

int AgcSystem::tie_index(int area, int neighbor) const {
    const auto& nbs = areas[static_cast<std::size_t>(area)].neighbors;
    for (std::size_t k = 0; k < nbs.size(); ++k) {
        if (nbs[k].area == neighbor) return static_cast<int>(k);
    }
    return -1;
}

Eigen::Index AgcSystem::output_row(const AttackChannel& ch) const {
    const auto& l = layout[static_cast<std::size_t>(ch.area)];
    if (ch.kind == ChannelKind::tie_total) return l.tie_total_out();
    return l.tie_out(tie_index(ch.area, ch.neighbor));
}

std::vector<std::string> AgcSystem::output_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < areas.size(); ++i) {
        const auto a = std::to_string(i + 1);
        for (const auto& nb : areas[i].neighbors) names.push_back("Ptie_" + a + "_" + std::to_string(nb.area + 1));
        names.push_back("dw_" + a);
        for (std::size_t g = 0; g < areas[i].generators.size(); ++g) {
            names.push_back("Pm_" + a + "_" + std::to_string(g + 1));
        }
        names.push_back("Pagc_" + a);
        names.push_back("Ptie_" + a);
        names.push_back("Pm_" + a);
    }
    return names;
}

AgcSystem assemble_multiarea(const std::vector<AreaParams>& areas, const AttackTopology& topology) {
    if (areas.empty()) throw ConfigError("at least one area is required");
    AgcSystem sys;
    sys.areas = areas;
    sys.topology = topology;

    const int na = static_cast<int>(areas.size());
    Eigen::Index nx = 0, ny = 0;
    for (int i = 0; i < na; ++i) {
        const auto& a = areas[static_cast<std::size_t>(i)];
        a.validate();
        for (const auto& nb : a.neighbors) {
            if (nb.area < 0 || nb.area >= na || nb.area == i) {
                throw ConfigError("area " + std::to_string(i) + " lists an invalid neighbor");
            }
            const auto& back = areas[static_cast<std::size_t>(nb.area)].neighbors;
            int count = 0;
            for (const auto& b : back) count += b.area == i;
            if (count != 1) {
                throw ConfigError("asymmetric topology between areas " + std::to_string(i) + " and " +
                                  std::to_string(nb.area));
            }
        }
        AreaLayout l;
        l.state_offset = nx;
        l.output_offset = ny;
        l.n_ties = static_cast<int>(a.neighbors.size());
        l.n_gens = static_cast<int>(a.generators.size());
        nx += l.n_states();
        ny += l.n_outputs();
        sys.layout.push_back(l);
    }

    const auto nf = static_cast<Eigen::Index>(topology.channels.size());
    auto& m = sys.model;
    m.A = Matrix::Zero(nx, nx);
    m.B_d = Matrix::Zero(nx, na);
    m.B_f = Matrix::Zero(nx, nf);
    m.C = Matrix::Zero(ny, nx);
    m.D_f = Matrix::Zero(ny, nf);

    for (int i = 0; i < na; ++i) {
        const auto& l = sys.layout[static_cast<std::size_t>(i)];
        const auto blk = build_area(areas[static_cast<std::size_t>(i)]);
        m.A.block(l.state_offset, l.state_offset, l.n_states(), l.n_states()) = blk.A_ii;
        m.B_d.block(l.state_offset, i, l.n_states(), 1) = blk.B_id;
        m.C.block(l.output_offset, l.state_offset, l.n_outputs(), l.n_states()) = blk.C_i;
        // A_ij: -T_ij from the frequency of area j into the tie row toward j.
        const auto& nbs = areas[static_cast<std::size_t>(i)].neighbors;
        for (int k = 0; k < l.n_ties; ++k) {
            const auto& nb = nbs[static_cast<std::size_t>(k)];
            m.A(l.tie(k), sys.layout[static_cast<std::size_t>(nb.area)].omega()) = -nb.T;
        }
    }

    int last_area = -1;
    for (Eigen::Index c = 0; c < nf; ++c) {
        const auto& ch = topology.channels[static_cast<std::size_t>(c)];
        if (ch.area < 0 || ch.area >= na) throw ConfigError("attack channel references an unknown area");
        if (ch.area < last_area) throw ConfigError("attack channels must be ordered by area");
        last_area = ch.area;
        if (ch.kind == ChannelKind::tie && sys.tie_index(ch.area, ch.neighbor) < 0) {
            throw ConfigError("attack channel references a tie line that does not exist");
        }
        m.D_f(sys.output_row(ch), c) = 1.0;
        m.B_f(sys.layout[static_cast<std::size_t>(ch.area)].agc(), c) = -sys.ace_gain(ch);
    }
    m.Ts.reset();
    m.validate();
    return sys;
}

double corrupted_ace(const AreaParams& area, double dw, const std::vector<double>& ties, double f_tie) {
    double tie_sum = 0.0;
    for (double t : ties) tie_sum += t;
    return area.beta * dw + (tie_sum + f_tie);
}

void ensure_stable(const AgcSystem& sys) {
    Matrix B(sys.model.n_x(), sys.model.n_d() + sys.model.n_f());
    B << sys.model.B_d, sys.model.B_f;
    const double abscissa = lti::reachable_spectral_abscissa(sys.model.A, B);
    if (!(abscissa < 0.0)) {
        throw ConfigError("abstract AGC model is not asymptotically stable (max Re(eig) = " +
                          std::to_string(abscissa) + ")");
    }
}

std::vector<AreaParams> reference_areas() {
    const double T = 0.545;
    std::vector<AreaParams> areas(3);
    areas[0].name = "area1";
    areas[0].generators = {{0.3, 0.05, 0.5}, {0.4, 0.05, 0.5}};
    areas[0].neighbors = {{1, T}, {2, T}};
    areas[1].name = "area2";
    areas[1].generators = {{0.3, 0.05, 0.4}, {0.4, 0.05, 0.3}, {0.5, 0.05, 0.3}};
    areas[1].neighbors = {{0, T}, {2, T}};
    areas[2].name = "area3";
    areas[2].generators = {{0.4, 0.05, 0.6}, {0.5, 0.05, 0.4}};
    areas[2].neighbors = {{0, T}, {1, T}};
    return areas;
}

AttackTopology univariate_topology() {
    AttackTopology t;
    t.channels = {{0, ChannelKind::tie, 1, -1.0}};
    return t;
}

AttackTopology multivariate_topology() {
    AttackTopology t;
    t.channels = {
        {0, ChannelKind::tie, 1, -1.0},
        {0, ChannelKind::tie, 2, -1.0},
        {0, ChannelKind::tie_total, -1, -1.0},
        {1, ChannelKind::tie, 0, -1.0},
        {2, ChannelKind::tie, 0, -1.0},
    };
    return t;
}

}  // namespace fdi::agc
