#pragma once

#include <string>
#include <vector>

#include "fdi/lti.hpp"

namespace fdi::agc {

struct Generator {
    double T_ch = 0.4;  // governor-turbine time constant (s)
    double S = 0.05;    // droop (p.u.)
    double phi = 1.0;   // AGC participation factor
};

struct Neighbor {
    int area = 0;     // index of the connected area
    double T = 0.545; // synchronizing coefficient
};

/// Equivalent single-machine model of one control area with an integral AGC.
struct AreaParams {
    std::string name;
    double H = 5.0;     // inertia constant (s)
    double D = 1.0;     // damping (p.u.)
    double beta = 20.0; // frequency bias (p.u.)
    double K_I = 0.3;   // AGC integral gain (1/s)
    std::vector<Generator> generators;
    std::vector<Neighbor> neighbors;

    /// Throws ConfigError on nonpositive H, T_ch, S or participation factors
    /// that do not sum to one.
    void validate() const;
};

/// Index map of one area inside the assembled state and output vectors.
///
/// states:  [tie_1..tie_k, dw, Pm_1..Pm_G, Pagc]
/// outputs: [tie_1..tie_k, dw, Pm_1..Pm_G, Pagc, tie_total, Pm_total]
struct AreaLayout {
    Eigen::Index state_offset = 0;
    Eigen::Index output_offset = 0;
    int n_ties = 0;
    int n_gens = 0;

    Eigen::Index n_states() const { return n_ties + n_gens + 2; }
    Eigen::Index n_outputs() const { return n_ties + n_gens + 4; }

    Eigen::Index tie(int k) const { return state_offset + k; }
    Eigen::Index omega() const { return state_offset + n_ties; }
    Eigen::Index pm(int g) const { return state_offset + n_ties + 1 + g; }
    Eigen::Index agc() const { return state_offset + n_ties + 1 + n_gens; }

    Eigen::Index tie_out(int k) const { return output_offset + k; }
    Eigen::Index omega_out() const { return output_offset + n_ties; }
    Eigen::Index pm_out(int g) const { return output_offset + n_ties + 1 + g; }
    Eigen::Index agc_out() const { return output_offset + n_ties + 1 + n_gens; }
    Eigen::Index tie_total_out() const { return output_offset + n_ties + 2 + n_gens; }
    Eigen::Index pm_total_out() const { return output_offset + n_ties + 3 + n_gens; }
};

enum class ChannelKind { tie, tie_total };

/// One corruptible measurement. Tie channels feed the ACE of their area
/// (gain K_I on the AGC integrator unless overridden); the aggregate tie
/// measurement is monitored only.
struct AttackChannel {
    int area = 0;
    ChannelKind kind = ChannelKind::tie;
    int neighbor = -1;         // neighbor area index, tie channels only
    double ace_gain = -1.0;    // < 0 means "default for the kind"
};

struct AttackTopology {
    std::vector<AttackChannel> channels;
};

struct AreaMatrices {
    Matrix A_ii;  // n_i x n_i
    Matrix B_id;  // n_i x 1
    Matrix C_i;   // (n_i + 2) x n_i
};

AreaMatrices build_area(const AreaParams& params);

/// The assembled abstract multi-area model together with its index maps.
struct AgcSystem {
    std::vector<AreaParams> areas;
    AttackTopology topology;
    std::vector<AreaLayout> layout;
    lti::LinearModel model;  // continuous

    /// Effective ACE gain of a channel (0 when the channel bypasses the ACE).
    double ace_gain(const AttackChannel& ch) const;
    /// Output row measured by a channel.
    Eigen::Index output_row(const AttackChannel& ch) const;
    /// Position of a neighbor inside the tie list of an area, -1 if absent.
    int tie_index(int area, int neighbor) const;
    std::vector<std::string> output_names() const;
};

/// Block assembly of A_c, B_{c,d}, B_{c,f}, C and D_f. Throws ConfigError on
/// asymmetric neighbor declarations or channels that reference unknown ties.
AgcSystem assemble_multiarea(const std::vector<AreaParams>& areas, const AttackTopology& topology);

/// beta * dw + (sum of tie flows + injected tie bias).
double corrupted_ace(const AreaParams& area, double dw, const std::vector<double>& ties, double f_tie);

/// Throws ConfigError unless A_c is asymptotically stable on the subspace
/// reachable from the disturbance and attack inputs.
void ensure_stable(const AgcSystem& sys);

/// Three interconnected areas (2, 3 and 2 AGC generators, 19 states) with the
/// textbook parameter set shipped in configs/.
std::vector<AreaParams> reference_areas();

/// Tie 1-2 bias in area 1 only.
AttackTopology univariate_topology();

/// Area 1: ties to 2 and 3 plus the aggregate; areas 2 and 3: tie to area 1.
AttackTopology multivariate_topology();

}  // namespace fdi::agc
