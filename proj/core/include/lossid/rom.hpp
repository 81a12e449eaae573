#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lossid/common.hpp"

namespace lossid::rom {

/// One thermal conduction path between two nodes, W/K.
struct Link {
    int a = 0;
    int b = 0;
    double conductance = 0.0;
};

/// Physical parameterization of a lumped RC thermal network. This is the
/// parameter vector that generates the state-space matrices.
struct ThermalParams {
    Vec node_capacitances;              // n entries, J/K, all > 0
    std::vector<Link> links;            // inter-node conductances, W/K, >= 0
    Vec ambient_conductances;           // n entries, W/K, >= 0
    std::vector<int> injection_map;     // loss channel -> node, m entries
    std::vector<int> sensor_map;        // output -> node, p entries

    int node_count() const { return static_cast<int>(node_capacitances.size()); }
    int channel_count() const { return static_cast<int>(injection_map.size()); }
    int output_count() const { return static_cast<int>(sensor_map.size()); }

    /// Throws ConfigError if any invariant fails (positivity, index ranges,
    /// or a node without a conductive path to ambient).
    void validate() const;

    /// All scalar physical parameters as one flat vector
    /// (capacitances, link conductances, ambient conductances).
    Vec flatten() const;
};

/// Continuous-time thermal state space (A Metzler + Hurwitz, B >= 0).
struct ContinuousRom {
    Mat A;  // n x n, 1/s
    Mat B;  // n x m, K/J
    Mat C;  // p x n, selector
};

/// Zero-order-hold discretization of a ContinuousRom.
struct DiscreteRom {
    Mat Ad;     // n x n
    Mat Bd;     // n x m
    Mat C;      // p x n
    double dt = 1.0;

    int state_count() const { return static_cast<int>(Ad.rows()); }
    int channel_count() const { return static_cast<int>(Bd.cols()); }
    int output_count() const { return static_cast<int>(C.rows()); }
};

/// Diagonal scaling that maps the raw model onto one whose inputs, states
/// and outputs stay inside [0, 1] for inputs within [0, u_max].
struct NormalizationTransform {
    Vec u_max;       // m, W
    Vec y_max;       // p, K
    Vec state_scale; // n, diagonal of T

    Vec normalize_input(const Vec& u) const { return u.cwiseQuotient(u_max); }
    Vec denormalize_input(const Vec& u_norm) const { return u_norm.cwiseProduct(u_max); }
    Vec normalize_output(const Vec& y) const { return y.cwiseQuotient(y_max); }
    Vec denormalize_output(const Vec& y_norm) const { return y_norm.cwiseProduct(y_max); }
    Vec normalize_state(const Vec& x) const { return x.cwiseProduct(state_scale); }
    Vec denormalize_state(const Vec& x_norm) const { return x_norm.cwiseQuotient(state_scale); }
};

/// Aligned time series of one simulation run; rows are time steps.
/// Units depend on the producer: ground-truth runs are all raw, hybrid
/// closed-loop runs store raw z and u with normalized x and y.
struct Trajectory {
    Mat z;  // K x d, external inputs (d may be 0)
    Mat u;  // K x m
    Mat x;  // K x n
    Mat y;  // K x p, y.row(k) = (C * x.row(k)')'

    int steps() const { return static_cast<int>(u.rows()); }
};

/// Assembles A = -diag(1/C_i) (L + diag(g_amb)), B routing channel j into
/// node injection_map[j] scaled by that node's inverse capacitance, and a
/// selector C. Throws ConfigError on invalid or ungrounded parameters.
ContinuousRom synthesize_rc_network(const ThermalParams& params);

/// Exact ZOH sampling via the augmented-matrix exponential
/// exp([[A,B],[0,0]] dt); no explicit inverse of A is formed.
/// Requires dt > 0 and a Hurwitz A; throws NumericalError if the result is
/// non-finite or not asymptotically stable.
DiscreteRom discretize_zoh(const ContinuousRom& crom, double dt);

/// One update: x_next = Ad x + Bd u. The returned output pairs with the
/// pre-update state, y = C x.
std::pair<Vec, Vec> step(const DiscreteRom& rom, const Vec& x, const Vec& u);

/// Repeated step() over u_seq (rows = steps) from initial state x0.
Trajectory simulate(const DiscreteRom& rom, const Mat& u_seq, const Vec& x0);

/// DC steady state (I - Ad)^{-1} Bd u under constant input u.
Vec dc_steady_state(const DiscreteRom& rom, const Vec& u);

/// Tight componentwise output bound C (I - Ad)^{-1} Bd u_max; the canonical
/// y_max choice for normalize().
Vec dc_output_bound(const DiscreteRom& rom, const Vec& u_max);

/// Rescales the model so that inputs in [0, u_max] drive states into [0, 1];
/// state_scale is the inverse DC steady state under u_max. Throws
/// NumericalError if some state dimension is unreachable (zero steady state).
std::pair<DiscreteRom, NormalizationTransform>
normalize(const DiscreteRom& rom, const Vec& u_max, const Vec& y_max);

/// Gaussian perturbation of every scalar physical parameter with standard
/// deviation tau * |value|; results are floored so invariants keep holding.
ThermalParams perturb_thermal_params(const ThermalParams& params, double tau,
                                     std::uint64_t seed);

/// Random grounded RC network generator used by the experiments and the
/// property tests: random spanning tree plus shortcut links, log-uniform
/// conductances and capacitances, p distinct sensor nodes.
ThermalParams random_thermal_params(int n, int m, int p, std::uint64_t seed);

/// Largest real part over eig(A); < 0 iff Hurwitz.
double max_eigenvalue_real_part(const Mat& a);

/// Spectral radius of a square matrix.
double spectral_radius(const Mat& a);

}  // namespace lossid::rom
