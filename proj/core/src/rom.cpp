#include "lossid/rom.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace lossid::rom {

namespace {

bool grounded(const ThermalParams& p) {
    const int n = p.node_count();
    std::vector<std::vector<int>> adj(n);
    for (const auto& l : p.links) {
        if (l.conductance > 0.0) {
            adj[l.a].push_back(l.b);
            adj[l.b].push_back(l.a);
        }
    }
    std::vector<char> seen(n, 0);
    std::queue<int> frontier;
    for (int i = 0; i < n; ++i) {
        if (p.ambient_conductances[i] > 0.0) {
            seen[i] = 1;
            frontier.push(i);
        }
    }
    while (!frontier.empty()) {
        int v = frontier.front();
        frontier.pop();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                frontier.push(w);
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace

void ThermalParams::validate() const {
    const int n = node_count();
    if (n <= 0) throw ConfigError("thermal params: no nodes");
    for (int i = 0; i < n; ++i) {
        if (!(node_capacitances[i] > 0.0) || !std::isfinite(node_capacitances[i]))
            throw ConfigError("thermal params: capacitance " + std::to_string(i) +
                              " must be finite and > 0");
    }
    if (static_cast<int>(ambient_conductances.size()) != n)
        throw ConfigError("thermal params: ambient conductance length mismatch");
    for (int i = 0; i < n; ++i) {
        if (ambient_conductances[i] < 0.0 || !std::isfinite(ambient_conductances[i]))
            throw ConfigError("thermal params: ambient conductance " + std::to_string(i) +
                              " must be finite and >= 0");
    }
    for (const auto& l : links) {
        if (l.a < 0 || l.a >= n || l.b < 0 || l.b >= n || l.a == l.b)
            throw ConfigError("thermal params: link references invalid node pair");
        if (l.conductance < 0.0 || !std::isfinite(l.conductance))
            throw ConfigError("thermal params: link conductance must be finite and >= 0");
    }
    for (int node : injection_map) {
        if (node < 0 || node >= n)
            throw ConfigError("thermal params: injection map references invalid node");
    }
    for (int node : sensor_map) {
        if (node < 0 || node >= n)
            throw ConfigError("thermal params: sensor map references invalid node");
    }
    if (!grounded(*this))
        throw ConfigError("thermal params: ungrounded network (a node has no "
                          "conductive path to ambient); model would not be "
                          "asymptotically stable");
}

Vec ThermalParams::flatten() const {
    const int n = node_count();
    Vec out(n + static_cast<int>(links.size()) + n);
    int k = 0;
    for (int i = 0; i < n; ++i) out[k++] = node_capacitances[i];
    for (const auto& l : links) out[k++] = l.conductance;
    for (int i = 0; i < n; ++i) out[k++] = ambient_conductances[i];
    return out;
}

ContinuousRom synthesize_rc_network(const ThermalParams& params) {
    params.validate();
    const int n = params.node_count();
    const int m = params.channel_count();
    const int p = params.output_count();

    Mat laplacian = Mat::Zero(n, n);
    for (const auto& l : params.links) {
        laplacian(l.a, l.a) += l.conductance;
        laplacian(l.b, l.b) += l.conductance;
        laplacian(l.a, l.b) -= l.conductance;
        laplacian(l.b, l.a) -= l.conductance;
    }
    laplacian.diagonal() += params.ambient_conductances;

    const Vec inv_c = params.node_capacitances.cwiseInverse();
    ContinuousRom out;
    out.A = -(inv_c.asDiagonal() * laplacian);
    out.B = Mat::Zero(n, m);
    for (int j = 0; j < m; ++j) {
        const int node = params.injection_map[j];
        out.B(node, j) += inv_c[node];
    }
    out.C = Mat::Zero(p, n);
    for (int i = 0; i < p; ++i) out.C(i, params.sensor_map[i]) = 1.0;
    return out;
}

DiscreteRom discretize_zoh(const ContinuousRom& crom, double dt) {
    if (!(dt > 0.0)) throw ConfigError("discretize_zoh: dt must be > 0");
    const auto n = crom.A.rows();
    const auto m = crom.B.cols();
    if (max_eigenvalue_real_part(crom.A) >= 0.0)
        throw ConfigError("discretize_zoh: A is not Hurwitz");

    // exp([[A,B],[0,0]] dt) = [[Ad, Bd],[0, I]]
    Mat aug = Mat::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = crom.A * dt;
    aug.topRightCorner(n, m) = crom.B * dt;
    const Mat phi = aug.exp();

    DiscreteRom out;
    out.Ad = phi.topLeftCorner(n, n);
    out.Bd = phi.topRightCorner(n, m);
    out.C = crom.C;
    out.dt = dt;
    if (!out.Ad.allFinite() || !out.Bd.allFinite())
        throw NumericalError("discretize_zoh: non-finite matrix entries");
    if (spectral_radius(out.Ad) >= 1.0)
        throw NumericalError("discretize_zoh: discretized model not asymptotically stable");
    return out;
}

std::pair<Vec, Vec> step(const DiscreteRom& rom, const Vec& x, const Vec& u) {
    Vec y = rom.C * x;
    Vec x_next = rom.Ad * x + rom.Bd * u;
    return {std::move(x_next), std::move(y)};
}

Trajectory simulate(const DiscreteRom& rom, const Mat& u_seq, const Vec& x0) {
    const int steps = static_cast<int>(u_seq.rows());
    const int n = rom.state_count();
    const int p = rom.output_count();
    Trajectory traj;
    traj.z.resize(steps, 0);
    traj.u = u_seq;
    traj.x.resize(steps, n);
    traj.y.resize(steps, p);
    Vec x = x0;
    for (int k = 0; k < steps; ++k) {
        traj.x.row(k) = x.transpose();
        traj.y.row(k) = (rom.C * x).transpose();
        x = rom.Ad * x + rom.Bd * u_seq.row(k).transpose();
    }
    return traj;
}

Vec dc_steady_state(const DiscreteRom& rom, const Vec& u) {
    const auto n = rom.Ad.rows();
    Mat lhs = Mat::Identity(n, n) - rom.Ad;
    return lhs.partialPivLu().solve(rom.Bd * u);
}

Vec dc_output_bound(const DiscreteRom& rom, const Vec& u_max) {
    return rom.C * dc_steady_state(rom, u_max);
}

std::pair<DiscreteRom, NormalizationTransform>
normalize(const DiscreteRom& rom, const Vec& u_max, const Vec& y_max) {
    if ((u_max.array() <= 0.0).any()) throw ConfigError("normalize: u_max must be > 0");
    if ((y_max.array() <= 0.0).any()) throw ConfigError("normalize: y_max must be > 0");

    const Vec x_ss = dc_steady_state(rom, u_max);
    for (int i = 0; i < x_ss.size(); ++i) {
        if (!(x_ss[i] > 0.0))
            throw NumericalError("normalize: state dimension " + std::to_string(i) +
                                 " has zero steady state under u_max; scaling unusable "
                                 "(prune or re-map the state)");
    }
    NormalizationTransform tf;
    tf.u_max = u_max;
    tf.y_max = y_max;
    tf.state_scale = x_ss.cwiseInverse();

    DiscreteRom out;
    out.Ad = tf.state_scale.asDiagonal() * rom.Ad * x_ss.asDiagonal();
    out.Bd = tf.state_scale.asDiagonal() * rom.Bd * u_max.asDiagonal();
    out.C = y_max.cwiseInverse().asDiagonal() * rom.C * x_ss.asDiagonal();
    out.dt = rom.dt;
    return {std::move(out), std::move(tf)};
}

ThermalParams perturb_thermal_params(const ThermalParams& params, double tau,
                                     std::uint64_t seed) {
    if (tau < 0.0) throw ConfigError("perturb_thermal_params: tau must be >= 0");
    params.validate();
    Rng rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    // Floor at 1e-6 of the nominal magnitude; with tau ~ 0.05 this only
    // guards the far tail and keeps every invariant intact.
    auto jitter = [&](double v, double floor_v) {
        const double draw = v + tau * std::abs(v) * unit(rng);
        return std::max(draw, floor_v);
    };

    ThermalParams out = params;
    for (int i = 0; i < out.node_capacitances.size(); ++i)
        out.node_capacitances[i] =
            jitter(params.node_capacitances[i], 1e-6 * std::abs(params.node_capacitances[i]));
    for (std::size_t i = 0; i < out.links.size(); ++i)
        out.links[i].conductance = jitter(params.links[i].conductance, 0.0);
    for (int i = 0; i < out.ambient_conductances.size(); ++i)
        out.ambient_conductances[i] = jitter(params.ambient_conductances[i], 0.0);
    out.validate();
    return out;
}

ThermalParams random_thermal_params(int n, int m, int p, std::uint64_t seed) {
    if (n <= 0 || m <= 0 || p <= 0 || p > n)
        throw ConfigError("random_thermal_params: need n > 0, m > 0, 0 < p <= n");
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) {
        return lo * std::exp(unit(rng) * std::log(hi / lo));
    };

    ThermalParams params;
    params.node_capacitances.resize(n);
    for (int i = 0; i < n; ++i) params.node_capacitances[i] = log_uniform(200.0, 2000.0);

    // Spanning tree keeps the network connected; shortcuts add structure.
    for (int i = 1; i < n; ++i) {
        int parent = static_cast<int>(unit(rng) * i);
        parent = std::min(parent, i - 1);
        params.links.push_back({parent, i, log_uniform(0.5, 20.0)});
    }
    const int shortcuts = n / 2;
    for (int s = 0; s < shortcuts && n > 2; ++s) {
        int a = static_cast<int>(unit(rng) * n) % n;
        int b = static_cast<int>(unit(rng) * n) % n;
        if (a == b) b = (b + 1) % n;
        params.links.push_back({a, b, log_uniform(0.2, 8.0)});
    }

    params.ambient_conductances = Vec::Zero(n);
    bool any_ground = false;
    for (int i = 0; i < n; ++i) {
        if (unit(rng) < 0.3) {
            params.ambient_conductances[i] = log_uniform(0.5, 8.0);
            any_ground = true;
        }
    }
    if (!any_ground) params.ambient_conductances[0] = log_uniform(0.5, 8.0);

    params.injection_map.resize(m);
    for (int j = 0; j < m; ++j)
        params.injection_map[j] = static_cast<int>(unit(rng) * n) % n;

    // Sensors on p distinct nodes.
    std::vector<int> nodes(n);
    for (int i = 0; i < n; ++i) nodes[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(unit(rng) * (i + 1)) % (i + 1);
        std::swap(nodes[i], nodes[j]);
    }
    params.sensor_map.assign(nodes.begin(), nodes.begin() + p);

    params.validate();
    return params;
}

double max_eigenvalue_real_part(const Mat& a) {
    Eigen::EigenSolver<Mat> solver(a, /*computeEigenvectors=*/false);
    return solver.eigenvalues().real().maxCoeff();
}

double spectral_radius(const Mat& a) {
    Eigen::EigenSolver<Mat> solver(a, /*computeEigenvectors=*/false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace lossid::rom
