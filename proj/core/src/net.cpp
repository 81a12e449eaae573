#include "lossid/net.hpp"

#include <cmath>
#include <string>

namespace lossid::net {

Vec PcaBasis::project(const Vec& state) const {
    if (!fitted())
        throw ConfigError("pca basis: project() called before fitting");
    return loadings * (state - mean);
}

PcaBasis fit_pca(const Mat& states, int components) {
    if (states.rows() < 2)
        throw ConfigError("fit_pca: need at least two state samples");
    if (components <= 0 || components > states.cols())
        throw ConfigError("fit_pca: component count out of range");

    PcaBasis basis;
    basis.mean = states.colwise().mean().transpose();
    Mat centered = states.rowwise() - basis.mean.transpose();
    Mat cov = centered.transpose() * centered / double(states.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    // Eigenvalues come back ascending; take the trailing columns.
    const auto n = cov.rows();
    basis.loadings.resize(components, n);
    for (int c = 0; c < components; ++c) {
        Vec v = solver.eigenvectors().col(n - 1 - c);
        int argmax = 0;
        v.cwiseAbs().maxCoeff(&argmax);
        if (v[argmax] < 0.0) v = -v;  // deterministic sign
        basis.loadings.row(c) = v.transpose();
    }
    return basis;
}

int MlpParams::parameter_count() const {
    int count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        count += layer_sizes[l + 1] * (layer_sizes[l] + 1);
    return count;
}

Vec MlpParams::flatten() const {
    Vec flat(parameter_count());
    int at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (int r = 0; r < weights[l].rows(); ++r)
            for (int c = 0; c < weights[l].cols(); ++c) flat[at++] = weights[l](r, c);
        for (int r = 0; r < biases[l].size(); ++r) flat[at++] = biases[l][r];
    }
    return flat;
}

void MlpParams::unflatten(const Vec& flat) {
    if (flat.size() != parameter_count())
        throw ConfigError("mlp unflatten: parameter length mismatch");
    int at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (int r = 0; r < weights[l].rows(); ++r)
            for (int c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = flat[at++];
        for (int r = 0; r < biases[l].size(); ++r) biases[l][r] = flat[at++];
    }
}

std::vector<int> default_mlp_sizes(int inputs, int outputs) {
    return {inputs, 15, 25, 15, outputs};
}

namespace {

MlpParams shaped_mlp(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2)
        throw ConfigError("mlp: need at least input and output layer sizes");
    MlpParams params;
    params.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        params.weights.emplace_back(Mat::Zero(layer_sizes[l + 1], layer_sizes[l]));
        params.biases.emplace_back(Vec::Zero(layer_sizes[l + 1]));
    }
    return params;
}

}  // namespace

MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    MlpParams params = shaped_mlp(layer_sizes);
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& w : params.weights) {
        const double bound = std::sqrt(6.0 / double(w.rows() + w.cols()));
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = bound * unit(rng);
    }
    return params;
}

MlpParams zero_mlp(const std::vector<int>& layer_sizes) {
    return shaped_mlp(layer_sizes);
}

Vec mlp_forward(const MlpParams& params, const Vec& features) {
    if (features.size() != params.input_size())
        throw ConfigError("mlp_forward: feature length mismatch");
    Vec h = features;
    for (std::size_t l = 0; l < params.weights.size(); ++l)
        h = (params.weights[l] * h + params.biases[l]).array().tanh().matrix();
    return h;
}

int ElmanParams::parameter_count() const {
    return static_cast<int>(w_xh.size() + w_hh.size() + w_hy.size() + b_h.size() +
                            b_y.size());
}

Vec ElmanParams::flatten() const {
    Vec flat(parameter_count());
    int at = 0;
    auto push_mat = [&](const Mat& m) {
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) flat[at++] = m(r, c);
    };
    push_mat(w_xh);
    push_mat(w_hh);
    for (int r = 0; r < b_h.size(); ++r) flat[at++] = b_h[r];
    push_mat(w_hy);
    for (int r = 0; r < b_y.size(); ++r) flat[at++] = b_y[r];
    return flat;
}

void ElmanParams::unflatten(const Vec& flat) {
    if (flat.size() != parameter_count())
        throw ConfigError("elman unflatten: parameter length mismatch");
    int at = 0;
    auto pull_mat = [&](Mat& m) {
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) m(r, c) = flat[at++];
    };
    pull_mat(w_xh);
    pull_mat(w_hh);
    for (int r = 0; r < b_h.size(); ++r) b_h[r] = flat[at++];
    pull_mat(w_hy);
    for (int r = 0; r < b_y.size(); ++r) b_y[r] = flat[at++];
}

ElmanParams init_elman(int inputs, int hidden, int outputs, std::uint64_t seed) {
    ElmanParams params = zero_elman(inputs, hidden, outputs);
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto fill = [&](Mat& w) {
        const double bound = std::sqrt(6.0 / double(w.rows() + w.cols()));
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = bound * unit(rng);
    };
    fill(params.w_xh);
    fill(params.w_hh);
    fill(params.w_hy);
    return params;
}

ElmanParams zero_elman(int inputs, int hidden, int outputs) {
    if (inputs <= 0 || hidden <= 0 || outputs <= 0)
        throw ConfigError("elman: layer sizes must be positive");
    ElmanParams params;
    params.w_xh = Mat::Zero(hidden, inputs);
    params.w_hh = Mat::Zero(hidden, hidden);
    params.w_hy = Mat::Zero(outputs, hidden);
    params.b_h = Vec::Zero(hidden);
    params.b_y = Vec::Zero(outputs);
    return params;
}

std::pair<Vec, Vec> rnn_step(const ElmanParams& params, const Vec& h_prev,
                             const Vec& features) {
    if (features.size() != params.input_size() || h_prev.size() != params.hidden_size())
        throw ConfigError("rnn_step: dimension mismatch");
    Vec pre = params.w_xh * features + params.w_hh * h_prev + params.b_h;
    Vec h = pre.unaryExpr(
        [](double a) { return a >= 0.0 ? a : kLeakySlope * a; });
    Vec correction = (params.w_hy * h + params.b_y).array().tanh().matrix();
    return {std::move(h), std::move(correction)};
}

Vec assemble_features(const ploss::PlossInput& z, const Vec& rom_outputs_norm,
                      const Vec& rom_state_norm, const PcaBasis& pca,
                      const FeatureScale& scale) {
    if (!pca.fitted())
        throw ConfigError("assemble_features: PCA basis not fitted");
    Vec features(2 + rom_outputs_norm.size() + pca.components());
    features[0] = z.current / scale.current_max;
    features[1] = (z.feedback_temperature - scale.reference_temperature) /
                  scale.feedback_temp_max;
    features.segment(2, rom_outputs_norm.size()) = rom_outputs_norm;
    features.tail(pca.components()) = pca.project(rom_state_norm);
    return features;
}

}  // namespace lossid::net
