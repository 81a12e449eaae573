#include "lossid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace lossid::autodiff {

namespace {

[[noreturn]] void throw_nonfinite(const char* where, const LossTerms& t,
                                  const LossWeights& w) {
    // Diagnostic breakdown of which term exploded, as a JSON object.
    std::ostringstream msg;
    msg << where << ": non-finite loss; terms {\"mse\": " << t.mse
        << ", \"penalty\": " << t.penalty
        << ", \"correction_norm\": " << t.correction_norm
        << ", \"alpha\": " << w.alpha << ", \"beta\": " << w.beta << "}";
    throw NumericalError(msg.str());
}

// Columns are samples. Bias is broadcast over columns.
Mat affine(const Mat& w, const Vec& b, const Mat& h) {
    return (w * h).colwise() + b;
}

struct MlpTape {
    std::vector<Mat> activations;  // activations[0] = input, tanh applied elsewhere
};

Mat mlp_forward_batch(const net::MlpParams& params, const Mat& features, MlpTape* tape) {
    Mat h = features;
    if (tape) tape->activations.push_back(h);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        h = affine(params.weights[l], params.biases[l], h).array().tanh().matrix();
        if (tape) tape->activations.push_back(h);
    }
    return h;
}

// Backprop through the tanh MLP. delta is dL/d(output). Gradients are
// accumulated into grad (flat, MlpParams::flatten layout). Returns dL/d(input).
Mat mlp_backward_batch(const net::MlpParams& params, const MlpTape& tape,
                       Mat delta, Vec& grad) {
    const int layers = static_cast<int>(params.weights.size());
    // Offsets of each layer in the flat layout.
    std::vector<int> offsets(layers);
    int at = 0;
    for (int l = 0; l < layers; ++l) {
        offsets[l] = at;
        at += static_cast<int>(params.weights[l].size() + params.biases[l].size());
    }
    for (int l = layers - 1; l >= 0; --l) {
        const Mat& out = tape.activations[l + 1];
        const Mat& in = tape.activations[l];
        delta = delta.cwiseProduct((1.0 - out.array().square()).matrix());
        Mat dw = delta * in.transpose();
        Vec db = delta.rowwise().sum();
        // The flat layout is row-major per weight matrix.
        double* base = grad.data() + offsets[l];
        for (int r = 0; r < dw.rows(); ++r)
            for (int c = 0; c < dw.cols(); ++c) base[r * dw.cols() + c] += dw(r, c);
        Eigen::Map<Vec>(grad.data() + offsets[l] + dw.size(), db.size()) += db;
        if (l > 0) delta = params.weights[l].transpose() * delta;
    }
    return params.weights[0].transpose() * delta;
}

}  // namespace

CascadeGradients backward_cascade_fnn(const rom::DiscreteRom& nrom,
                                      const net::MlpParams& params,
                                      std::span<const OneStepSample> batch,
                                      const LossWeights& weights) {
    weights.validate();
    const int b_count = static_cast<int>(batch.size());
    if (b_count == 0) throw ConfigError("backward_cascade_fnn: empty batch");
    const int n = nrom.state_count();
    const int m = nrom.channel_count();
    const int p = nrom.output_count();
    const int nin = params.input_size();

    Mat features(nin, b_count), u_nom(m, b_count), x(n, b_count), target(p, b_count);
    for (int b = 0; b < b_count; ++b) {
        features.col(b) = batch[b].features;
        u_nom.col(b) = batch[b].u_nom_norm;
        x.col(b) = batch[b].x_norm;
        target.col(b) = batch[b].y_next_norm;
    }

    MlpTape tape;
    Mat correction = mlp_forward_batch(params, features, &tape);
    Mat u = u_nom + correction;
    Mat x_next = nrom.Ad * x + nrom.Bd * u;
    Mat residual = nrom.C * x_next - target;

    CascadeGradients out;
    out.terms.mse = residual.squaredNorm() / double(p * b_count);
    Vec correction_norms(b_count);
    for (int b = 0; b < b_count; ++b) {
        out.terms.penalty += negativity_penalty(u.col(b));
        correction_norms[b] = correction.col(b).norm();
        out.terms.correction_norm += correction_norms[b];
    }
    out.terms.penalty /= double(b_count);
    out.terms.correction_norm /= double(b_count);
    out.loss = out.terms.total(weights);
    if (!std::isfinite(out.loss)) throw_nonfinite("backward_cascade_fnn", out.terms, weights);

    const double inv_b = 1.0 / double(b_count);
    Mat g_y = residual * (2.0 / double(p) * inv_b);
    Mat g_x_next = nrom.C.transpose() * g_y;
    Mat g_u_rom = nrom.Bd.transpose() * g_x_next;

    out.input_adjoint_abs_sum = g_u_rom.cwiseAbs().rowwise().sum() * double(b_count);
    out.adjoint_count = b_count;

    Mat g_u = g_u_rom;
    for (int b = 0; b < b_count; ++b)
        for (int j = 0; j < m; ++j)
            if (u(j, b) < 0.0) g_u(j, b) += weights.alpha * inv_b * 2.0 * u(j, b);

    Mat g_correction = g_u;
    for (int b = 0; b < b_count; ++b)
        if (correction_norms[b] > 0.0)
            g_correction.col(b) +=
                (weights.beta * inv_b / correction_norms[b]) * correction.col(b);

    out.wrt_params = Vec::Zero(params.parameter_count());
    mlp_backward_batch(params, tape, std::move(g_correction), out.wrt_params);
    if (!out.wrt_params.allFinite())
        throw_nonfinite("backward_cascade_fnn (gradient)", out.terms, weights);
    return out;
}

LossTerms forward_cascade_fnn(const rom::DiscreteRom& nrom,
                              const net::MlpParams& params,
                              std::span<const OneStepSample> batch) {
    const int b_count = static_cast<int>(batch.size());
    if (b_count == 0) throw ConfigError("forward_cascade_fnn: empty batch");
    const int p = nrom.output_count();
    Mat features(params.input_size(), b_count), u_nom(nrom.channel_count(), b_count),
        x(nrom.state_count(), b_count), target(p, b_count);
    for (int b = 0; b < b_count; ++b) {
        features.col(b) = batch[b].features;
        u_nom.col(b) = batch[b].u_nom_norm;
        x.col(b) = batch[b].x_norm;
        target.col(b) = batch[b].y_next_norm;
    }
    Mat correction = mlp_forward_batch(params, features, nullptr);
    Mat u = u_nom + correction;
    Mat residual = nrom.C * (nrom.Ad * x + nrom.Bd * u) - target;

    LossTerms terms;
    terms.mse = residual.squaredNorm() / double(p * b_count);
    for (int b = 0; b < b_count; ++b) {
        terms.penalty += negativity_penalty(u.col(b));
        terms.correction_norm += correction.col(b).norm();
    }
    terms.penalty /= double(b_count);
    terms.correction_norm /= double(b_count);
    return terms;
}

namespace {

struct RnnUnroll {
    // Per-step tapes; index k = 0..S-1. state has S+1 entries.
    std::vector<Mat> feature, pre_mask, hidden, correction, u, residual, state;
    std::vector<Vec> correction_norms;
    LossTerms terms;
};

RnnUnroll rnn_forward_batch(const rom::DiscreteRom& nrom, const net::ElmanParams& params,
                            const net::PcaBasis& pca,
                            std::span<const SequenceSample> batch) {
    const int b_count = static_cast<int>(batch.size());
    const int s_len = static_cast<int>(batch.front().exo.rows());
    const int n = nrom.state_count();
    const int m = nrom.channel_count();
    const int p = nrom.output_count();
    const int hidden_n = params.hidden_size();
    const int nin = params.input_size();

    RnnUnroll roll;
    roll.feature.resize(s_len);
    roll.pre_mask.resize(s_len);
    roll.hidden.resize(s_len);
    roll.correction.resize(s_len);
    roll.u.resize(s_len);
    roll.residual.resize(s_len);
    roll.state.resize(s_len + 1);
    roll.correction_norms.resize(s_len);

    Mat x(n, b_count);
    for (int b = 0; b < b_count; ++b) {
        if (batch[b].exo.rows() != s_len)
            throw ConfigError("rnn batch: sequences must share one length");
        x.col(b) = batch[b].x0_norm;
    }
    roll.state[0] = x;
    Mat h = Mat::Zero(hidden_n, b_count);
    const Vec pca_offset = pca.loadings * pca.mean;

    const double scale = 1.0 / double(s_len * b_count);
    for (int k = 0; k < s_len; ++k) {
        Mat features(nin, b_count);
        for (int b = 0; b < b_count; ++b)
            features.block(0, b, 2, 1) = batch[b].exo.row(k).transpose();
        features.middleRows(2, p) = nrom.C * x;
        features.bottomRows(pca.components()) =
            (pca.loadings * x).colwise() - pca_offset;
        roll.feature[k] = features;

        Mat pre = affine(params.w_xh, params.b_h, features) + params.w_hh * h;
        roll.pre_mask[k] = pre.unaryExpr(
            [](double a) { return a >= 0.0 ? 1.0 : net::kLeakySlope; });
        h = pre.cwiseProduct(roll.pre_mask[k]);
        roll.hidden[k] = h;

        Mat correction = affine(params.w_hy, params.b_y, h).array().tanh().matrix();
        roll.correction[k] = correction;

        Mat u_nom(m, b_count);
        Mat target(p, b_count);
        for (int b = 0; b < b_count; ++b) {
            u_nom.col(b) = batch[b].u_nom_norm.row(k).transpose();
            target.col(b) = batch[b].y_next_norm.row(k).transpose();
        }
        Mat u = u_nom + correction;
        roll.u[k] = u;

        x = nrom.Ad * x + nrom.Bd * u;
        roll.state[k + 1] = x;
        Mat residual = nrom.C * x - target;
        roll.residual[k] = residual;

        roll.terms.mse += residual.squaredNorm() / double(p) * scale;
        Vec norms(b_count);
        for (int b = 0; b < b_count; ++b) {
            roll.terms.penalty += negativity_penalty(u.col(b)) * scale;
            norms[b] = correction.col(b).norm();
            roll.terms.correction_norm += norms[b] * scale;
        }
        roll.correction_norms[k] = norms;
    }
    return roll;
}

}  // namespace

CascadeGradients backward_cascade_rnn(const rom::DiscreteRom& nrom,
                                      const net::ElmanParams& params,
                                      const net::PcaBasis& pca,
                                      std::span<const SequenceSample> batch,
                                      const LossWeights& weights) {
    weights.validate();
    if (batch.empty()) throw ConfigError("backward_cascade_rnn: empty batch");
    if (!pca.fitted()) throw ConfigError("backward_cascade_rnn: PCA basis not fitted");

    RnnUnroll roll = rnn_forward_batch(nrom, params, pca, batch);
    const int b_count = static_cast<int>(batch.size());
    const int s_len = static_cast<int>(batch.front().exo.rows());
    const int m = nrom.channel_count();
    const int p = nrom.output_count();

    CascadeGradients out;
    out.terms = roll.terms;
    out.loss = out.terms.total(weights);
    if (!std::isfinite(out.loss)) throw_nonfinite("backward_cascade_rnn", out.terms, weights);

    const double scale = 1.0 / double(s_len * b_count);
    Mat d_w_xh = Mat::Zero(params.w_xh.rows(), params.w_xh.cols());
    Mat d_w_hh = Mat::Zero(params.w_hh.rows(), params.w_hh.cols());
    Mat d_w_hy = Mat::Zero(params.w_hy.rows(), params.w_hy.cols());
    Vec d_b_h = Vec::Zero(params.b_h.size());
    Vec d_b_y = Vec::Zero(params.b_y.size());

    out.input_adjoint_abs_sum = Vec::Zero(m);
    out.adjoint_count = long(s_len) * b_count;

    Mat lambda_x = Mat::Zero(nrom.state_count(), b_count);  // dL/dx_{k+1}
    Mat h_carry = Mat::Zero(params.hidden_size(), b_count); // W_hh^T delta_a from k+1

    for (int k = s_len - 1; k >= 0; --k) {
        lambda_x += nrom.C.transpose() * (roll.residual[k] * (2.0 / double(p) * scale));

        Mat g_u_rom = nrom.Bd.transpose() * lambda_x;
        out.input_adjoint_abs_sum +=
            g_u_rom.cwiseAbs().rowwise().sum() * double(s_len * b_count);

        Mat g_u = g_u_rom;
        const Mat& u = roll.u[k];
        for (int b = 0; b < b_count; ++b)
            for (int j = 0; j < m; ++j)
                if (u(j, b) < 0.0) g_u(j, b) += weights.alpha * scale * 2.0 * u(j, b);

        Mat g_correction = g_u;
        for (int b = 0; b < b_count; ++b) {
            const double norm = roll.correction_norms[k][b];
            if (norm > 0.0)
                g_correction.col(b) +=
                    (weights.beta * scale / norm) * roll.correction[k].col(b);
        }

        Mat delta_o =
            g_correction.cwiseProduct((1.0 - roll.correction[k].array().square()).matrix());
        d_w_hy.noalias() += delta_o * roll.hidden[k].transpose();
        d_b_y += delta_o.rowwise().sum();

        Mat g_h = params.w_hy.transpose() * delta_o + h_carry;
        Mat delta_a = g_h.cwiseProduct(roll.pre_mask[k]);
        d_w_xh.noalias() += delta_a * roll.feature[k].transpose();
        if (k > 0) d_w_hh.noalias() += delta_a * roll.hidden[k - 1].transpose();
        d_b_h += delta_a.rowwise().sum();
        h_carry = params.w_hh.transpose() * delta_a;

        Mat g_features = params.w_xh.transpose() * delta_a;
        lambda_x = nrom.Ad.transpose() * lambda_x +
                   nrom.C.transpose() * g_features.middleRows(2, p) +
                   pca.loadings.transpose() * g_features.bottomRows(pca.components());
    }

    // Flatten in ElmanParams layout: w_xh, w_hh, b_h, w_hy, b_y (row-major).
    out.wrt_params = Vec::Zero(params.parameter_count());
    int at = 0;
    auto push_mat = [&](const Mat& g) {
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) out.wrt_params[at++] = g(r, c);
    };
    push_mat(d_w_xh);
    push_mat(d_w_hh);
    for (int r = 0; r < d_b_h.size(); ++r) out.wrt_params[at++] = d_b_h[r];
    push_mat(d_w_hy);
    for (int r = 0; r < d_b_y.size(); ++r) out.wrt_params[at++] = d_b_y[r];

    if (!out.wrt_params.allFinite())
        throw_nonfinite("backward_cascade_rnn (gradient)", out.terms, weights);
    return out;
}

LossTerms forward_cascade_rnn(const rom::DiscreteRom& nrom,
                              const net::ElmanParams& params,
                              const net::PcaBasis& pca,
                              std::span<const SequenceSample> batch) {
    if (batch.empty()) throw ConfigError("forward_cascade_rnn: empty batch");
    return rnn_forward_batch(nrom, params, pca, batch).terms;
}

double finite_diff_check(const std::function<double(const Vec&)>& f, const Vec& point,
                         const Vec& analytic_grad, double step, int max_coords,
                         std::uint64_t seed) {
    if (!(step > 0.0)) throw ConfigError("finite_diff_check: step must be > 0");
    if (point.size() != analytic_grad.size())
        throw ConfigError("finite_diff_check: gradient length mismatch");

    std::vector<int> coords(point.size());
    for (int i = 0; i < point.size(); ++i) coords[i] = i;
    if (static_cast<int>(coords.size()) > max_coords) {
        Rng rng(seed);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, coords.size() - 1);
            std::swap(coords[i], coords[pick(rng)]);
        }
        coords.resize(max_coords);
    }

    double worst = 0.0;
    Vec probe = point;
    for (int i : coords) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double f_plus = f(probe);
        probe[i] = saved - step;
        const double f_minus = f(probe);
        probe[i] = saved;
        const double numeric = (f_plus - f_minus) / (2.0 * step);
        const double analytic = analytic_grad[i];
        const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

}  // namespace lossid::autodiff
