#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "lossid/common.hpp"
#include "lossid/ploss.hpp"

namespace lossid::net {

inline constexpr double kLeakySlope = 0.01;

enum class NetKind { Fnn, Rnn };

/// Frozen principal-component basis over normalized ROM states:
/// project(x) = loadings * (x - mean).
struct PcaBasis {
    Vec mean;      // n
    Mat loadings;  // components x n

    bool fitted() const { return loadings.size() > 0; }
    int components() const { return static_cast<int>(loadings.rows()); }
    Vec project(const Vec& state) const;
};

/// Fits a PcaBasis on rows of `states` (one normalized state per row).
/// Component signs are fixed (largest-magnitude loading positive) so the
/// basis is deterministic.
PcaBasis fit_pca(const Mat& states, int components);

/// Fully connected corrector; tanh on every layer including the output, so
/// corrections always land in (-1, 1).
struct MlpParams {
    std::vector<int> layer_sizes;  // e.g. {13, 15, 25, 15, 16}
    std::vector<Mat> weights;      // weights[l]: sizes[l+1] x sizes[l]
    std::vector<Vec> biases;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int parameter_count() const;
    Vec flatten() const;
    void unflatten(const Vec& flat);
};

/// Default hidden widths from the experiment protocol.
std::vector<int> default_mlp_sizes(int inputs, int outputs);

/// Scaled-uniform (fan-based) init, zero biases; deterministic per seed.
MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Test hook: all weights and biases zero, so the forward output is exactly
/// the zero correction.
MlpParams zero_mlp(const std::vector<int>& layer_sizes);

Vec mlp_forward(const MlpParams& params, const Vec& features);

/// Elman recurrent corrector: leaky-rectifier hidden state, tanh-squashed
/// output so it shares the bounded-correction contract with the MLP.
struct ElmanParams {
    Mat w_xh;  // hidden x input
    Mat w_hh;  // hidden x hidden
    Mat w_hy;  // output x hidden
    Vec b_h;
    Vec b_y;

    int input_size() const { return static_cast<int>(w_xh.cols()); }
    int hidden_size() const { return static_cast<int>(w_xh.rows()); }
    int output_size() const { return static_cast<int>(w_hy.rows()); }
    int parameter_count() const;
    Vec flatten() const;
    void unflatten(const Vec& flat);
};

ElmanParams init_elman(int inputs, int hidden, int outputs, std::uint64_t seed);
ElmanParams zero_elman(int inputs, int hidden, int outputs);

/// One recurrence: h = leaky_relu(W_xh x + W_hh h_prev + b_h),
/// correction = tanh(W_hy h + b_y). Returns (h, correction).
std::pair<Vec, Vec> rnn_step(const ElmanParams& params, const Vec& h_prev,
                             const Vec& features);

/// Scales used to map raw exogenous inputs onto the network's input range.
struct FeatureScale {
    double current_max = 1000.0;                                  // A
    double reference_temperature = ploss::kDefaultReferenceTemperature;  // K
    double feedback_temp_max = 1.0;                               // K, sensor's y_max
};

/// Network input: [I/I_max, (T_fb - T_ref)/y_max_fb, normalized ROM outputs,
/// principal components of the normalized ROM state]; 13 entries at the
/// default p = 8 with 3 components.
Vec assemble_features(const ploss::PlossInput& z, const Vec& rom_outputs_norm,
                      const Vec& rom_state_norm, const PcaBasis& pca,
                      const FeatureScale& scale);

/// Stateful correction function driven during closed-loop simulation.
class Corrector {
public:
    virtual ~Corrector() = default;
    virtual void reset() {}
    virtual Vec correct(const Vec& features, int step_index) = 0;
};

/// Zero correction; the hybrid model degenerates to the nominal cascade.
class ZeroCorrector final : public Corrector {
public:
    explicit ZeroCorrector(int channels) : channels_(channels) {}
    Vec correct(const Vec&, int) override { return Vec::Zero(channels_); }

private:
    int channels_;
};

class MlpCorrector final : public Corrector {
public:
    explicit MlpCorrector(const MlpParams& params) : params_(&params) {}
    Vec correct(const Vec& features, int) override {
        return mlp_forward(*params_, features);
    }

private:
    const MlpParams* params_;
};

/// Hidden state persists across steps of one simulation and resets with the
/// sequence.
class ElmanCorrector final : public Corrector {
public:
    explicit ElmanCorrector(const ElmanParams& params)
        : params_(&params), hidden_(Vec::Zero(params.hidden_size())) {}
    void reset() override { hidden_.setZero(); }
    Vec correct(const Vec& features, int) override {
        auto [h, correction] = rnn_step(*params_, hidden_, features);
        hidden_ = std::move(h);
        return correction;
    }

private:
    const ElmanParams* params_;
    Vec hidden_;
};

/// Testbed oracle: replays a precomputed per-step correction sequence
/// (rows = steps), e.g. the exact normalized loss gap.
class OracleCorrector final : public Corrector {
public:
    explicit OracleCorrector(Mat corrections) : corrections_(std::move(corrections)) {}
    Vec correct(const Vec&, int step_index) override {
        return corrections_.row(step_index).transpose();
    }

private:
    Mat corrections_;
};

}  // namespace lossid::net
