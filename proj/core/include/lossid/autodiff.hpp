#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "lossid/common.hpp"
#include "lossid/loss.hpp"
#include "lossid/net.hpp"
#include "lossid/rom.hpp"

namespace lossid::autodiff {

/// One-step training sample for the feedforward corrector. The stored state
/// and features come from the closed-loop trajectory of some past parameter
/// snapshot; they are constants during differentiation.
struct OneStepSample {
    Vec features;     // network input
    Vec u_nom_norm;   // normalized nominal losses at this step
    Vec x_norm;       // normalized hybrid state at this step
    Vec y_next_norm;  // normalized ground-truth output at the next step
    int epoch_tag = 0;  // provenance: snapshot epoch that produced the trajectory
};

/// Length-S training sequence for the recurrent corrector. The state
/// trajectory is re-unrolled with the current parameters; only the initial
/// state and the exogenous inputs are stored.
struct SequenceSample {
    Mat exo;          // S x 2, normalized exogenous features (current, fb temp)
    Mat u_nom_norm;   // S x m
    Mat y_next_norm;  // S x p, targets, row k pairs with the state after step k
    Vec x0_norm;      // n, initial normalized state
    int epoch_tag = 0;
};

/// Loss value with exact reverse-mode gradients through the cascade.
struct CascadeGradients {
    double loss = 0.0;
    LossTerms terms;            // batch-mean decomposition
    Vec wrt_params;             // flat, aligned with flatten() of the net
    Vec input_adjoint_abs_sum;  // m, sum over samples/steps of |dl/du| via the ROM path
    long adjoint_count = 0;     // samples*steps behind the sum
};

/// Mean |dl/du_j| per channel; the adjoint is taken at the ROM input and
/// counts only the path through the thermal dynamics, so a channel with a
/// zero Bd column gets exactly zero.
inline Vec mean_input_adjoint(const CascadeGradients& g) {
    return g.adjoint_count > 0 ? Vec(g.input_adjoint_abs_sum / double(g.adjoint_count))
                               : g.input_adjoint_abs_sum;
}

/// Reverse-mode pass for a batch of one-step samples through
/// features -> MLP -> corrected losses -> one ROM step -> output -> loss.
/// Throws NumericalError (with the term breakdown) on non-finite results.
CascadeGradients backward_cascade_fnn(const rom::DiscreteRom& nrom,
                                      const net::MlpParams& params,
                                      std::span<const OneStepSample> batch,
                                      const LossWeights& weights);

/// Forward-only batch loss (validation path).
LossTerms forward_cascade_fnn(const rom::DiscreteRom& nrom,
                              const net::MlpParams& params,
                              std::span<const OneStepSample> batch);

/// Backpropagation through time over whole sequences: gradients flow through
/// both the ROM recursion and the hidden-state recursion.
CascadeGradients backward_cascade_rnn(const rom::DiscreteRom& nrom,
                                      const net::ElmanParams& params,
                                      const net::PcaBasis& pca,
                                      std::span<const SequenceSample> batch,
                                      const LossWeights& weights);

LossTerms forward_cascade_rnn(const rom::DiscreteRom& nrom,
                              const net::ElmanParams& params,
                              const net::PcaBasis& pca,
                              std::span<const SequenceSample> batch);

/// Central-difference check of an analytic gradient over a random subset of
/// coordinates (all of them if the point is small). Returns the largest
/// relative discrepancy |analytic - numeric| / max(1, |analytic|, |numeric|).
double finite_diff_check(const std::function<double(const Vec&)>& f, const Vec& point,
                         const Vec& analytic_grad, double step, int max_coords,
                         std::uint64_t seed);

}  // namespace lossid::autodiff
