#pragma once

#include <cstdint>

#include "lossid/common.hpp"

namespace lossid::ploss {

inline constexpr double kDefaultReferenceTemperature = 298.15;  // K
inline constexpr double kTempCoeffLimit = 0.01;                 // 1/K, open bound

/// Per-channel coefficients of the static power-loss map,
/// u_j = r_j I^2 (1 + k_j (T_fb - T_ref)) + s_j |I|.
struct LossParams {
    Vec resistive;   // r_j, W/A^2, > 0
    Vec temp_coeff;  // k_j, 1/K, in (-0.01, 0.01)
    Vec linear;      // s_j, W/A, >= 0

    int channel_count() const { return static_cast<int>(resistive.size()); }
    void validate() const;

    /// All coefficients as one flat vector (r..., k..., s...).
    Vec flatten() const;
};

/// Electro-thermal operating point feeding the loss map.
struct PlossInput {
    double current = 0.0;                // A, any sign
    double feedback_temperature = kDefaultReferenceTemperature;  // K, absolute
    double reference_temperature = kDefaultReferenceTemperature; // K, constant
};

/// Evaluates the loss map; nonnegative anywhere |k_j (T_fb - T_ref)| < 1.
Vec eval(const LossParams& params, const PlossInput& z);

/// Draws phi = nominal + e with e ~ U([m - d, m + d]) per scalar, where
/// m = mean_frac * |nominal| and d = delta_frac * |nominal|. Results are
/// clamped back into the LossParams invariants.
LossParams perturb_loss_params(const LossParams& nominal, double mean_frac,
                               double delta_frac, std::uint64_t seed);

/// eval(true_p, z) - eval(nominal_p, z); the simulated testbed's oracle for
/// the per-step loss error the corrector must reproduce.
Vec true_loss_gap(const LossParams& true_p, const LossParams& nominal_p,
                  const PlossInput& z);

/// Max L2 norm of the gap over a grid sweep of the operating envelope
/// (|I| <= current_limit, |T_fb - T_ref| <= delta_t_limit). Recorded as the
/// nominal-confidence bound of an experiment.
double gap_bound(const LossParams& true_p, const LossParams& nominal_p,
                 double current_limit, double delta_t_limit);

/// Random nominal parameter set for m channels (experiment plumbing).
LossParams random_loss_params(int m, std::uint64_t seed);

}  // namespace lossid::ploss
