#pragma once

#include <cmath>

#include "lossid/common.hpp"

namespace lossid {

/// Weights of the physics-informed training loss; zeta is the recorded
/// nominal-confidence bound (metadata, not a term weight).
struct LossWeights {
    double alpha = 1.0;   // negativity penalty weight
    double beta = 1e-3;   // correction-norm weight
    double zeta = 0.0;    // nominal-confidence bound, metadata

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || !std::isfinite(alpha) || !std::isfinite(beta))
            throw ConfigError("loss weights: alpha and beta must be finite and >= 0");
    }
};

/// One-sided quadratic penalty: sum of u_i^2 over negative components.
inline double negativity_penalty(const Vec& u) {
    double penalty = 0.0;
    for (int i = 0; i < u.size(); ++i)
        if (u[i] < 0.0) penalty += u[i] * u[i];
    return penalty;
}

struct LossTerms {
    double mse = 0.0;              // mean squared output error
    double penalty = 0.0;          // negativity penalty, unweighted
    double correction_norm = 0.0;  // L2 norm of the correction, unweighted

    double total(const LossWeights& w) const {
        return mse + w.alpha * penalty + w.beta * correction_norm;
    }
    LossTerms& operator+=(const LossTerms& o) {
        mse += o.mse;
        penalty += o.penalty;
        correction_norm += o.correction_norm;
        return *this;
    }
    LossTerms& operator*=(double s) {
        mse *= s;
        penalty *= s;
        correction_norm *= s;
        return *this;
    }
};

/// Per-sample loss decomposition; all quantities in normalized units.
inline LossTerms loss_terms(const Vec& y_target, const Vec& y_pred,
                            const Vec& u_corrected, const Vec& correction) {
    LossTerms t;
    t.mse = (y_pred - y_target).squaredNorm() / double(y_target.size());
    t.penalty = negativity_penalty(u_corrected);
    t.correction_norm = correction.norm();
    return t;
}

/// MSE(y, y_hat) + alpha * negativity penalty + beta * ||correction||_2.
inline double physics_loss(const Vec& y_target, const Vec& y_pred,
                           const Vec& u_corrected, const Vec& correction,
                           const LossWeights& weights) {
    return loss_terms(y_target, y_pred, u_corrected, correction).total(weights);
}

}  // namespace lossid
