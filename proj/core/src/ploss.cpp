#include "lossid/ploss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lossid::ploss {

namespace {
constexpr double kTempCoeffMargin = 1e-6;
}

void LossParams::validate() const {
    const int m = channel_count();
    if (m <= 0) throw ConfigError("loss params: no channels");
    if (temp_coeff.size() != m || linear.size() != m)
        throw ConfigError("loss params: coefficient length mismatch");
    for (int j = 0; j < m; ++j) {
        if (!(resistive[j] > 0.0) || !std::isfinite(resistive[j]))
            throw ConfigError("loss params: resistive coefficient " + std::to_string(j) +
                              " must be finite and > 0");
        if (!(linear[j] >= 0.0) || !std::isfinite(linear[j]))
            throw ConfigError("loss params: linear coefficient " + std::to_string(j) +
                              " must be finite and >= 0");
        if (!(std::abs(temp_coeff[j]) < kTempCoeffLimit))
            throw ConfigError("loss params: temperature coefficient " + std::to_string(j) +
                              " must lie in (-0.01, 0.01)");
    }
}

Vec LossParams::flatten() const {
    const int m = channel_count();
    Vec out(3 * m);
    out.segment(0, m) = resistive;
    out.segment(m, m) = temp_coeff;
    out.segment(2 * m, m) = linear;
    return out;
}

Vec eval(const LossParams& params, const PlossInput& z) {
    const double i2 = z.current * z.current;
    const double abs_i = std::abs(z.current);
    const double dt = z.feedback_temperature - z.reference_temperature;
    return params.resistive.cwiseProduct(
               (1.0 + dt * params.temp_coeff.array()).matrix()) * i2 +
           params.linear * abs_i;
}

LossParams perturb_loss_params(const LossParams& nominal, double mean_frac,
                               double delta_frac, std::uint64_t seed) {
    if (delta_frac < 0.0) throw ConfigError("perturb_loss_params: delta must be >= 0");
    nominal.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](double v) {
        const double mid = mean_frac * std::abs(v);
        const double half = delta_frac * std::abs(v);
        return v + mid + (2.0 * unit(rng) - 1.0) * half;
    };

    LossParams out = nominal;
    for (int j = 0; j < out.channel_count(); ++j) {
        out.resistive[j] = std::max(draw(nominal.resistive[j]),
                                    1e-12 * std::abs(nominal.resistive[j]));
        out.temp_coeff[j] = std::clamp(draw(nominal.temp_coeff[j]),
                                       -kTempCoeffLimit + kTempCoeffMargin,
                                       kTempCoeffLimit - kTempCoeffMargin);
        out.linear[j] = std::max(draw(nominal.linear[j]), 0.0);
    }
    out.validate();
    return out;
}

Vec true_loss_gap(const LossParams& true_p, const LossParams& nominal_p,
                  const PlossInput& z) {
    return eval(true_p, z) - eval(nominal_p, z);
}

double gap_bound(const LossParams& true_p, const LossParams& nominal_p,
                 double current_limit, double delta_t_limit) {
    double worst = 0.0;
    const int current_steps = 21;
    const int temp_steps = 9;
    for (int a = 0; a < current_steps; ++a) {
        const double current =
            -current_limit + 2.0 * current_limit * a / (current_steps - 1);
        for (int b = 0; b < temp_steps; ++b) {
            PlossInput z;
            z.current = current;
            z.feedback_temperature = z.reference_temperature - delta_t_limit +
                                     2.0 * delta_t_limit * b / (temp_steps - 1);
            worst = std::max(worst, true_loss_gap(true_p, nominal_p, z).norm());
        }
    }
    return worst;
}

LossParams random_loss_params(int m, std::uint64_t seed) {
    if (m <= 0) throw ConfigError("random_loss_params: need m > 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) {
        return lo * std::exp(unit(rng) * std::log(hi / lo));
    };
    LossParams out;
    out.resistive.resize(m);
    out.temp_coeff.resize(m);
    out.linear.resize(m);
    for (int j = 0; j < m; ++j) {
        out.resistive[j] = log_uniform(8e-5, 3.2e-4);
        out.temp_coeff[j] = -0.003 + 0.006 * unit(rng);
        out.linear[j] = log_uniform(0.01, 0.04);
    }
    out.validate();
    return out;
}

}  // namespace lossid::ploss
