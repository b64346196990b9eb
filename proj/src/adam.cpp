#include "fedsynth/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsynth {

void AdamConfig::validate() const {
    if (!(step_size >= 0.0)) throw std::invalid_argument("AdamConfig: step_size must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("AdamConfig: beta1 in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("AdamConfig: beta2 in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("AdamConfig: epsilon must be > 0");
}

AdamState::AdamState(std::size_t param_count, AdamConfig config)
    : cfg_(config), m_(param_count, 0.0), v_(param_count, 0.0) {
    cfg_.validate();
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("AdamState::step: length mismatch: params " +
                                    std::to_string(params.size()) + ", grads " +
                                    std::to_string(grads.size()) + ", state " +
                                    std::to_string(m_.size()));
    }
    ++t_;
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double m_corr = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double v_corr = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
        const double m_hat = m_[i] / m_corr;
        const double v_hat = v_[i] / v_corr;
        params[i] -= cfg_.step_size * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
}

}  // namespace fedsynth
