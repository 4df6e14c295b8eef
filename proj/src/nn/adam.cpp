#include "hashtran/nn/adam.hpp"

#include <cmath>

#include "hashtran/errors.hpp"

namespace hashtran::nn {

AdamState make_adam(const AdamConfig &config, std::span<const std::span<double>> params) {
    AdamState state{config, {}, {}, 0};
    for (const auto &p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(AdamState &state, std::span<const std::span<double>> params, const Gradients &grads) {
    require_same_dim(params.size(), grads.size(), "adam_step blocks");
    require_same_dim(params.size(), state.first_moment.size(), "adam_step moments");
    for (std::size_t b = 0; b < params.size(); ++b) {
        require_same_dim(params[b].size(), grads[b].size(), "adam_step block size");
        require_same_dim(params[b].size(), state.first_moment[b].size(), "adam_step moment size");
    }
    ++state.step;
    const auto &c = state.config;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        const auto &g = grads[b];
        auto &m = state.first_moment[b];
        auto &v = state.second_moment[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

} // namespace hashtran::nn
