#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hashtran/nn/network.hpp"

namespace hashtran::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;
};

[[nodiscard]] AdamState make_adam(const AdamConfig &config, std::span<const std::span<double>> params);

// Bias-corrected Adam update applied in place. Throws DimensionError when the
// parameter, gradient, and moment shapes disagree.
void adam_step(AdamState &state, std::span<const std::span<double>> params, const Gradients &grads);

} // namespace hashtran::nn
