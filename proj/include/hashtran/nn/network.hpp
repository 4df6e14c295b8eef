#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hashtran/nn/matrix.hpp"
#include "hashtran/random.hpp"

namespace hashtran::nn {

enum class Activation : std::uint8_t { identity, relu, sigmoid };

[[nodiscard]] const char *activation_name(Activation a) noexcept;
[[nodiscard]] Activation activation_from_name(const std::string &name);

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::identity;
    std::vector<double> weights;  // in x out, input-major
    std::vector<double> bias;     // out

    // Uniform in [-1/sqrt(in), 1/sqrt(in)] for weights and biases.
    static DenseLayer random(std::size_t in, std::size_t out, Activation act, Rng &rng);

    [[nodiscard]] double &weight(std::size_t i, std::size_t o) noexcept { return weights[i * out + o]; }
    [[nodiscard]] double weight(std::size_t i, std::size_t o) const noexcept { return weights[i * out + o]; }

    friend bool operator==(const DenseLayer &, const DenseLayer &) = default;
};

// Feed-forward stack. The last layer's pre-activation is the network's F(x);
// classifier networks end in an identity layer of width 2 and are read through softmax.
struct Network {
    std::vector<DenseLayer> layers;

    [[nodiscard]] std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().in; }
    [[nodiscard]] std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().out; }
    [[nodiscard]] std::size_t parameter_count() const noexcept;

    friend bool operator==(const Network &, const Network &) = default;
};

// widths = {input, hidden..., output}; ReLU hidden layers, `last` on the output layer.
[[nodiscard]] Network make_network(std::span<const std::size_t> widths, std::uint64_t seed,
                                   Activation last = Activation::identity);
void validate(const Network &net);

// Parameter blocks in a fixed order: W0, b0, W1, b1, ...
using Gradients = std::vector<std::vector<double>>;
[[nodiscard]] std::vector<std::span<double>> parameters(Network &net);
[[nodiscard]] std::vector<std::span<const double>> parameters(const Network &net);
[[nodiscard]] Gradients zero_gradients(const Network &net);
void append_zero_gradients(const Network &net, Gradients &into);

// Dropout follows every ReLU in training mode (inverted scaling, so evaluation
// applies no mask). rate == 0 disables it.
struct Dropout {
    double rate = 0.0;
    std::uint64_t seed = 0;
    [[nodiscard]] bool active() const noexcept { return rate > 0.0; }
};

// Binary keep mask scaled by 1/(1-rate). Throws unless rate is in [0, 1).
[[nodiscard]] std::vector<double> dropout_mask(std::size_t width, double rate, std::uint64_t seed);

struct NetworkCache {
    std::vector<Matrix> inputs;   // input fed to each layer
    std::vector<Matrix> outputs;  // post-activation output of each layer (before dropout)
    std::vector<Matrix> masks;    // dropout mask per layer (empty when none)
    std::vector<std::size_t> shape;
};

// Returns the post-activation, post-dropout output of the last layer.
Matrix forward_batch(const Network &net, const Matrix &x, const Dropout &dropout = {}, NetworkCache *cache = nullptr);

enum class GradientAt : std::uint8_t {
    pre_activation,  // gradient w.r.t. the last layer's pre-activation (logits)
    output,          // gradient w.r.t. the last layer's post-dropout output
};

// Accumulates parameter gradients into grads[0 .. 2*layers) and returns
// d(loss)/d(input) when `want_input_grad` is set (otherwise an empty matrix).
// Throws StateError if the cache does not match the network.
Matrix backward_batch(const Network &net, const NetworkCache &cache, const Matrix &grad, GradientAt at,
                      std::span<std::vector<double>> grads, bool want_input_grad);

// --- softmax / losses ----------------------------------------------------------

void softmax_rows(Matrix &logits);
[[nodiscard]] std::vector<double> softmax(std::span<const double> logits);

// Index of the largest probability; ties resolve to the lower index.
[[nodiscard]] int classify(std::span<const double> probs);

inline constexpr double kLogClamp = 1e-12;

// -sum_c y_c ln(max(p_c, 1e-12)).
[[nodiscard]] double cross_entropy(std::span<const double> probs, std::span<const double> onehot);
// Mean of per-row cross entropy against integer labels.
[[nodiscard]] double mean_cross_entropy(const Matrix &probs, std::span<const int> labels);

// Mean over elements of -[t ln p + (1-t) ln(1-p)] with p clamped to [1e-12, 1-1e-12].
[[nodiscard]] double binary_cross_entropy(std::span<const double> probs, std::span<const std::uint8_t> targets);

// --- single-sample API ----------------------------------------------------------

struct ForwardResult {
    std::vector<double> probabilities;
    std::vector<double> logits;
    NetworkCache cache;
};

[[nodiscard]] ForwardResult forward(const Network &net, std::span<const double> x, bool training = false,
                                    double dropout_rate = 0.0, std::uint64_t seed = 0);

// Parameter gradients for one cached forward pass, given d(loss)/d(logits).
[[nodiscard]] Gradients backward(const Network &net, const NetworkCache &cache, std::span<const double> d_logits);

[[nodiscard]] std::vector<double> logits_of(const Network &net, std::span<const double> x);
[[nodiscard]] std::vector<double> probabilities_of(const Network &net, std::span<const double> x);

// o x n matrix J[j][i] = dZ_j/dx_i (softmax outputs) or dF_j/dx_i (logits).
[[nodiscard]] Matrix input_jacobian(const Network &net, std::span<const double> x, bool post_softmax = true);

// Gradient of sum_j coeffs[j] * F_j(x) with respect to x.
[[nodiscard]] std::vector<double> logit_gradient(const Network &net, std::span<const double> x,
                                                 std::span<const double> coeffs);

} // namespace hashtran::nn
