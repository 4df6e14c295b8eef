#include "hashtran/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hashtran/errors.hpp"
#include "hashtran/nn/kernels.hpp"

namespace hashtran::nn {

const char *activation_name(Activation a) noexcept {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    default: return "identity";
    }
}

Activation activation_from_name(const std::string &name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

DenseLayer DenseLayer::random(std::size_t in, std::size_t out, Activation act, Rng &rng) {
    if (in == 0 || out == 0) throw std::invalid_argument("DenseLayer: zero width");
    DenseLayer layer{in, out, act, std::vector<double>(in * out), std::vector<double>(out)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto &w : layer.weights) w = dist(rng);
    for (auto &b : layer.bias) b = dist(rng);
    return layer;
}

std::size_t Network::parameter_count() const noexcept {
    std::size_t c = 0;
    for (const auto &l : layers) c += l.weights.size() + l.bias.size();
    return c;
}

Network make_network(std::span<const std::size_t> widths, std::uint64_t seed, Activation last) {
    if (widths.size() < 2) throw std::invalid_argument("make_network: need at least input and output widths");
    Network net;
    Rng rng = make_rng(seed, {0x1a7e});
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool is_last = i + 2 == widths.size();
        net.layers.push_back(DenseLayer::random(widths[i], widths[i + 1], is_last ? last : Activation::relu, rng));
    }
    return net;
}

void validate(const Network &net) {
    if (net.layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto &l = net.layers[i];
        require_same_dim(l.weights.size(), l.in * l.out, "layer weights");
        require_same_dim(l.bias.size(), l.out, "layer bias");
        if (i > 0) require_same_dim(l.in, net.layers[i - 1].out, "layer chaining");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(l.weights.begin(), l.weights.end(), finite) ||
            !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
            throw std::invalid_argument("network has non-finite parameters");
        }
    }
}

std::vector<std::span<double>> parameters(Network &net) {
    std::vector<std::span<double>> out;
    for (auto &l : net.layers) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    return out;
}

std::vector<std::span<const double>> parameters(const Network &net) {
    std::vector<std::span<const double>> out;
    for (const auto &l : net.layers) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    return out;
}

void append_zero_gradients(const Network &net, Gradients &into) {
    for (const auto &l : net.layers) {
        into.emplace_back(l.weights.size(), 0.0);
        into.emplace_back(l.bias.size(), 0.0);
    }
}

Gradients zero_gradients(const Network &net) {
    Gradients g;
    append_zero_gradients(net, g);
    return g;
}

std::vector<double> dropout_mask(std::size_t width, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0,1)");
    std::vector<double> mask(width, 1.0);
    if (rate == 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - rate);
    Rng rng = make_rng(seed, {0xd40});
    for (auto &m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

namespace {

void activate(Matrix &m, Activation a) {
    switch (a) {
    case Activation::relu:
        for (auto &v : m.data) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::sigmoid:
        for (auto &v : m.data) v = 1.0 / (1.0 + std::exp(-v));
        break;
    case Activation::identity: break;
    }
}

// grad (w.r.t. activation output) -> grad w.r.t. pre-activation, in place.
void activation_backward(Matrix &grad, const Matrix &output, Activation a) {
    switch (a) {
    case Activation::relu:
        for (std::size_t i = 0; i < grad.data.size(); ++i) {
            if (!(output.data[i] > 0.0)) grad.data[i] = 0.0;
        }
        break;
    case Activation::sigmoid:
        for (std::size_t i = 0; i < grad.data.size(); ++i) {
            const double s = output.data[i];
            grad.data[i] *= s * (1.0 - s);
        }
        break;
    case Activation::identity: break;
    }
}

std::vector<std::size_t> shape_of(const Network &net) {
    std::vector<std::size_t> s;
    for (const auto &l : net.layers) {
        s.push_back(l.in);
        s.push_back(l.out);
    }
    return s;
}

} // namespace

Matrix forward_batch(const Network &net, const Matrix &x, const Dropout &dropout, NetworkCache *cache) {
    if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
    require_same_dim(x.cols, net.input_dim(), "forward input");
    for (double v : x.data) {
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    }
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
        cache->masks.clear();
        cache->shape = shape_of(net);
    }
    Matrix current = x;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto &layer = net.layers[li];
        Matrix out(current.rows, layer.out);
        kernels::affine(view(current), layer.weights.data(), layer.bias.data(), view(out));
        activate(out, layer.activation);

        Matrix mask;
        if (dropout.active() && layer.activation == Activation::relu) {
            mask = Matrix(out.rows, out.cols);
            Rng rng = make_rng(dropout.seed, {0xd40, li});
            const double keep_scale = 1.0 / (1.0 - dropout.rate);
            for (auto &m : mask.data) m = uniform01(rng) < dropout.rate ? 0.0 : keep_scale;
        }
        if (cache) {
            cache->inputs.push_back(std::move(current));
            cache->outputs.push_back(out);
            cache->masks.push_back(mask);
        }
        if (!mask.data.empty()) {
            for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
        }
        current = std::move(out);
    }
    return current;
}

Matrix backward_batch(const Network &net, const NetworkCache &cache, const Matrix &grad, GradientAt at,
                      std::span<std::vector<double>> grads, bool want_input_grad) {
    const std::size_t layers = net.layers.size();
    if (cache.shape != shape_of(net) || cache.inputs.size() != layers) {
        throw StateError("backward: cache does not belong to this network (stale cache)");
    }
    if (grads.size() < 2 * layers) throw std::invalid_argument("backward: gradient storage too small");
    const std::size_t batch = cache.inputs.front().rows;
    if (grad.rows != batch || grad.cols != net.output_dim()) throw DimensionError("backward: gradient shape");

    Matrix d = grad;
    for (std::size_t step = 0; step < layers; ++step) {
        const std::size_t li = layers - 1 - step;
        const auto &layer = net.layers[li];
        const bool at_pre = step == 0 && at == GradientAt::pre_activation;
        if (!at_pre) {
            const Matrix &mask = cache.masks[li];
            if (!mask.data.empty()) {
                for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= mask.data[i];
            }
            activation_backward(d, cache.outputs[li], layer.activation);
        }
        auto &gw = grads[2 * li];
        auto &gb = grads[2 * li + 1];
        require_same_dim(gw.size(), layer.weights.size(), "backward weight gradient");
        require_same_dim(gb.size(), layer.bias.size(), "backward bias gradient");
        kernels::accumulate_weight_grad(view(cache.inputs[li]), view(d), gw.data(), gb.data());
        if (li == 0 && !want_input_grad) return {};
        Matrix dx(batch, layer.in);
        kernels::input_grad(view(d), layer.weights.data(), view(dx));
        d = std::move(dx);
    }
    return d;
}

void softmax_rows(Matrix &logits) {
    for (std::size_t r = 0; r < logits.rows; ++r) {
        auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (auto &v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto &v : row) v /= sum;
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    Matrix m(1, logits.size());
    std::copy(logits.begin(), logits.end(), m.data.begin());
    softmax_rows(m);
    return m.data;
}

int classify(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("classify: empty probability vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<int>(best);
}

double cross_entropy(std::span<const double> probs, std::span<const double> onehot) {
    require_same_dim(probs.size(), onehot.size(), "cross_entropy");
    double loss = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        if (onehot[c] != 0.0) loss -= onehot[c] * std::log(std::max(probs[c], kLogClamp));
    }
    return loss;
}

double mean_cross_entropy(const Matrix &probs, std::span<const int> labels) {
    require_same_dim(probs.rows, labels.size(), "mean_cross_entropy");
    if (labels.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        total -= std::log(std::max(probs(r, static_cast<std::size_t>(labels[r])), kLogClamp));
    }
    return total / static_cast<double>(labels.size());
}

double binary_cross_entropy(std::span<const double> probs, std::span<const std::uint8_t> targets) {
    require_same_dim(probs.size(), targets.size(), "binary_cross_entropy");
    if (probs.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kLogClamp, 1.0 - kLogClamp);
        total -= targets[i] ? std::log(p) : std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

ForwardResult forward(const Network &net, std::span<const double> x, bool training, double dropout_rate,
                      std::uint64_t seed) {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0,1)");
    Matrix in(1, x.size());
    std::copy(x.begin(), x.end(), in.data.begin());
    ForwardResult result;
    const Dropout dropout{training ? dropout_rate : 0.0, seed};
    Matrix out = forward_batch(net, in, dropout, &result.cache);
    result.logits = out.data;
    softmax_rows(out);
    result.probabilities = std::move(out.data);
    return result;
}

Gradients backward(const Network &net, const NetworkCache &cache, std::span<const double> d_logits) {
    Gradients grads = zero_gradients(net);
    Matrix g(1, d_logits.size());
    std::copy(d_logits.begin(), d_logits.end(), g.data.begin());
    backward_batch(net, cache, g, GradientAt::pre_activation, grads, false);
    return grads;
}

std::vector<double> logits_of(const Network &net, std::span<const double> x) {
    Matrix in(1, x.size());
    std::copy(x.begin(), x.end(), in.data.begin());
    return forward_batch(net, in).data;
}

std::vector<double> probabilities_of(const Network &net, std::span<const double> x) {
    return softmax(logits_of(net, x));
}

std::vector<double> logit_gradient(const Network &net, std::span<const double> x, std::span<const double> coeffs) {
    require_same_dim(coeffs.size(), net.output_dim(), "logit_gradient coefficients");
    Matrix in(1, x.size());
    std::copy(x.begin(), x.end(), in.data.begin());
    NetworkCache cache;
    forward_batch(net, in, {}, &cache);
    Gradients scratch = zero_gradients(net);
    Matrix g(1, coeffs.size());
    std::copy(coeffs.begin(), coeffs.end(), g.data.begin());
    return backward_batch(net, cache, g, GradientAt::pre_activation, scratch, true).data;
}

Matrix input_jacobian(const Network &net, std::span<const double> x, bool post_softmax) {
    require_same_dim(x.size(), net.input_dim(), "input_jacobian");
    const std::size_t o = net.output_dim();
    Matrix in(1, x.size());
    std::copy(x.begin(), x.end(), in.data.begin());
    NetworkCache cache;
    Matrix logits = forward_batch(net, in, {}, &cache);
    const std::vector<double> z = softmax(logits.data);

    // Batch the o seed vectors as o rows of one backward pass.
    NetworkCache tiled = cache;
    for (auto &m : tiled.inputs) {
        Matrix t(o, m.cols);
        for (std::size_t r = 0; r < o; ++r) std::copy(m.data.begin(), m.data.end(), t.row(r).begin());
        m = std::move(t);
    }
    for (auto &m : tiled.outputs) {
        Matrix t(o, m.cols);
        for (std::size_t r = 0; r < o; ++r) std::copy(m.data.begin(), m.data.end(), t.row(r).begin());
        m = std::move(t);
    }
    Matrix seeds(o, o);
    for (std::size_t j = 0; j < o; ++j) {
        for (std::size_t k = 0; k < o; ++k) {
            seeds(j, k) = post_softmax ? z[j] * ((j == k ? 1.0 : 0.0) - z[k]) : (j == k ? 1.0 : 0.0);
        }
    }
    Gradients scratch = zero_gradients(net);
    return backward_batch(net, tiled, seeds, GradientAt::pre_activation, scratch, true);
}

} // namespace hashtran::nn
