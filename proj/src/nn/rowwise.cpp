#include "hashtran/nn/rowwise.hpp"

#include <stdexcept>
#include <utility>

#include "hashtran/errors.hpp"
#include "hashtran/nn/kernels.hpp"

namespace hashtran::nn {

RowwiseFirstLayer RowwiseFirstLayer::random(std::size_t rows, std::size_t width, std::size_t units, Rng &rng) {
    if (rows == 0) throw std::invalid_argument("RowwiseFirstLayer: zero rows");
    RowwiseFirstLayer layer{rows, width, units, {}};
    layer.per_row.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) layer.per_row.push_back(DenseLayer::random(width, units, Activation::relu, rng));
    return layer;
}

std::vector<std::span<double>> parameters(RowwiseFirstLayer &layer) {
    std::vector<std::span<double>> out;
    for (auto &l : layer.per_row) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    return out;
}

std::vector<std::span<const double>> parameters(const RowwiseFirstLayer &layer) {
    std::vector<std::span<const double>> out;
    for (const auto &l : layer.per_row) {
        out.emplace_back(l.weights);
        out.emplace_back(l.bias);
    }
    return out;
}

void append_zero_gradients(const RowwiseFirstLayer &layer, Gradients &into) {
    for (const auto &l : layer.per_row) {
        into.emplace_back(l.weights.size(), 0.0);
        into.emplace_back(l.bias.size(), 0.0);
    }
}

Matrix rowwise_forward_batch(const RowwiseFirstLayer &layer, const Matrix &x, const Dropout &dropout,
                             RowwiseCache *cache) {
    require_same_dim(x.cols, layer.input_dim(), "rowwise input");
    require_same_dim(layer.per_row.size(), layer.rows, "rowwise layer count");
    Matrix out(x.rows, layer.output_dim());
    for (std::size_t r = 0; r < layer.rows; ++r) {
        const auto &l = layer.per_row[r];
        kernels::affine(columns(x, r * layer.width, layer.width), l.weights.data(), l.bias.data(),
                        columns(out, r * layer.units, layer.units));
    }
    for (auto &v : out.data) v = v > 0.0 ? v : 0.0;

    Matrix mask;
    if (dropout.active()) {
        mask = Matrix(out.rows, out.cols);
        Rng rng = make_rng(dropout.seed, {0xd41});
        const double keep_scale = 1.0 / (1.0 - dropout.rate);
        for (auto &m : mask.data) m = uniform01(rng) < dropout.rate ? 0.0 : keep_scale;
    }
    if (cache) {
        cache->input = x;
        cache->output = out;
        cache->mask = mask;
    }
    if (!mask.data.empty()) {
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    }
    return out;
}

Matrix rowwise_backward_batch(const RowwiseFirstLayer &layer, const RowwiseCache &cache, const Matrix &grad,
                              std::span<std::vector<double>> grads, bool want_input_grad) {
    if (cache.input.cols != layer.input_dim() || cache.output.cols != layer.output_dim()) {
        throw StateError("rowwise backward: stale cache");
    }
    if (grad.rows != cache.output.rows || grad.cols != layer.output_dim()) {
        throw DimensionError("rowwise backward: gradient shape");
    }
    if (grads.size() < 2 * layer.rows) throw std::invalid_argument("rowwise backward: gradient storage too small");
    Matrix d = grad;
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        if (!cache.mask.data.empty()) d.data[i] *= cache.mask.data[i];
        if (!(cache.output.data[i] > 0.0)) d.data[i] = 0.0;
    }
    Matrix dx;
    if (want_input_grad) dx = Matrix(grad.rows, layer.input_dim());
    for (std::size_t r = 0; r < layer.rows; ++r) {
        const auto &l = layer.per_row[r];
        const auto dy = columns(std::as_const(d), r * layer.units, layer.units);
        kernels::accumulate_weight_grad(columns(cache.input, r * layer.width, layer.width), dy,
                                        grads[2 * r].data(), grads[2 * r + 1].data());
        if (want_input_grad) {
            kernels::input_grad(dy, l.weights.data(), columns(dx, r * layer.width, layer.width));
        }
    }
    return dx;
}

Matrix flatten(std::span<const HashMatrix> ms) {
    if (ms.empty()) return {};
    const std::size_t w = ms.front().bits.size();
    Matrix out(ms.size(), w);
    for (std::size_t s = 0; s < ms.size(); ++s) {
        require_same_dim(ms[s].bits.size(), w, "flatten");
        for (std::size_t i = 0; i < w; ++i) out(s, i) = ms[s].bits[i];
    }
    return out;
}

Matrix flatten(const HashMatrix &m) { return flatten(std::span<const HashMatrix>(&m, 1)); }

std::vector<double> rowwise_forward(const RowwiseFirstLayer &first, const Network &trunk, const HashMatrix &m) {
    if (m.rows != first.rows || m.cols != first.width) throw DimensionError("rowwise_forward: matrix shape");
    Matrix logits = forward_batch(trunk, rowwise_forward_batch(first, flatten(m)));
    softmax_rows(logits);
    return logits.data;
}

} // namespace hashtran::nn
