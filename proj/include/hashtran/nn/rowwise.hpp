#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hashtran/hashing.hpp"
#include "hashtran/nn/network.hpp"

namespace hashtran::nn {

// First layer for matrix inputs: row r of an L x T input feeds only its own
// ReLU layer (T -> units); the L outputs are concatenated, so the layer emits
// L * units activations. Inputs are batches of flattened matrices (B x L*T).
struct RowwiseFirstLayer {
    std::size_t rows = 0;
    std::size_t width = 0;
    std::size_t units = 0;
    std::vector<DenseLayer> per_row;

    static RowwiseFirstLayer random(std::size_t rows, std::size_t width, std::size_t units, Rng &rng);

    [[nodiscard]] std::size_t input_dim() const noexcept { return rows * width; }
    [[nodiscard]] std::size_t output_dim() const noexcept { return rows * units; }

    friend bool operator==(const RowwiseFirstLayer &, const RowwiseFirstLayer &) = default;
};

[[nodiscard]] std::vector<std::span<double>> parameters(RowwiseFirstLayer &layer);
[[nodiscard]] std::vector<std::span<const double>> parameters(const RowwiseFirstLayer &layer);
void append_zero_gradients(const RowwiseFirstLayer &layer, Gradients &into);

struct RowwiseCache {
    Matrix input;
    Matrix output;  // post-ReLU, before dropout
    Matrix mask;    // empty without dropout
};

// Returns the post-dropout activations (B x L*units).
Matrix rowwise_forward_batch(const RowwiseFirstLayer &layer, const Matrix &x, const Dropout &dropout = {},
                             RowwiseCache *cache = nullptr);

// `grad` is w.r.t. the post-dropout output. Accumulates into grads[0 .. 2*rows)
// and returns d/d(input) when requested.
Matrix rowwise_backward_batch(const RowwiseFirstLayer &layer, const RowwiseCache &cache, const Matrix &grad,
                              std::span<std::vector<double>> grads, bool want_input_grad);

// Flattened 0/1 copies of hash matrices, one row per sample.
[[nodiscard]] Matrix flatten(std::span<const HashMatrix> ms);
[[nodiscard]] Matrix flatten(const HashMatrix &m);

// softmax(trunk(rowwise(M))) in evaluation mode.
[[nodiscard]] std::vector<double> rowwise_forward(const RowwiseFirstLayer &first, const Network &trunk,
                                                  const HashMatrix &m);

} // namespace hashtran::nn
