#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashtran/dataset.hpp"
#include "hashtran/hashing.hpp"
#include "hashtran/nn/adam.hpp"
#include "hashtran/nn/network.hpp"
#include "hashtran/nn/rowwise.hpp"

namespace hashtran {

// Hashing layer + row-wise first layer (W_h) + mixing layer (W_c1), shared by a
// classifier head (W_c2, W_c3) and a DAE decoder (W_d, sigmoid over L*T bits).
struct HashTranModel {
    HashingTransform transform;
    nn::RowwiseFirstLayer encoder_rows;  // W_h
    nn::Network encoder_mix;             // W_c1, one ReLU layer
    nn::Network classifier;              // W_c2 (ReLU) ... W_c3 (identity, width 2)
    nn::Network decoder;                 // W_d, sigmoid; empty when the DAE is disabled
    double lambda_d = 0.0;
    double noise_eps = 0.0;              // noise scale parameter (flip budget analogue)
    std::optional<double> threshold;     // t_r; +inf when the DAE is disabled

    [[nodiscard]] bool has_dae() const noexcept { return !decoder.layers.empty(); }
    [[nodiscard]] std::size_t hash_width() const noexcept { return encoder_rows.input_dim(); }

    friend bool operator==(const HashTranModel &, const HashTranModel &) = default;
};

struct HashTranArch {
    std::size_t k1 = 16;                     // units per row-wise layer
    std::size_t mix = 64;                    // W_c1 width
    std::vector<std::size_t> head{32};       // hidden widths of the classifier head
};

// Random initialization; lambda_d == 0 leaves the decoder empty.
[[nodiscard]] HashTranModel make_hashtran(const HashingTransform &t, const HashTranArch &arch, double lambda_d,
                                          double noise_eps, std::uint64_t seed);

// All trainable parameter blocks: W_h rows, W_c1, head, decoder.
[[nodiscard]] std::vector<std::span<double>> parameters(HashTranModel &m);
[[nodiscard]] nn::Gradients zero_gradients(const HashTranModel &m);

// --- noise ------------------------------------------------------------------

struct NoiseSpec {
    double eps = 10;
    std::size_t n = 1024;
};

// p ~ max(0, Normal(0, (eps/n)^2)); flips ceil(L*T*p) distinct uniform positions.
[[nodiscard]] HashMatrix inject_noise(const HashMatrix &m, const NoiseSpec &spec, std::uint64_t seed);
// Same, with the per-call probability p supplied.
[[nodiscard]] HashMatrix flip_fraction(const HashMatrix &m, double p, Rng &rng);

// --- losses -----------------------------------------------------------------

struct Encoded {
    nn::Matrix hidden;  // output of W_c1
    nn::RowwiseCache rows;
    nn::NetworkCache mix;
};

nn::Matrix encode(const HashTranModel &m, const nn::Matrix &x, const nn::Dropout &dropout = {},
                  Encoded *cache = nullptr);

// Per-sample mean binary cross-entropy between the decoder output on `m` and `m`.
[[nodiscard]] double reconstruction_error(const HashTranModel &model, const HashMatrix &m);
[[nodiscard]] std::vector<double> reconstruction_errors(const HashTranModel &model, std::span<const HashMatrix> ms);

struct JointLossValue {
    double total = 0;
    double classification = 0;   // L_C, batch mean cross-entropy
    double reconstruction = 0;   // L_D, batch mean of per-sample element-mean BCE
};

// Loss = L_C(clean) + lambda_d * L_D(decoder(noisy) vs clean); accumulates the
// gradient of `total` into `grads` (layout of zero_gradients). Dropout seeds are
// derived from `dropout.seed` separately for the two passes.
JointLossValue joint_loss(const HashTranModel &model, const nn::Matrix &clean, const nn::Matrix &noisy,
                          std::span<const int> labels, const nn::Dropout &dropout, nn::Gradients &grads);

// --- training ---------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 128;
    double dropout = 0.4;
    nn::AdamConfig adam{};
    std::uint64_t seed = 0;
};

struct TrainHistory {
    std::vector<double> train_loss;      // mean total loss per epoch
    std::vector<double> valid_accuracy;  // clean, no rejection
    std::vector<double> valid_loss;      // clean classification cross-entropy
    std::size_t best_epoch = 0;
};

[[nodiscard]] HashTranModel train_hashtran(const Dataset &train, const Dataset &valid, HashTranModel init,
                                           const TrainConfig &cfg, TrainHistory *history = nullptr);

// --- lambda_D search ----------------------------------------------------------

// base^lo, base^(lo+1), ..., base^hi.
[[nodiscard]] std::vector<double> exponential_grid(double base, int lo, int hi);

struct LambdaSearch {
    double lambda_d = 0.0;               // chosen value
    std::vector<double> candidates;
    std::vector<double> valid_accuracy;  // best-epoch clean validation accuracy per candidate
};

// Trains one model per candidate and keeps the highest validation accuracy
// (ties: the earlier candidate).
[[nodiscard]] LambdaSearch search_lambda_d(const Dataset &train, const Dataset &valid, const HashingTransform &t,
                                           const HashTranArch &arch, double noise_eps,
                                           std::span<const double> candidates, const TrainConfig &cfg);

// --- calibration and prediction ---------------------------------------------

// Linear-interpolated quantile: position (N-1)*q between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double q);

// Sets t_r to the pass_rate quantile of clean validation reconstruction errors
// (+inf for a model without a DAE) and returns it.
double calibrate_threshold(HashTranModel &model, const Dataset &valid, double pass_rate);

enum class Verdict : std::uint8_t { benign = 0, malware = 1, rejected = 2 };
[[nodiscard]] const char *verdict_name(Verdict v) noexcept;

// Throws StateError when t_r has not been calibrated.
[[nodiscard]] Verdict predict_with_rejection(const HashTranModel &model, const BitVector &x);
[[nodiscard]] std::vector<Verdict> predict_with_rejection(const HashTranModel &model, std::span<const BitVector> xs);

// Class probabilities without the rejection filter.
[[nodiscard]] std::vector<double> hashtran_probabilities(const HashTranModel &model, const BitVector &x);

// --- checkpoint -------------------------------------------------------------

void write_hashtran(std::ostream &out, const HashTranModel &m);
[[nodiscard]] HashTranModel read_hashtran(std::istream &in);

} // namespace hashtran
