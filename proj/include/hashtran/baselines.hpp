#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashtran/dataset.hpp"
#include "hashtran/model.hpp"
#include "hashtran/nn/network.hpp"

namespace hashtran {

// Plain classifier on raw features: n -> hidden... -> 2.
struct DnnArch {
    std::vector<std::size_t> hidden{256, 64, 32};
};

[[nodiscard]] nn::Network make_dnn(std::size_t n, const DnnArch &arch, std::uint64_t seed);

// Extra training samples for one epoch, generated against the current network.
using Augmenter = std::function<std::vector<LabeledSample>(const nn::Network &, std::size_t epoch)>;

struct FitOptions {
    // RFN: nullify a fresh random subset of every training input.
    std::optional<std::pair<double, double>> nullify;  // (mean, stddev) of the rate
    Augmenter augment;                                 // adversarial training
    double augment_weight = 1.0;                       // lambda on augmented terms; 0 skips generation
};

// Mini-batch Adam on the (weighted) cross-entropy; keeps the epoch with the best
// clean validation accuracy.
[[nodiscard]] nn::Network fit_network(nn::Network init, const Dataset &train, const Dataset &valid,
                                      const TrainConfig &cfg, const FitOptions &opt = {},
                                      TrainHistory *history = nullptr);

[[nodiscard]] nn::Network train_standard_dnn(const Dataset &train, const Dataset &valid, const DnnArch &arch,
                                             const TrainConfig &cfg, TrainHistory *history = nullptr);

// --- random feature nullification --------------------------------------------

struct RfnModel {
    nn::Network network;
    double mean = 0.3;
    double stddev = 0.05;

    friend bool operator==(const RfnModel &, const RfnModel &) = default;
};

// p ~ Normal(mean, stddev^2) clamped to [0,1]; ceil(n*p) distinct coordinates zeroed.
[[nodiscard]] std::vector<double> rfn_nullify(const BitVector &x, double mean, double stddev, std::uint64_t seed);

[[nodiscard]] RfnModel train_rfn(const Dataset &train, const Dataset &valid, const DnnArch &arch,
                                 const TrainConfig &cfg, double mean = 0.3, double stddev = 0.05,
                                 TrainHistory *history = nullptr);

// One nullification draw per query.
[[nodiscard]] int rfn_predict(const RfnModel &model, const BitVector &x, std::uint64_t seed);

// --- adversarial training ------------------------------------------------------

struct AdversarialTrainingConfig {
    std::size_t eps = 8;       // JSMA flip budget
    double lambda = 1.0;       // weight of adversarial terms
    double subsample = 0.1;    // fraction of training malware attacked each epoch
};

[[nodiscard]] nn::Network train_adversarial(const Dataset &train, const Dataset &valid, const PerturbationMask &mask,
                                            const DnnArch &arch, const TrainConfig &cfg,
                                            const AdversarialTrainingConfig &adv, TrainHistory *history = nullptr);

// (sum_clean CE + lambda * sum_adv CE) / (N1 + lambda * N_adv); adversarial samples carry label 1.
[[nodiscard]] double mixed_adversarial_loss(const nn::Network &net, const Dataset &clean,
                                            std::span<const BitVector> adversarial, double lambda);

// --- DNN with a DAE on raw features (no hashing) ----------------------------------

[[nodiscard]] HashTranModel train_dnn_dae(const Dataset &train, const Dataset &valid, const DnnArch &arch,
                                          double lambda_d, double noise_eps, const TrainConfig &cfg,
                                          TrainHistory *history = nullptr);

// --- checkpoints ---------------------------------------------------------------
// Header {"format": "hashtran-checkpoint", "kind": "dnn"|"rfn", ...} then layer records.

void write_dnn(std::ostream &out, const nn::Network &net, const std::string &kind = "dnn");
[[nodiscard]] nn::Network read_dnn(std::istream &in);
void write_rfn(std::ostream &out, const RfnModel &m);
[[nodiscard]] RfnModel read_rfn(std::istream &in);

} // namespace hashtran
