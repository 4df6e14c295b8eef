#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hashtran/baselines.hpp"
#include "hashtran/dataset.hpp"
#include "hashtran/nn/network.hpp"

namespace hashtran {

// All attacks push a malware sample (label 1) toward the benign class by
// inserting features: x' >= x coordinate-wise and (x' XOR x) lies in the mask.
struct AttackResult {
    BitVector original;
    BitVector adversarial;
    std::size_t flips = 0;
    bool evaded = false;  // surrogate now says benign
    std::size_t iterations = 0;

    friend bool operator==(const AttackResult &, const AttackResult &) = default;
};

// True when `r` respects insertion-only and mask membership, and, if `eps` is
// given, the flip budget.
[[nodiscard]] bool satisfies_constraints(const AttackResult &r, const PerturbationMask &mask,
                                         std::size_t eps = static_cast<std::size_t>(-1));

// Attacker's own plain classifier, trained like the standard DNN under its own
// config (the experiments use a different seed and no dropout).
[[nodiscard]] nn::Network train_surrogate(const Dataset &train, const Dataset &valid, const DnnArch &arch,
                                          const TrainConfig &cfg, TrainHistory *history = nullptr);

// Surrogate verdict helpers.
[[nodiscard]] double malware_probability(const nn::Network &net, const BitVector &x);
[[nodiscard]] bool classified_malware(const nn::Network &net, const BitVector &x);

// Test-set malware the surrogate flags as malicious; up to `count` of them,
// chosen by a seeded shuffle and returned in ascending index order.
[[nodiscard]] std::vector<std::size_t> select_attack_seeds(const nn::Network &surrogate, const Dataset &pool,
                                                           std::size_t count, std::uint64_t seed);

// Saliency map toward class 0 for a two-class softmax network:
// S[i] = dZ0/dx_i * |dZ1/dx_i| when dZ0/dx_i > 0 and dZ1/dx_i < 0, else 0.
[[nodiscard]] std::vector<double> saliency_map(const nn::Network &net, const BitVector &x);

// Greedy saliency flips; stops once the surrogate's benign probability reaches
// `confidence` (0.5 = plain evasion), after `eps` flips, or when no admissible
// feature has positive saliency. A flip is accepted only if it does not lower
// the surrogate's benign probability (next candidate otherwise).
[[nodiscard]] AttackResult jsma_attack(const nn::Network &surrogate, const BitVector &x,
                                       const PerturbationMask &mask, std::size_t eps, double confidence = 0.5);

struct GdkdeParams {
    double lambda = 10.0;
    double sigma = 0.0;  // 0 selects n / 10
};

// Objective g(x') - (lambda/N_t) * sum_r exp(-|x' - r|_1 / sigma) with g the
// negative benign logit. Greedy: rank admissible flips by the linearized g
// change plus the exact kernel change, take the best one that lowers the exact
// objective without lowering the benign probability; stop after eps flips or
// when no flip improves.
[[nodiscard]] double gdkde_objective(const nn::Network &surrogate, const BitVector &x,
                                     std::span<const BitVector> benign_refs, const GdkdeParams &params);
[[nodiscard]] AttackResult gdkde_attack(const nn::Network &surrogate, const BitVector &x,
                                        std::span<const BitVector> benign_refs, const PerturbationMask &mask,
                                        std::size_t eps, const GdkdeParams &params);

struct CwParams {
    double lambda = 20.0;  // weight of the margin term
    double iota = 20.0;    // confidence: the margin term saturates at -iota
    double step = 0.05;    // gradient step size
    std::size_t steps = 200;
};

// max(clip(x', 0, 1), x) on masked coordinates, x elsewhere.
[[nodiscard]] std::vector<double> cw_project(std::span<const double> candidate, const BitVector &x,
                                             const PerturbationMask &mask);
// f(x') = max(F_1 - F_0, -iota) for a malware source.
[[nodiscard]] double cw_margin(const nn::Network &surrogate, std::span<const double> x, double iota);
// Descends |delta|^2 + lambda * f with fixed steps, projecting after each one;
// every iterate is discretized (round >= 0.5, keep the eps largest) and the
// binary candidate with the lowest surrogate margin is returned.
[[nodiscard]] AttackResult cw_attack_binary(const nn::Network &surrogate, const BitVector &x,
                                            const PerturbationMask &mask, std::size_t eps, const CwParams &params);

// Candidates x OR (b AND mask) for `guides` benign samples drawn from the pool;
// keeps the one with the lowest surrogate malware probability (ties: fewer
// insertions, then lower pool index).
[[nodiscard]] AttackResult mimicry_attack(const nn::Network &surrogate, const BitVector &x,
                                          std::span<const BitVector> benign_pool, const PerturbationMask &mask,
                                          std::size_t guides, std::uint64_t seed);

// --- adversarial set files ----------------------------------------------------
// Dataset header, then {"ones": [...], "label": 1, "source_index": i, "attack": "jsma", "flips": k}.

struct AdversarialSample {
    BitVector features;
    std::size_t source_index = 0;
    std::string attack;
    std::size_t flips = 0;
    bool evaded = false;

    friend bool operator==(const AdversarialSample &, const AdversarialSample &) = default;
};

struct AdversarialSet {
    std::size_t n = 0;
    std::string name;
    std::vector<AdversarialSample> samples;

    friend bool operator==(const AdversarialSet &, const AdversarialSet &) = default;
};

void write_adversarial_set(std::ostream &out, const AdversarialSet &set);
[[nodiscard]] AdversarialSet read_adversarial_set(std::istream &in);

} // namespace hashtran
