#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hashtran/bitvector.hpp"

namespace hashtran {

inline constexpr int kBenign = 0;
inline constexpr int kMalware = 1;

struct LabeledSample {
    BitVector features;
    int label = kBenign;

    friend bool operator==(const LabeledSample &, const LabeledSample &) = default;
};

struct Dataset {
    std::size_t n = 0;
    std::string name;
    std::vector<LabeledSample> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] std::size_t count_label(int label) const noexcept;
    // Throws DimensionError / invalid_argument if an invariant is broken.
    void validate() const;

    friend bool operator==(const Dataset &, const Dataset &) = default;
};

// Features an attacker may insert (0 -> 1). Nothing else may change.
struct PerturbationMask {
    BitVector insertable;

    [[nodiscard]] std::size_t n() const noexcept { return insertable.size(); }
    [[nodiscard]] bool allows(std::size_t i) const noexcept { return insertable[i]; }

    friend bool operator==(const PerturbationMask &, const PerturbationMask &) = default;
};

struct GeneratorConfig {
    std::size_t n = 0;
    std::size_t samples_per_class = 0;
    std::vector<double> benign_probs;   // per-feature activation probability, class 0
    std::vector<double> malware_probs;  // class 1
    double mask_fraction = 0.85;
    std::uint64_t seed = 0;
    std::string name = "synthetic";

    void validate() const;
};

// Activation profile used by the desk-scale experiments: sparse base rates, a
// block of malware-indicative features, a larger block of rare benign-only
// features, and a neutral remainder. Deterministic in (n, seed).
[[nodiscard]] GeneratorConfig default_generator_config(std::size_t n, std::size_t samples_per_class,
                                                       std::uint64_t seed);

struct GeneratedData {
    Dataset dataset;
    PerturbationMask mask;
};

// Class-conditional independent Bernoulli samples (benign block first, then
// malware). The mask marks the ceil(mask_fraction * n) features with the lowest
// signed separation p_malware - p_benign, i.e. the ones whose presence argues
// least for maliciousness.
[[nodiscard]] GeneratedData generate_synthetic_dataset(const GeneratorConfig &cfg);

[[nodiscard]] PerturbationMask select_insertable(const std::vector<double> &benign_probs,
                                                 const std::vector<double> &malware_probs,
                                                 double mask_fraction);

struct SplitRatios {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

struct DatasetSplit {
    Dataset train;
    Dataset valid;
    Dataset test;
};

// Label-stratified, disjoint, exhaustive. Throws if the ratios do not sum to 1.
[[nodiscard]] DatasetSplit split_dataset(const Dataset &ds, const SplitRatios &ratios, std::uint64_t seed);

// Same partition as split_dataset, expressed as indices into `ds.samples`.
[[nodiscard]] std::array<std::vector<std::size_t>, 3> split_indices(const Dataset &ds, const SplitRatios &ratios,
                                                                    std::uint64_t seed);

// --- JSONL record files -----------------------------------------------------
// Dataset:  {"n": N, "name": "..."} then {"ones": [ascending], "label": 0|1} per line.
// Mask:     {"n": N, "insertable": [ascending]}

void write_dataset(std::ostream &out, const Dataset &ds);
[[nodiscard]] Dataset read_dataset(std::istream &in);
void write_mask(std::ostream &out, const PerturbationMask &mask);
[[nodiscard]] PerturbationMask read_mask(std::istream &in);

void save_dataset(const std::string &path, const Dataset &ds);
[[nodiscard]] Dataset load_dataset(const std::string &path);
void save_mask(const std::string &path, const PerturbationMask &mask);
[[nodiscard]] PerturbationMask load_mask(const std::string &path);

} // namespace hashtran
