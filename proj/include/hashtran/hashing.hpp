#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hashtran/bitvector.hpp"
#include "hashtran/dataset.hpp"

namespace hashtran {

// L x T binary matrix, row-major.
struct HashMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> bits;

    HashMatrix() = default;
    HashMatrix(std::size_t l, std::size_t t) : rows(l), cols(t), bits(l * t, 0) {}

    [[nodiscard]] std::uint8_t at(std::size_t r, std::size_t c) const noexcept { return bits[r * cols + c]; }
    [[nodiscard]] std::span<const std::uint8_t> row(std::size_t r) const noexcept {
        return {bits.data() + r * cols, cols};
    }
    [[nodiscard]] bool row_equal(const HashMatrix &other, std::size_t r) const noexcept;

    friend bool operator==(const HashMatrix &, const HashMatrix &) = default;
};

// Bit sampling: row i, column j reads x[indices[i*K + j]].
struct LshTransform {
    std::size_t n = 0;
    std::size_t k = 0;  // hashes per row
    std::size_t l = 0;  // rows
    std::vector<std::uint32_t> indices;

    [[nodiscard]] std::size_t width() const noexcept { return k; }
    [[nodiscard]] std::uint32_t index(std::size_t row, std::size_t col) const noexcept { return indices[row * k + col]; }

    friend bool operator==(const LshTransform &, const LshTransform &) = default;
};

// Complete binary tree of height d over m sampled bit positions.
// Internal nodes are stored in heap order (children of node i are 2i+1, 2i+2);
// each holds an index into `slots`. A 0 bit routes left, a 1 bit right. Leaves
// are numbered left to right, 0 .. 2^(d-1)-1.
struct DecisionTree {
    std::size_t m = 0;
    std::size_t d = 0;
    std::vector<std::uint32_t> slots;       // m bit positions in [0, n)
    std::vector<std::uint16_t> node_slot;   // 2^(d-1)-1 entries, each < m

    [[nodiscard]] std::size_t leaf_count() const noexcept { return std::size_t{1} << (d - 1); }
    [[nodiscard]] std::size_t internal_count() const noexcept { return leaf_count() - 1; }

    // Leaf reached by a full input vector.
    [[nodiscard]] std::size_t route(const BitVector &x) const noexcept;
    // Leaf reached by an m-bit projected vector (slot values in order).
    [[nodiscard]] std::size_t route_projected(std::span<const std::uint8_t> sub) const noexcept;

    friend bool operator==(const DecisionTree &, const DecisionTree &) = default;
};

struct LnhTransform {
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t l = 0;
    std::size_t m = 0;
    std::size_t d = 0;
    std::vector<DecisionTree> trees;  // l*k, row-major

    [[nodiscard]] std::size_t leaves() const noexcept { return std::size_t{1} << (d - 1); }
    [[nodiscard]] std::size_t width() const noexcept { return k * leaves(); }
    [[nodiscard]] const DecisionTree &tree(std::size_t row, std::size_t col) const noexcept {
        return trees[row * k + col];
    }

    friend bool operator==(const LnhTransform &, const LnhTransform &) = default;
};

// The raw feature vector as a 1 x n matrix; lets the DNN-DAE ablation share the
// hashed-model machinery.
struct IdentityTransform {
    std::size_t n = 0;
    friend bool operator==(const IdentityTransform &, const IdentityTransform &) = default;
};

using HashingTransform = std::variant<LshTransform, LnhTransform, IdentityTransform>;

[[nodiscard]] std::size_t input_dim(const HashingTransform &t) noexcept;
[[nodiscard]] std::size_t row_count(const HashingTransform &t) noexcept;
[[nodiscard]] std::size_t row_width(const HashingTransform &t) noexcept;
[[nodiscard]] std::string kind_name(const HashingTransform &t);

// --- construction -------------------------------------------------------------

[[nodiscard]] LshTransform sample_lsh(std::size_t n, std::size_t k, std::size_t l, std::uint64_t seed);

// Rows of `data` are m-bit projected samples (row-major, data.size() == labels.size() * m).
// Greedy Gini splits; a node with no impurity-reducing split (pure, empty, or
// uninformative) splits on the lowest-index slot not yet used on its path, so
// the tree is always complete.
[[nodiscard]] DecisionTree train_decision_tree(std::span<const std::uint8_t> data, std::span<const int> labels,
                                               std::size_t m, std::size_t d);

struct LnhParams {
    std::size_t k = 16;
    std::size_t l = 32;
    std::size_t m = 0;  // 0 selects ceil(sqrt(n))
    std::size_t d = 4;
};

[[nodiscard]] std::size_t default_subvector_length(std::size_t n) noexcept;

// One tree per (row, col); the slot sample for tree (i, j) comes from
// derive_seed(seed, {i, j}), so the forest does not depend on thread count.
[[nodiscard]] LnhTransform build_lnh(const Dataset &train, const LnhParams &params, std::uint64_t seed);

// Keep the first `k` hash functions (bits or trees) of every row.
[[nodiscard]] LshTransform truncate(const LshTransform &t, std::size_t k);
[[nodiscard]] LnhTransform truncate(const LnhTransform &t, std::size_t k);

// --- application --------------------------------------------------------------

[[nodiscard]] HashMatrix apply_lsh(const LshTransform &t, const BitVector &x);
[[nodiscard]] HashMatrix apply_lnh(const LnhTransform &t, const BitVector &x);
[[nodiscard]] HashMatrix apply_transform(const HashingTransform &t, const BitVector &x);

// Hash a batch of samples. The parallel version splits over samples; the serial
// version is kept as the reference.
[[nodiscard]] std::vector<HashMatrix> apply_batch(const HashingTransform &t, std::span<const BitVector> xs);
namespace serial {
[[nodiscard]] std::vector<HashMatrix> apply_batch(const HashingTransform &t, std::span<const BitVector> xs);
}

// --- locality estimators ------------------------------------------------------

struct CollisionEstimate {
    std::size_t trials = 0;
    double row_frequency = 0;         // fraction of (trial, row) with identical row hashes
    double row_frequency_stderr = 0;  // over per-trial row fractions
    double mean_matching_rows = 0;    // E[#rows with identical hashes]
    double matching_rows_stderr = 0;
    double unit_frequency = 0;        // per sampled bit (LSH) or per tree (LNH)
    double unit_frequency_stderr = 0;
};

// Random uniform x, x' = x with exactly `eps` distinct coordinates flipped.
[[nodiscard]] CollisionEstimate estimate_collision(const HashingTransform &t, std::size_t eps, std::size_t trials,
                                                   std::uint64_t seed);

struct DistortionEstimate {
    std::size_t pairs = 0;
    double mean = 0;    // E|d_H(H_j(x1), H_j(x2)) / width - d_H(x1, x2) / n|
    double stderr_ = 0;
};

// Output distance: LSH rows use normalized Hamming over the K bits; LNH rows use
// the fraction of the K trees whose leaves differ. Pairs come from `pool` when
// it has at least two vectors, otherwise from uniform random vectors.
[[nodiscard]] DistortionEstimate estimate_distortion(const HashingTransform &t, std::size_t pairs,
                                                     std::uint64_t seed, std::span<const BitVector> pool = {});

struct DistortionComparison {
    std::size_t pairs = 0;
    double distortion_k = 0;
    double distortion_2k = 0;
    double mean_difference = 0;  // distortion_2k - distortion_k, paired
    double difference_stderr = 0;
};

// `doubled` must carry 2K functions per row; the K-function transform is its
// truncation, so both are evaluated on the same pairs.
[[nodiscard]] DistortionComparison compare_distortion_doubling(const HashingTransform &doubled, std::size_t pairs,
                                                               std::uint64_t seed,
                                                               std::span<const BitVector> pool = {});

// Largest K with L * p1^K >= theta. Throws if theta > L, theta <= 0, or p1 is not in (0, 1).
[[nodiscard]] std::size_t matching_rows_k_bound(double theta, double l, double p1);

// --- serialization ------------------------------------------------------------

void write_transform(std::ostream &out, const HashingTransform &t);
[[nodiscard]] HashingTransform read_transform(std::istream &in);

} // namespace hashtran
