#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hashtran {

// Fixed-length binary feature vector, packed 64 bits per word.
// Bits past `size()` in the last word are always zero.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

    // Throws DimensionError if an index is >= n.
    static BitVector from_ones(std::size_t n, std::span<const std::size_t> ones);
    static BitVector from_bits(std::span<const std::uint8_t> bits);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] bool empty() const noexcept { return n_ == 0; }

    [[nodiscard]] bool operator[](std::size_t i) const noexcept {
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(std::size_t i, bool value = true) noexcept {
        const std::uint64_t bit = std::uint64_t{1} << (i & 63);
        if (value) {
            words_[i >> 6] |= bit;
        } else {
            words_[i >> 6] &= ~bit;
        }
    }
    void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] std::vector<std::size_t> ones() const;
    [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }

    // Dense 0.0/1.0 copy, for feeding networks.
    void to_dense(std::span<double> out) const;
    [[nodiscard]] std::vector<double> to_dense() const;

    friend bool operator==(const BitVector &, const BitVector &) = default;

    // Word-wise combinators; operands must share a dimension.
    friend BitVector operator|(const BitVector &a, const BitVector &b);
    friend BitVector operator&(const BitVector &a, const BitVector &b);
    friend BitVector operator^(const BitVector &a, const BitVector &b);

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

// Number of coordinates where a and b differ.
[[nodiscard]] std::size_t hamming_distance(const BitVector &a, const BitVector &b);

// hamming_distance / n; n must be positive.
[[nodiscard]] double normalized_hamming(const BitVector &a, const BitVector &b);

// True if every 1 of `sub` is also a 1 of `super`.
[[nodiscard]] bool is_subset(const BitVector &sub, const BitVector &super);

} // namespace hashtran
