#include "hashtran/bitvector.hpp"

#include <bit>
#include <string>

#include "hashtran/errors.hpp"

namespace hashtran {

BitVector BitVector::from_ones(std::size_t n, std::span<const std::size_t> ones) {
    BitVector v(n);
    for (auto i : ones) {
        if (i >= n) {
            throw DimensionError("bit index " + std::to_string(i) + " out of range for n=" + std::to_string(n));
        }
        v.set(i);
    }
    return v;
}

BitVector BitVector::from_bits(std::span<const std::uint8_t> bits) {
    BitVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] > 1) throw std::invalid_argument("bit value must be 0 or 1");
        if (bits[i]) v.set(i);
    }
    return v;
}

std::size_t BitVector::count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::vector<std::size_t> BitVector::ones() const {
    std::vector<std::size_t> out;
    out.reserve(count());
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t word = words_[w];
        while (word != 0) {
            const int b = std::countr_zero(word);
            out.push_back(w * 64 + static_cast<std::size_t>(b));
            word &= word - 1;
        }
    }
    return out;
}

void BitVector::to_dense(std::span<double> out) const {
    require_same_dim(out.size(), n_, "BitVector::to_dense");
    for (std::size_t i = 0; i < n_; ++i) out[i] = (*this)[i] ? 1.0 : 0.0;
}

std::vector<double> BitVector::to_dense() const {
    std::vector<double> out(n_);
    to_dense(out);
    return out;
}

BitVector operator|(const BitVector &a, const BitVector &b) {
    require_same_dim(a.size(), b.size(), "BitVector |");
    BitVector out = a;
    for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] |= b.words_[i];
    return out;
}

BitVector operator&(const BitVector &a, const BitVector &b) {
    require_same_dim(a.size(), b.size(), "BitVector &");
    BitVector out = a;
    for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] &= b.words_[i];
    return out;
}

BitVector operator^(const BitVector &a, const BitVector &b) {
    require_same_dim(a.size(), b.size(), "BitVector ^");
    BitVector out = a;
    for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] ^= b.words_[i];
    return out;
}

std::size_t hamming_distance(const BitVector &a, const BitVector &b) {
    require_same_dim(a.size(), b.size(), "hamming_distance");
    auto aw = a.words();
    auto bw = b.words();
    std::size_t d = 0;
    for (std::size_t i = 0; i < aw.size(); ++i) d += static_cast<std::size_t>(std::popcount(aw[i] ^ bw[i]));
    return d;
}

double normalized_hamming(const BitVector &a, const BitVector &b) {
    require_same_dim(a.size(), b.size(), "normalized_hamming");
    if (a.size() == 0) throw std::invalid_argument("normalized_hamming: zero-length vectors");
    return static_cast<double>(hamming_distance(a, b)) / static_cast<double>(a.size());
}

bool is_subset(const BitVector &sub, const BitVector &super) {
    require_same_dim(sub.size(), super.size(), "is_subset");
    auto s = sub.words();
    auto p = super.words();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((s[i] & ~p[i]) != 0) return false;
    }
    return true;
}

} // namespace hashtran
