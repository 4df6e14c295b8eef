#include "doctest.h"

#include "hashtran/bitvector.hpp"
#include "hashtran/errors.hpp"
#include "hashtran/random.hpp"

using namespace hashtran;

namespace {

BitVector parse(const char *s) {
    std::vector<std::uint8_t> bits;
    for (; *s; ++s) bits.push_back(*s == '1' ? 1 : 0);
    return BitVector::from_bits(bits);
}

BitVector random_vector(Rng &rng, std::size_t n, double p = 0.5) {
    BitVector v(n);
    for (std::size_t i = 0; i < n; ++i) v.set(i, uniform01(rng) < p);
    return v;
}

std::size_t naive_distance(const BitVector &a, const BitVector &b) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
    return d;
}

} // namespace

TEST_CASE("hamming distance examples") {
    CHECK(hamming_distance(parse("0101"), parse("0110")) == 2);
    CHECK(normalized_hamming(parse("0101"), parse("0110")) == doctest::Approx(0.5));
    const auto x = parse("1100101");
    CHECK(hamming_distance(x, x) == 0);
    CHECK(normalized_hamming(x, x) == 0.0);
    CHECK(normalized_hamming(parse("1010"), parse("0101")) == 1.0);
}

TEST_CASE("hamming distance errors") {
    CHECK_THROWS_AS((void)hamming_distance(parse("01"), parse("011")), DimensionError);
    CHECK_THROWS_AS((void)normalized_hamming(parse("01"), parse("011")), DimensionError);
    CHECK_THROWS((void)normalized_hamming(BitVector(0), BitVector(0)));
}

TEST_CASE("hamming distance matches a per-coordinate loop across word boundaries") {
    Rng rng = make_rng(12);
    for (std::size_t n : {1, 63, 64, 65, 130, 1000}) {
        for (int t = 0; t < 20; ++t) {
            auto a = random_vector(rng, n), b = random_vector(rng, n);
            CHECK(hamming_distance(a, b) == naive_distance(a, b));
        }
    }
}

TEST_CASE("hamming distance is a metric") {
    Rng rng = make_rng(3);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + uniform_below(rng, 200);
        auto a = random_vector(rng, n, 0.3), b = random_vector(rng, n, 0.3), c = random_vector(rng, n, 0.3);
        CHECK(hamming_distance(a, b) == hamming_distance(b, a));
        CHECK((hamming_distance(a, b) == 0) == (a == b));
        CHECK(hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c));
    }
}

TEST_CASE("normalized hamming equals one minus single bit-sampling collision rate") {
    // Enumerate every position the single hash could sample.
    Rng rng = make_rng(8);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + uniform_below(rng, 300);
        auto a = random_vector(rng, n), b = random_vector(rng, n);
        std::size_t collide = 0;
        for (std::size_t i = 0; i < n; ++i) collide += a[i] == b[i] ? 1 : 0;
        CHECK(normalized_hamming(a, b) == doctest::Approx(1.0 - static_cast<double>(collide) / n).epsilon(1e-15));
    }
}

TEST_CASE("bitvector construction and bit operations") {
    const std::vector<std::size_t> ones{0, 5, 64, 99};
    auto v = BitVector::from_ones(100, ones);
    CHECK(v.count() == 4);
    CHECK(v.ones() == ones);
    CHECK(v[64]);
    CHECK_FALSE(v[63]);
    CHECK_THROWS_AS((void)BitVector::from_ones(100, std::vector<std::size_t>{100}), DimensionError);

    v.flip(63);
    CHECK(v[63]);
    v.set(63, false);
    CHECK_FALSE(v[63]);

    auto dense = v.to_dense();
    CHECK(dense.size() == 100);
    CHECK(dense[5] == 1.0);
    CHECK(dense[6] == 0.0);

    auto w = BitVector::from_ones(100, std::vector<std::size_t>{5, 7});
    CHECK((v | w).count() == 5);
    CHECK((v & w).ones() == std::vector<std::size_t>{5});
    CHECK((v ^ w).count() == 4);
    CHECK(is_subset(v & w, v));
    CHECK_FALSE(is_subset(w, v));
    CHECK_THROWS_AS((void)(v | BitVector(10)), DimensionError);
}

TEST_CASE("sample_distinct draws distinct sorted values") {
    Rng rng = make_rng(1);
    for (int t = 0; t < 100; ++t) {
        auto s = sample_distinct(rng, 50, 17);
        CHECK(s.size() == 17);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
        CHECK(s.back() < 50);
    }
    CHECK(sample_distinct(rng, 5, 9).size() == 5);
}

TEST_CASE("derive_seed is position based") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}
