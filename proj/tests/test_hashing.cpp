#include "doctest.h"

#include <cmath>
#include <sstream>

#include "hashtran/errors.hpp"
#include "hashtran/hashing.hpp"
#include "hashtran/random.hpp"

using namespace hashtran;

namespace {

BitVector random_vector(Rng &rng, std::size_t n, double p = 0.5) {
    BitVector v(n);
    for (std::size_t i = 0; i < n; ++i) v.set(i, uniform01(rng) < p);
    return v;
}

// Recursive traversal, written independently of DecisionTree::route.
std::size_t oracle_leaf(const DecisionTree &t, const BitVector &x, std::size_t node, std::size_t depth) {
    if (depth == t.d - 1) return node - t.internal_count();
    const std::size_t bit = x[t.slots[t.node_slot[node]]] ? 1 : 0;
    return oracle_leaf(t, x, 2 * node + 1 + bit, depth + 1);
}

// Wilson-Hilferty approximation of the chi-square upper quantile.
double chi2_quantile(double df, double z) {
    const double a = 2.0 / (9.0 * df);
    return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

Dataset separable_data(std::size_t n, std::size_t per_class, std::uint64_t seed) {
    auto cfg = default_generator_config(n, per_class, seed);
    return generate_synthetic_dataset(cfg).dataset;
}

} // namespace

TEST_CASE("sample_lsh basics") {
    const auto t = sample_lsh(1, 3, 2, 5);
    CHECK(t.indices == std::vector<std::uint32_t>(6, 0));
    CHECK(sample_lsh(100, 4, 3, 9) == sample_lsh(100, 4, 3, 9));
    CHECK_FALSE(sample_lsh(100, 4, 3, 9) == sample_lsh(100, 4, 3, 10));
    CHECK_THROWS((void)sample_lsh(0, 1, 1, 1));
    CHECK_THROWS((void)sample_lsh(4, 0, 1, 1));
}

TEST_CASE("sampled indices are uniform (chi-square)") {
    const std::size_t n = 1024;
    std::vector<double> counts(n, 0.0);
    std::size_t draws = 0;
    for (std::uint64_t s = 0; draws < 100000; ++s) {
        const auto t = sample_lsh(n, 32, 64, s);
        for (auto i : t.indices) counts[i] += 1;
        draws += t.indices.size();
    }
    const double expected = static_cast<double>(draws) / n;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < chi2_quantile(n - 1, 3.09));  // alpha = 0.001
    CHECK(chi2 > chi2_quantile(n - 1, -3.09));
}

TEST_CASE("apply_lsh matches per-entry lookup") {
    Rng rng = make_rng(1);
    const auto t = sample_lsh(200, 7, 5, 3);
    CHECK(apply_lsh(t, BitVector(200)).bits == std::vector<std::uint8_t>(35, 0));
    BitVector full(200);
    for (std::size_t i = 0; i < 200; ++i) full.set(i);
    CHECK(apply_lsh(t, full).bits == std::vector<std::uint8_t>(35, 1));
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_vector(rng, 200);
        auto m = apply_lsh(t, x);
        REQUIRE(m.rows == 5);
        REQUIRE(m.cols == 7);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 7; ++c) CHECK(m.at(r, c) == (x[t.indices[r * 7 + c]] ? 1 : 0));
    }
    CHECK_THROWS_AS((void)apply_lsh(t, BitVector(10)), DimensionError);
}

TEST_CASE("decision tree training") {
    SUBCASE("single informative feature at the root") {
        // slot 1 is noise; slot 0 equals the label
        std::vector<std::uint8_t> data{0, 1, 1, 1, 0, 0, 1, 0};
        std::vector<int> labels{0, 1, 0, 1};
        const auto t = train_decision_tree(data, labels, 2, 2);
        CHECK(t.node_slot == std::vector<std::uint16_t>{0});
        CHECK(t.leaf_count() == 2);
    }
    SUBCASE("pure labels still give a full tree via the tie-break rule") {
        std::vector<std::uint8_t> data{0, 1, 1, 1, 0, 0, 1, 0, 1};
        std::vector<int> labels{1, 1, 1};
        const auto t = train_decision_tree(data, labels, 3, 3);
        CHECK(t.node_slot == std::vector<std::uint16_t>{0, 1, 1});
        CHECK(t.internal_count() == 3);
        CHECK(t.leaf_count() == 4);
    }
    SUBCASE("xor data is fit exactly at depth 3") {
        std::vector<std::uint8_t> data;
        std::vector<int> labels;
        for (int rep = 0; rep < 5; ++rep)
            for (std::uint8_t a = 0; a < 2; ++a)
                for (std::uint8_t b = 0; b < 2; ++b) {
                    data.insert(data.end(), {a, b});
                    labels.push_back(a ^ b);
                }
        const auto t = train_decision_tree(data, labels, 2, 3);
        // every leaf is pure over the four input patterns
        std::vector<int> leaf_label(4, -1);
        for (std::uint8_t a = 0; a < 2; ++a)
            for (std::uint8_t b = 0; b < 2; ++b) {
                const std::vector<std::uint8_t> sub{a, b};
                const auto leaf = t.route_projected(sub);
                CHECK((leaf_label[leaf] == -1 || leaf_label[leaf] == (a ^ b)));
                leaf_label[leaf] = a ^ b;
            }
    }
    SUBCASE("errors") {
        std::vector<std::uint8_t> data{0, 1};
        std::vector<int> labels{0};
        CHECK_THROWS((void)train_decision_tree(data, labels, 2, 1));
        CHECK_THROWS((void)train_decision_tree({}, {}, 2, 2));
        CHECK_THROWS_AS((void)train_decision_tree(data, labels, 3, 2), DimensionError);
    }
}

TEST_CASE("build_lnh: shape, determinism, routing oracle, one-hot rows") {
    const auto train = separable_data(256, 150, 3);
    const LnhParams params{4, 3, 0, 4};
    const auto t = build_lnh(train, params, 11);
    CHECK(t.m == 16);
    CHECK(t.width() == 4 * 8);
    CHECK(t.trees.size() == 12);
    CHECK(build_lnh(train, params, 11) == t);
    CHECK_FALSE(build_lnh(train, params, 12) == t);
    for (const auto &tree : t.trees) {
        CHECK(tree.node_slot.size() == 7);
        CHECK(tree.slots.size() == 16);
        for (auto s : tree.slots) CHECK(s < 256);
        for (auto s : tree.node_slot) CHECK(s < 16);
    }

    Rng rng = make_rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_vector(rng, 256, trial % 2 ? 0.05 : 0.5);
        const auto m = apply_lnh(t, x);
        REQUIRE(m.rows == 3);
        REQUIRE(m.cols == 32);
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                std::size_t sum = 0;
                for (std::size_t leaf = 0; leaf < 8; ++leaf) sum += m.at(r, c * 8 + leaf);
                CHECK(sum == 1);
                const auto leaf = oracle_leaf(t.tree(r, c), x, 0, 0);
                CHECK(m.at(r, c * 8 + leaf) == 1);
            }
        }
    }
    CHECK_THROWS_AS((void)apply_lnh(t, BitVector(3)), DimensionError);
    Dataset empty{256, "e", {}};
    CHECK_THROWS((void)build_lnh(empty, params, 1));
}

TEST_CASE("build_lnh on a single separable feature splits on its only slot") {
    Dataset ds{1, "one", {}};
    for (int i = 0; i < 10; ++i) {
        BitVector v(1);
        v.set(0, i % 2 == 1);
        ds.samples.push_back({v, i % 2});
    }
    const auto t = build_lnh(ds, {1, 1, 1, 2}, 4);
    CHECK(t.trees[0].slots == std::vector<std::uint32_t>{0});
    CHECK(t.trees[0].node_slot == std::vector<std::uint16_t>{0});
    BitVector one(1);
    one.set(0);
    CHECK(apply_lnh(t, one).bits == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("lnh locality: differences outside every tree's slots leave the matrix unchanged") {
    const auto train = separable_data(256, 100, 5);
    const auto t = build_lnh(train, {3, 2, 8, 3}, 1);
    std::vector<std::uint8_t> used(256, 0);
    for (const auto &tree : t.trees)
        for (auto s : tree.slots) used[s] = 1;
    Rng rng = make_rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_vector(rng, 256);
        auto y = x;
        for (std::size_t i = 0; i < 256; ++i)
            if (!used[i] && uniform01(rng) < 0.5) y.flip(i);
        CHECK(apply_lnh(t, x) == apply_lnh(t, y));
    }
}

TEST_CASE("truncate keeps the leading functions") {
    const auto l = sample_lsh(50, 6, 2, 1);
    const auto lt = truncate(l, 3);
    CHECK(lt.k == 3);
    CHECK(lt.index(1, 2) == l.index(1, 2));
    CHECK_THROWS((void)truncate(l, 7));

    const auto train = separable_data(64, 50, 2);
    const auto n = build_lnh(train, {4, 2, 8, 3}, 3);
    const auto nt = truncate(n, 2);
    CHECK(nt.tree(1, 1) == n.tree(1, 1));
    Rng rng = make_rng(3);
    const auto x = random_vector(rng, 64);
    const auto full = apply_lnh(n, x);
    const auto part = apply_lnh(nt, x);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < part.cols; ++c) CHECK(part.at(r, c) == full.at(r, c));
}

TEST_CASE("batch application: parallel equals serial and per-sample") {
    const auto train = separable_data(128, 60, 9);
    const std::vector<HashingTransform> ts{sample_lsh(128, 8, 4, 1), build_lnh(train, {4, 4, 0, 4}, 2),
                                           IdentityTransform{128}};
    std::vector<BitVector> xs;
    for (const auto &s : train.samples) xs.push_back(s.features);
    for (const auto &t : ts) {
        const auto a = apply_batch(t, xs);
        CHECK(a == serial::apply_batch(t, xs));
        for (std::size_t i = 0; i < xs.size(); i += 17) CHECK(a[i] == apply_transform(t, xs[i]));
    }
    const auto id = apply_transform(IdentityTransform{128}, xs[0]);
    CHECK(id.rows == 1);
    CHECK(id.cols == 128);
}

TEST_CASE("collision estimator") {
    SUBCASE("eps = 0 always collides") {
        const auto e = estimate_collision(sample_lsh(100, 8, 4, 1), 0, 500, 2);
        CHECK(e.row_frequency == 1.0);
        CHECK(e.mean_matching_rows == 4.0);
    }
    SUBCASE("LSH closed form (1 - eps/n)^K") {
        const auto e = estimate_collision(sample_lsh(1000, 32, 64, 5), 10, 100000, 6);
        const double p = std::pow(1.0 - 10.0 / 1000.0, 32);
        CHECK(p == doctest::Approx(0.7250).epsilon(1e-3));
        CHECK(std::abs(e.row_frequency - p) <= 0.02);
        CHECK(std::abs(e.mean_matching_rows - 64 * p) <= 1.5);
        CHECK(std::abs(e.unit_frequency - 0.99) <= 0.002);
    }
    SUBCASE("LNH per-tree collision is at least (1 - eps/n)^m") {
        const auto train = separable_data(1000, 200, 7);
        const auto t = build_lnh(train, {8, 8, 0, 4}, 8);
        const auto e = estimate_collision(t, 10, 20000, 9);
        const double bound = std::pow(1.0 - 10.0 / 1000.0, static_cast<double>(t.m));
        CHECK(e.unit_frequency >= bound - 3 * e.unit_frequency_stderr);
    }
    SUBCASE("errors") {
        CHECK_THROWS((void)estimate_collision(sample_lsh(10, 2, 2, 1), 11, 10, 1));
        CHECK_THROWS((void)estimate_collision(sample_lsh(10, 2, 2, 1), 1, 0, 1));
    }
}

TEST_CASE("row collision events are independent across rows") {
    // 2x2 contingency test on rows 0 and 1 for a fixed-eps perturbation.
    const std::size_t n = 1000, eps = 10;
    const auto t = sample_lsh(n, 32, 2, 13);
    Rng rng = make_rng(14);
    double table[2][2] = {{0, 0}, {0, 0}};
    const int trials = 20000;
    for (int i = 0; i < trials; ++i) {
        auto x = random_vector(rng, n);
        auto y = x;
        for (auto f : sample_distinct(rng, n, eps)) y.flip(f);
        const auto a = apply_lsh(t, x), b = apply_lsh(t, y);
        table[a.row_equal(b, 0) ? 1 : 0][a.row_equal(b, 1) ? 1 : 0] += 1;
    }
    double chi2 = 0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double row = table[r][0] + table[r][1];
            const double col = table[0][c] + table[1][c];
            const double expected = row * col / trials;
            chi2 += (table[r][c] - expected) * (table[r][c] - expected) / expected;
        }
    CHECK(chi2 < 10.83);  // 1 dof, alpha = 0.001
}

TEST_CASE("distortion estimator") {
    Rng rng = make_rng(1);
    const auto x = random_vector(rng, 64);
    const std::vector<BitVector> same{x, x};
    CHECK(estimate_distortion(sample_lsh(64, 8, 4, 2), 100, 3, same).mean == 0.0);

    // distortion of bit sampling shrinks as K grows (law of large numbers)
    double last = 1.0;
    for (std::size_t k : {8, 32, 128}) {
        const auto e = estimate_distortion(sample_lsh(256, k, 8, k), 4000, 4);
        CHECK(e.mean < last);
        last = e.mean;
    }
    CHECK(last < 0.05);

    for (std::size_t k : {8, 16, 32}) {
        const auto c = compare_distortion_doubling(sample_lsh(256, 2 * k, 8, 5), 4000, 6);
        CHECK(c.mean_difference <= 3 * c.difference_stderr);
        CHECK(c.distortion_2k == doctest::Approx(c.distortion_k + c.mean_difference));
    }
    CHECK_THROWS((void)estimate_distortion(sample_lsh(8, 2, 2, 1), 0, 1));
}

TEST_CASE("matching_rows_k_bound: closed form and edge cases") {
    CHECK(matching_rows_k_bound(64, 64, 0.5) == 0);
    CHECK(matching_rows_k_bound(32, 64, 0.99) == 68);
    CHECK(matching_rows_k_bound(1, 1, 0.5) == 0);
    // direct evaluation: K satisfies, K+1 does not
    for (double theta : {1.0, 5.0, 20.0, 40.0}) {
        for (double p1 : {0.5, 0.9, 0.99}) {
            const auto k = static_cast<double>(matching_rows_k_bound(theta, 64, p1));
            CHECK(64 * std::pow(p1, k) >= theta);
            CHECK(64 * std::pow(p1, k + 1) < theta);
        }
    }
    CHECK_THROWS((void)matching_rows_k_bound(65, 64, 0.9));
    CHECK_THROWS((void)matching_rows_k_bound(1, 64, 1.0));
    CHECK_THROWS((void)matching_rows_k_bound(1, 64, 0.0));
    CHECK_THROWS((void)matching_rows_k_bound(0, 64, 0.5));
}

TEST_CASE("transform serialization round trips") {
    const auto train = separable_data(100, 40, 1);
    const std::vector<HashingTransform> ts{sample_lsh(100, 5, 3, 1), build_lnh(train, {3, 2, 0, 4}, 2),
                                           IdentityTransform{100}};
    for (const auto &t : ts) {
        std::stringstream io;
        write_transform(io, t);
        CHECK(read_transform(io) == t);
    }
    std::istringstream bad("{\"kind\":\"lsh\",\"n\":4,\"K\":1,\"L\":1}\n{\"row\":0,\"indices\":[9]}\n");
    CHECK_THROWS_AS((void)read_transform(bad), FormatError);
}
