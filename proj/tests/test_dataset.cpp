#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "hashtran/dataset.hpp"
#include "hashtran/errors.hpp"

using namespace hashtran;

namespace {

GeneratorConfig small_config(std::uint64_t seed) { return default_generator_config(128, 200, seed); }

std::multiset<std::string> fingerprint(const Dataset &ds) {
    std::multiset<std::string> out;
    for (const auto &s : ds.samples) {
        std::string key = std::to_string(s.label) + ":";
        for (auto i : s.features.ones()) key += std::to_string(i) + ",";
        out.insert(key);
    }
    return out;
}

} // namespace

TEST_CASE("generator is deterministic and labels blocks") {
    const auto a = generate_synthetic_dataset(small_config(5));
    const auto b = generate_synthetic_dataset(small_config(5));
    CHECK(a.dataset == b.dataset);
    CHECK(a.mask == b.mask);
    CHECK(a.dataset.size() == 400);
    CHECK(a.dataset.count_label(kMalware) == 200);
    CHECK(a.mask.insertable.count() == static_cast<std::size_t>(std::ceil(0.85 * 128)));
    const auto c = generate_synthetic_dataset(small_config(6));
    CHECK_FALSE(a.dataset == c.dataset);
}

TEST_CASE("degenerate 0/1 probabilities give two constant classes") {
    GeneratorConfig cfg;
    cfg.n = 10;
    cfg.samples_per_class = 30;
    cfg.benign_probs = {1, 1, 1, 0, 0, 0, 0, 0, 1, 0};
    cfg.malware_probs = {0, 0, 0, 1, 1, 1, 1, 1, 1, 0};
    cfg.seed = 3;
    const auto g = generate_synthetic_dataset(cfg);
    for (const auto &s : g.dataset.samples) {
        const auto &p = s.label == kMalware ? cfg.malware_probs : cfg.benign_probs;
        for (std::size_t i = 0; i < 10; ++i) CHECK(s.features[i] == (p[i] == 1.0));
    }
}

TEST_CASE("generator config validation") {
    auto cfg = small_config(1);
    cfg.malware_probs[3] = 1.5;
    CHECK_THROWS((void)generate_synthetic_dataset(cfg));
    cfg = small_config(1);
    cfg.mask_fraction = 0.0;
    CHECK_THROWS((void)generate_synthetic_dataset(cfg));
    cfg = small_config(1);
    cfg.benign_probs.pop_back();
    CHECK_THROWS_AS((void)generate_synthetic_dataset(cfg), DimensionError);
}

TEST_CASE("mask marks the lowest signed-separation features") {
    const std::vector<double> ben{0.1, 0.5, 0.2, 0.1, 0.3};
    const std::vector<double> mal{0.9, 0.1, 0.2, 0.4, 0.3};
    // separations: 0.8, -0.4, 0, 0.3, 0
    const auto m = select_insertable(ben, mal, 0.6);
    CHECK(m.insertable.ones() == std::vector<std::size_t>{1, 2, 4});
    CHECK(select_insertable(ben, mal, 1.0).insertable.count() == 5);
}

TEST_CASE("empirical activation rates follow the config") {
    GeneratorConfig cfg;
    cfg.n = 4;
    cfg.samples_per_class = 20000;
    cfg.benign_probs = {0.1, 0.5, 0.9, 0.0};
    cfg.malware_probs = {0.3, 0.5, 0.2, 1.0};
    cfg.seed = 9;
    const auto g = generate_synthetic_dataset(cfg);
    for (int label : {kBenign, kMalware}) {
        const auto &p = label == kMalware ? cfg.malware_probs : cfg.benign_probs;
        for (std::size_t i = 0; i < 4; ++i) {
            double on = 0;
            for (const auto &s : g.dataset.samples)
                if (s.label == label) on += s.features[i];
            const double sd = std::sqrt(p[i] * (1 - p[i]) / 20000);
            CHECK(std::abs(on / 20000 - p[i]) <= 4 * sd + 1e-12);
        }
    }
}

TEST_CASE("split sizes, partition and stratification") {
    GeneratorConfig cfg = default_generator_config(32, 500, 4);
    const auto ds = generate_synthetic_dataset(cfg).dataset;
    const auto parts = split_dataset(ds, {0.8, 0.05, 0.15}, 7);
    CHECK(std::abs(static_cast<int>(parts.train.size()) - 800) <= 1);
    CHECK(std::abs(static_cast<int>(parts.valid.size()) - 50) <= 1);
    CHECK(std::abs(static_cast<int>(parts.test.size()) - 150) <= 1);
    CHECK(parts.train.count_label(kMalware) == 400);
    CHECK(parts.valid.count_label(kMalware) == 25);

    auto all = fingerprint(parts.train);
    for (const auto &s : fingerprint(parts.valid)) all.insert(s);
    for (const auto &s : fingerprint(parts.test)) all.insert(s);
    CHECK(all == fingerprint(ds));

    const auto idx = split_indices(ds, {0.8, 0.05, 0.15}, 7);
    std::vector<std::size_t> merged;
    for (const auto &p : idx) merged.insert(merged.end(), p.begin(), p.end());
    std::sort(merged.begin(), merged.end());
    for (std::size_t i = 0; i < merged.size(); ++i) CHECK(merged[i] == i);

    const auto again = split_indices(ds, {0.8, 0.05, 0.15}, 7);
    CHECK(again == idx);
    const auto other = split_indices(ds, {0.8, 0.05, 0.15}, 8);
    CHECK(other[0].size() == idx[0].size());
    CHECK(other[0] != idx[0]);
    CHECK(std::set<std::size_t>(other[0].begin(), other[0].end()) !=
          std::set<std::size_t>(idx[0].begin(), idx[0].end()));

    CHECK_THROWS((void)split_dataset(ds, {0.8, 0.1, 0.15}, 1));
}

TEST_CASE("dataset and mask round trip") {
    auto g = generate_synthetic_dataset(small_config(2));
    g.dataset.samples.push_back({BitVector(128), kBenign});  // empty sample is legal
    std::stringstream ds_io, mask_io;
    write_dataset(ds_io, g.dataset);
    write_mask(mask_io, g.mask);
    CHECK(read_dataset(ds_io) == g.dataset);
    CHECK(read_mask(mask_io) == g.mask);
}

TEST_CASE("malformed dataset files are rejected with a line number") {
    auto expect_line = [](const std::string &text, std::size_t line) {
        std::istringstream in(text);
        try {
            (void)read_dataset(in);
            FAIL("accepted malformed input");
        } catch (const FormatError &e) {
            CHECK(e.line() == line);
            CHECK(std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos);
        }
    };
    expect_line("{\"n\": 4, \"name\": \"x\"}\n{\"ones\": [1, 4], \"label\": 0}\n", 2);
    expect_line("{\"n\": 4, \"name\": \"x\"}\n{\"ones\": [1], \"label\": 1}\n{\"ones\": [2, 1], \"label\": 0}\n", 3);
    expect_line("{\"n\": 4, \"name\": \"x\"}\n{\"ones\": [1], \"label\": 2}\n", 2);
    expect_line("{\"n\": 4, \"name\": \"x\"}\nnot json\n", 2);
    expect_line("{\"name\": \"x\"}\n", 1);

    std::istringstream mask("{\"n\": 3, \"insertable\": [0, 3]}\n");
    CHECK_THROWS_AS((void)read_mask(mask), FormatError);
}
