#include "hashtran/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hashtran/errors.hpp"
#include "hashtran/random.hpp"
#include "records.hpp"
#include "transform_io.hpp"

namespace hashtran {

bool HashMatrix::row_equal(const HashMatrix &other, std::size_t r) const noexcept {
    return std::equal(bits.begin() + static_cast<std::ptrdiff_t>(r * cols),
                      bits.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols),
                      other.bits.begin() + static_cast<std::ptrdiff_t>(r * cols));
}

std::size_t DecisionTree::route(const BitVector &x) const noexcept {
    std::size_t node = 0;
    const std::size_t internal = internal_count();
    while (node < internal) {
        node = 2 * node + 1 + (x[slots[node_slot[node]]] ? 1 : 0);
    }
    return node - internal;
}

std::size_t DecisionTree::route_projected(std::span<const std::uint8_t> sub) const noexcept {
    std::size_t node = 0;
    const std::size_t internal = internal_count();
    while (node < internal) {
        node = 2 * node + 1 + (sub[node_slot[node]] ? 1 : 0);
    }
    return node - internal;
}

std::size_t input_dim(const HashingTransform &t) noexcept {
    return std::visit([](const auto &v) { return v.n; }, t);
}

std::size_t row_count(const HashingTransform &t) noexcept {
    return std::visit(
        [](const auto &v) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, IdentityTransform>) {
                return 1;
            } else {
                return v.l;
            }
        },
        t);
}

std::size_t row_width(const HashingTransform &t) noexcept {
    return std::visit(
        [](const auto &v) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, IdentityTransform>) {
                return v.n;
            } else {
                return v.width();
            }
        },
        t);
}

std::string kind_name(const HashingTransform &t) {
    switch (t.index()) {
    case 0: return "lsh";
    case 1: return "lnh";
    default: return "identity";
    }
}

// --- construction -------------------------------------------------------------

LshTransform sample_lsh(std::size_t n, std::size_t k, std::size_t l, std::uint64_t seed) {
    if (n == 0 || k == 0 || l == 0) throw std::invalid_argument("sample_lsh: n, K, L must be positive");
    LshTransform t{n, k, l, std::vector<std::uint32_t>(k * l)};
    for (std::size_t row = 0; row < l; ++row) {
        Rng rng = make_rng(seed, {0x154, row});
        for (std::size_t col = 0; col < k; ++col) {
            t.indices[row * k + col] = static_cast<std::uint32_t>(uniform_below(rng, n));
        }
    }
    return t;
}

namespace {

// 2 * pos * (count - pos) / count, i.e. count * gini(node).
double scaled_gini(double count, double pos) noexcept {
    if (count <= 0) return 0.0;
    return 2.0 * pos * (count - pos) / count;
}

} // namespace

DecisionTree train_decision_tree(std::span<const std::uint8_t> data, std::span<const int> labels, std::size_t m,
                                 std::size_t d) {
    if (d < 2) throw std::invalid_argument("train_decision_tree: height must be >= 2");
    if (m == 0) throw std::invalid_argument("train_decision_tree: m must be >= 1");
    if (labels.empty()) throw std::invalid_argument("train_decision_tree: empty training data");
    if (m > 65535) throw std::invalid_argument("train_decision_tree: m too large");
    require_same_dim(data.size(), labels.size() * m, "train_decision_tree data");

    DecisionTree tree;
    tree.m = m;
    tree.d = d;
    const std::size_t internal = tree.internal_count();
    tree.node_slot.assign(internal, 0);

    std::vector<std::vector<std::uint32_t>> members(internal);
    members[0].resize(labels.size());
    std::iota(members[0].begin(), members[0].end(), std::uint32_t{0});

    std::vector<double> ones(m);
    std::vector<double> ones_pos(m);
    std::vector<std::uint8_t> on_path(m);

    for (std::size_t node = 0; node < internal; ++node) {
        const auto &subset = members[node];
        std::fill(ones.begin(), ones.end(), 0.0);
        std::fill(ones_pos.begin(), ones_pos.end(), 0.0);
        double pos = 0;
        for (auto r : subset) {
            const bool positive = labels[r] == kMalware;
            pos += positive ? 1.0 : 0.0;
            const std::uint8_t *row = data.data() + static_cast<std::size_t>(r) * m;
            for (std::size_t s = 0; s < m; ++s) {
                ones[s] += row[s];
                if (positive) ones_pos[s] += row[s];
            }
        }
        const auto count = static_cast<double>(subset.size());
        const double parent = scaled_gini(count, pos);

        std::size_t best = m;
        double best_gain = 1e-12;
        for (std::size_t s = 0; s < m; ++s) {
            const double child = scaled_gini(count - ones[s], pos - ones_pos[s]) + scaled_gini(ones[s], ones_pos[s]);
            const double gain = parent - child;
            if (gain > best_gain) {
                best_gain = gain;
                best = s;
            }
        }
        if (best == m) {
            std::fill(on_path.begin(), on_path.end(), 0);
            for (std::size_t a = node; a > 0;) {
                a = (a - 1) / 2;
                on_path[tree.node_slot[a]] = 1;
            }
            best = 0;
            for (std::size_t s = 0; s < m; ++s) {
                if (!on_path[s]) {
                    best = s;
                    break;
                }
            }
        }
        tree.node_slot[node] = static_cast<std::uint16_t>(best);

        const std::size_t left = 2 * node + 1;
        if (left < internal) {
            for (auto r : subset) {
                const std::uint8_t bit = data[static_cast<std::size_t>(r) * m + best];
                members[left + bit].push_back(r);
            }
        }
        members[node].clear();
        members[node].shrink_to_fit();
    }
    return tree;
}

std::size_t default_subvector_length(std::size_t n) noexcept {
    auto m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (m * m < n) ++m;
    while (m > 1 && (m - 1) * (m - 1) >= n) --m;
    return std::max<std::size_t>(m, 1);
}

LnhTransform build_lnh(const Dataset &train, const LnhParams &params, std::uint64_t seed) {
    if (train.samples.empty()) throw std::invalid_argument("build_lnh: empty training set");
    if (params.k == 0 || params.l == 0 || params.d < 2) throw std::invalid_argument("build_lnh: bad parameters");
    train.validate();
    const std::size_t n = train.n;
    const std::size_t m = params.m == 0 ? default_subvector_length(n) : params.m;

    LnhTransform t{n, params.k, params.l, m, params.d, std::vector<DecisionTree>(params.k * params.l)};
    std::vector<int> labels(train.samples.size());
    for (std::size_t s = 0; s < labels.size(); ++s) labels[s] = train.samples[s].label;

    const auto total = static_cast<std::ptrdiff_t>(t.trees.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
        const auto u = static_cast<std::size_t>(idx);
        const std::size_t row = u / params.k;
        const std::size_t col = u % params.k;
        Rng rng = make_rng(seed, {0x1a4, row, col});
        std::vector<std::uint32_t> slots(m);
        for (auto &s : slots) s = static_cast<std::uint32_t>(uniform_below(rng, n));

        std::vector<std::uint8_t> projected(train.samples.size() * m);
        for (std::size_t s = 0; s < train.samples.size(); ++s) {
            const auto &x = train.samples[s].features;
            for (std::size_t j = 0; j < m; ++j) projected[s * m + j] = x[slots[j]] ? 1 : 0;
        }
        DecisionTree tree = train_decision_tree(projected, labels, m, params.d);
        tree.slots = std::move(slots);
        t.trees[u] = std::move(tree);
    }
    return t;
}

LshTransform truncate(const LshTransform &t, std::size_t k) {
    if (k == 0 || k > t.k) throw std::invalid_argument("truncate: K out of range");
    LshTransform out{t.n, k, t.l, std::vector<std::uint32_t>(k * t.l)};
    for (std::size_t r = 0; r < t.l; ++r) {
        for (std::size_t c = 0; c < k; ++c) out.indices[r * k + c] = t.index(r, c);
    }
    return out;
}

LnhTransform truncate(const LnhTransform &t, std::size_t k) {
    if (k == 0 || k > t.k) throw std::invalid_argument("truncate: K out of range");
    LnhTransform out{t.n, k, t.l, t.m, t.d, {}};
    out.trees.reserve(k * t.l);
    for (std::size_t r = 0; r < t.l; ++r) {
        for (std::size_t c = 0; c < k; ++c) out.trees.push_back(t.tree(r, c));
    }
    return out;
}

// --- application --------------------------------------------------------------

HashMatrix apply_lsh(const LshTransform &t, const BitVector &x) {
    require_same_dim(x.size(), t.n, "apply_lsh");
    HashMatrix out(t.l, t.k);
    for (std::size_t i = 0; i < t.indices.size(); ++i) out.bits[i] = x[t.indices[i]] ? 1 : 0;
    return out;
}

HashMatrix apply_lnh(const LnhTransform &t, const BitVector &x) {
    require_same_dim(x.size(), t.n, "apply_lnh");
    const std::size_t leaves = t.leaves();
    HashMatrix out(t.l, t.width());
    for (std::size_t r = 0; r < t.l; ++r) {
        for (std::size_t c = 0; c < t.k; ++c) {
            out.bits[r * out.cols + c * leaves + t.tree(r, c).route(x)] = 1;
        }
    }
    return out;
}

HashMatrix apply_transform(const HashingTransform &t, const BitVector &x) {
    return std::visit(
        [&x](const auto &v) -> HashMatrix {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, LshTransform>) {
                return apply_lsh(v, x);
            } else if constexpr (std::is_same_v<T, LnhTransform>) {
                return apply_lnh(v, x);
            } else {
                require_same_dim(x.size(), v.n, "apply identity");
                HashMatrix out(1, v.n);
                for (std::size_t i = 0; i < v.n; ++i) out.bits[i] = x[i] ? 1 : 0;
                return out;
            }
        },
        t);
}

std::vector<HashMatrix> apply_batch(const HashingTransform &t, std::span<const BitVector> xs) {
    std::vector<HashMatrix> out(xs.size());
    const auto count = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = apply_transform(t, xs[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<HashMatrix> serial::apply_batch(const HashingTransform &t, std::span<const BitVector> xs) {
    std::vector<HashMatrix> out;
    out.reserve(xs.size());
    for (const auto &x : xs) out.push_back(apply_transform(t, x));
    return out;
}

// --- estimators ---------------------------------------------------------------

namespace {

// Number of hash functions per row and the column width of each one.
struct UnitLayout {
    std::size_t per_row;
    std::size_t width;
};

UnitLayout unit_layout(const HashingTransform &t) {
    return std::visit(
        [](const auto &v) -> UnitLayout {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, LshTransform>) {
                return {v.k, 1};
            } else if constexpr (std::is_same_v<T, LnhTransform>) {
                return {v.k, v.leaves()};
            } else {
                return {v.n, 1};
            }
        },
        t);
}

// Units among the first `upto` of row `r` whose outputs differ.
std::size_t unit_disagreements(const HashMatrix &a, const HashMatrix &b, std::size_t r, UnitLayout layout,
                               std::size_t upto) {
    std::size_t diff = 0;
    const std::size_t base = r * a.cols;
    for (std::size_t u = 0; u < upto; ++u) {
        const std::size_t off = base + u * layout.width;
        if (!std::equal(a.bits.begin() + static_cast<std::ptrdiff_t>(off),
                        a.bits.begin() + static_cast<std::ptrdiff_t>(off + layout.width),
                        b.bits.begin() + static_cast<std::ptrdiff_t>(off))) {
            ++diff;
        }
    }
    return diff;
}

BitVector random_bits(Rng &rng, std::size_t n) {
    BitVector x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() & 1u) x.set(i);
    }
    return x;
}

struct Moments {
    double sum = 0;
    double sum_sq = 0;
    std::size_t count = 0;

    void add(double v) noexcept {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    void merge(const Moments &o) noexcept {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    [[nodiscard]] double mean() const noexcept { return count ? sum / static_cast<double>(count) : 0.0; }
    [[nodiscard]] double stderr_of_mean() const noexcept {
        if (count < 2) return 0.0;
        const double c = static_cast<double>(count);
        const double var = std::max(0.0, (sum_sq - sum * sum / c) / (c - 1));
        return std::sqrt(var / c);
    }
};

constexpr std::size_t kChunk = 1024;

} // namespace

CollisionEstimate estimate_collision(const HashingTransform &t, std::size_t eps, std::size_t trials,
                                     std::uint64_t seed) {
    const std::size_t n = input_dim(t);
    if (eps > n) throw std::invalid_argument("estimate_collision: eps must lie in [0, n]");
    if (trials == 0) throw std::invalid_argument("estimate_collision: trials must be positive");
    const std::size_t rows = row_count(t);
    const UnitLayout layout = unit_layout(t);

    const std::size_t chunks = (trials + kChunk - 1) / kChunk;
    std::vector<Moments> row_m(chunks);
    std::vector<Moments> unit_m(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        Rng rng = make_rng(seed, {0xc011, c});
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(trials, begin + kChunk);
        for (std::size_t trial = begin; trial < end; ++trial) {
            BitVector x = random_bits(rng, n);
            BitVector y = x;
            for (auto i : sample_distinct(rng, n, eps)) y.flip(i);
            const HashMatrix a = apply_transform(t, x);
            const HashMatrix b = apply_transform(t, y);
            std::size_t matching = 0;
            std::size_t unit_equal = 0;
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t diff = unit_disagreements(a, b, r, layout, layout.per_row);
                if (diff == 0) ++matching;
                unit_equal += layout.per_row - diff;
            }
            row_m[c].add(static_cast<double>(matching));
            unit_m[c].add(static_cast<double>(unit_equal) / static_cast<double>(rows * layout.per_row));
        }
    }
    Moments rows_total;
    Moments units_total;
    for (std::size_t c = 0; c < chunks; ++c) {
        rows_total.merge(row_m[c]);
        units_total.merge(unit_m[c]);
    }
    CollisionEstimate est;
    est.trials = trials;
    est.mean_matching_rows = rows_total.mean();
    est.matching_rows_stderr = rows_total.stderr_of_mean();
    est.row_frequency = est.mean_matching_rows / static_cast<double>(rows);
    est.row_frequency_stderr = est.matching_rows_stderr / static_cast<double>(rows);
    est.unit_frequency = units_total.mean();
    est.unit_frequency_stderr = units_total.stderr_of_mean();
    return est;
}

namespace {

std::pair<BitVector, BitVector> draw_pair(Rng &rng, std::size_t n, std::span<const BitVector> pool) {
    if (pool.size() >= 2) {
        const std::size_t i = uniform_below(rng, pool.size());
        std::size_t j = uniform_below(rng, pool.size() - 1);
        if (j >= i) ++j;
        return {pool[i], pool[j]};
    }
    return {random_bits(rng, n), random_bits(rng, n)};
}

// Mean over rows of |row distance over the first `upto` units - input distance|.
double pair_distortion(const HashMatrix &a, const HashMatrix &b, UnitLayout layout, std::size_t upto,
                       double input_distance) {
    double total = 0;
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double out = static_cast<double>(unit_disagreements(a, b, r, layout, upto)) / static_cast<double>(upto);
        total += std::abs(out - input_distance);
    }
    return total / static_cast<double>(a.rows);
}

void check_pool(std::span<const BitVector> pool, std::size_t n) {
    for (const auto &x : pool) require_same_dim(x.size(), n, "distortion pool");
}

} // namespace

DistortionEstimate estimate_distortion(const HashingTransform &t, std::size_t pairs, std::uint64_t seed,
                                       std::span<const BitVector> pool) {
    if (pairs == 0) throw std::invalid_argument("estimate_distortion: pairs must be positive");
    const std::size_t n = input_dim(t);
    check_pool(pool, n);
    const UnitLayout layout = unit_layout(t);
    const std::size_t chunks = (pairs + kChunk - 1) / kChunk;
    std::vector<Moments> part(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        Rng rng = make_rng(seed, {0xd157, c});
        const std::size_t end = std::min(pairs, (c + 1) * kChunk);
        for (std::size_t p = c * kChunk; p < end; ++p) {
            const auto [x1, x2] = draw_pair(rng, n, pool);
            const HashMatrix a = apply_transform(t, x1);
            const HashMatrix b = apply_transform(t, x2);
            part[c].add(pair_distortion(a, b, layout, layout.per_row, normalized_hamming(x1, x2)));
        }
    }
    Moments total;
    for (const auto &m : part) total.merge(m);
    return {pairs, total.mean(), total.stderr_of_mean()};
}

DistortionComparison compare_distortion_doubling(const HashingTransform &doubled, std::size_t pairs,
                                                 std::uint64_t seed, std::span<const BitVector> pool) {
    if (pairs == 0) throw std::invalid_argument("compare_distortion_doubling: pairs must be positive");
    const UnitLayout layout = unit_layout(doubled);
    if (layout.per_row < 2 || layout.per_row % 2 != 0) {
        throw std::invalid_argument("compare_distortion_doubling: transform needs an even number (>=2) of functions");
    }
    const std::size_t half = layout.per_row / 2;
    const std::size_t n = input_dim(doubled);
    check_pool(pool, n);
    const std::size_t chunks = (pairs + kChunk - 1) / kChunk;
    std::vector<Moments> dk(chunks);
    std::vector<Moments> d2k(chunks);
    std::vector<Moments> diff(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        Rng rng = make_rng(seed, {0xd2c, c});
        const std::size_t end = std::min(pairs, (c + 1) * kChunk);
        for (std::size_t p = c * kChunk; p < end; ++p) {
            const auto [x1, x2] = draw_pair(rng, n, pool);
            const HashMatrix a = apply_transform(doubled, x1);
            const HashMatrix b = apply_transform(doubled, x2);
            const double dn = normalized_hamming(x1, x2);
            const double small = pair_distortion(a, b, layout, half, dn);
            const double big = pair_distortion(a, b, layout, layout.per_row, dn);
            dk[c].add(small);
            d2k[c].add(big);
            diff[c].add(big - small);
        }
    }
    Moments a, b, d;
    for (std::size_t c = 0; c < chunks; ++c) {
        a.merge(dk[c]);
        b.merge(d2k[c]);
        d.merge(diff[c]);
    }
    return {pairs, a.mean(), b.mean(), d.mean(), d.stderr_of_mean()};
}

std::size_t matching_rows_k_bound(double theta, double l, double p1) {
    if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("matching_rows_k_bound: P1 must lie in (0,1)");
    if (!(theta > 0.0)) throw std::invalid_argument("matching_rows_k_bound: theta must be positive");
    if (theta > l) throw std::invalid_argument("matching_rows_k_bound: theta > L, no K satisfies the bound");
    const double approx = (std::log(theta) - std::log(l)) / std::log(p1);
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(approx)));
    auto holds = [&](std::size_t kk) { return l * std::pow(p1, static_cast<double>(kk)) >= theta; };
    while (k > 0 && !holds(k)) --k;
    while (holds(k + 1)) ++k;
    return k;
}

// --- serialization ------------------------------------------------------------

void detail::write_transform_records(std::ostream &out, const HashingTransform &t) {
    using records::json;
    std::visit(
        [&out](const auto &v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, LshTransform>) {
                records::write(out, json{{"kind", "lsh"}, {"n", v.n}, {"K", v.k}, {"L", v.l}});
                for (std::size_t r = 0; r < v.l; ++r) {
                    std::vector<std::uint32_t> row(v.indices.begin() + static_cast<std::ptrdiff_t>(r * v.k),
                                                   v.indices.begin() + static_cast<std::ptrdiff_t>((r + 1) * v.k));
                    records::write(out, json{{"row", r}, {"indices", row}});
                }
            } else if constexpr (std::is_same_v<T, LnhTransform>) {
                records::write(out,
                               json{{"kind", "lnh"}, {"n", v.n}, {"K", v.k}, {"L", v.l}, {"m", v.m}, {"d", v.d}});
                for (std::size_t r = 0; r < v.l; ++r) {
                    for (std::size_t c = 0; c < v.k; ++c) {
                        const auto &tree = v.tree(r, c);
                        records::write(out, json{{"row", r}, {"col", c}, {"slots", tree.slots}, {"nodes", tree.node_slot}});
                    }
                }
            } else {
                records::write(out, json{{"kind", "identity"}, {"n", v.n}});
            }
        },
        t);
}

HashingTransform detail::read_transform_records(records::Reader &reader) {
    const auto head = reader.next("transform header");
    const auto kind = reader.field<std::string>(head, "kind");
    const auto n = reader.field<std::size_t>(head, "n");
    if (n == 0) reader.fail("transform n must be positive");
    if (kind == "identity") return IdentityTransform{n};
    const auto k = reader.field<std::size_t>(head, "K");
    const auto l = reader.field<std::size_t>(head, "L");
    if (k == 0 || l == 0) reader.fail("transform K and L must be positive");
    if (kind == "lsh") {
        LshTransform t{n, k, l, {}};
        t.indices.reserve(k * l);
        for (std::size_t r = 0; r < l; ++r) {
            const auto rec = reader.next("lsh row");
            if (reader.field<std::size_t>(rec, "row") != r) reader.fail("lsh rows out of order");
            const auto idx = reader.field<std::vector<std::uint32_t>>(rec, "indices");
            if (idx.size() != k) reader.fail("lsh row has wrong width");
            for (auto i : idx) {
                if (i >= n) reader.fail("lsh index out of range");
                t.indices.push_back(i);
            }
        }
        return t;
    }
    if (kind == "lnh") {
        LnhTransform t{n, k, l, reader.field<std::size_t>(head, "m"), reader.field<std::size_t>(head, "d"), {}};
        if (t.m == 0 || t.d < 2 || t.d > 16) reader.fail("lnh m/d out of range");
        t.trees.reserve(k * l);
        for (std::size_t r = 0; r < l; ++r) {
            for (std::size_t c = 0; c < k; ++c) {
                const auto rec = reader.next("lnh tree");
                if (reader.field<std::size_t>(rec, "row") != r || reader.field<std::size_t>(rec, "col") != c) {
                    reader.fail("lnh trees out of order");
                }
                DecisionTree tree;
                tree.m = t.m;
                tree.d = t.d;
                tree.slots = reader.field<std::vector<std::uint32_t>>(rec, "slots");
                tree.node_slot = reader.field<std::vector<std::uint16_t>>(rec, "nodes");
                if (tree.slots.size() != t.m || tree.node_slot.size() != tree.internal_count()) {
                    reader.fail("lnh tree has wrong shape");
                }
                for (auto s : tree.slots) {
                    if (s >= n) reader.fail("lnh slot out of range");
                }
                for (auto s : tree.node_slot) {
                    if (s >= t.m) reader.fail("lnh node slot out of range");
                }
                t.trees.push_back(std::move(tree));
            }
        }
        return t;
    }
    reader.fail("unknown transform kind '" + kind + "'");
}

void write_transform(std::ostream &out, const HashingTransform &t) { detail::write_transform_records(out, t); }

HashingTransform read_transform(std::istream &in) {
    records::Reader reader(in);
    return detail::read_transform_records(reader);
}

} // namespace hashtran
