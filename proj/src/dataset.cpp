#include "hashtran/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtran/errors.hpp"
#include "hashtran/random.hpp"

namespace hashtran {

using nlohmann::json;

std::size_t Dataset::count_label(int label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [label](const LabeledSample &s) { return s.label == label; }));
}

void Dataset::validate() const {
    for (const auto &s : samples) {
        require_same_dim(s.features.size(), n, "dataset sample dimension");
        if (s.label != kBenign && s.label != kMalware) throw std::invalid_argument("label must be 0 or 1");
    }
}

void GeneratorConfig::validate() const {
    if (n == 0) throw std::invalid_argument("generator: n must be positive");
    require_same_dim(benign_probs.size(), n, "generator benign_probs");
    require_same_dim(malware_probs.size(), n, "generator malware_probs");
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!std::all_of(benign_probs.begin(), benign_probs.end(), in_unit) ||
        !std::all_of(malware_probs.begin(), malware_probs.end(), in_unit)) {
        throw std::invalid_argument("generator: probabilities must lie in [0,1]");
    }
    if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) {
        throw std::invalid_argument("generator: mask_fraction must lie in (0,1]");
    }
}

GeneratorConfig default_generator_config(std::size_t n, std::size_t samples_per_class, std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.n = n;
    cfg.samples_per_class = samples_per_class;
    cfg.seed = seed;
    cfg.mask_fraction = 0.85;
    cfg.benign_probs.assign(n, 0.0);
    cfg.malware_probs.assign(n, 0.0);

    Rng rng = make_rng(seed, {0x70f11e});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);

    // few moderately malicious features, many rare benign-only features
    const auto n_malicious = static_cast<std::size_t>(std::ceil(0.06 * static_cast<double>(n)));
    const auto n_rare = static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(n)));

    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        const double u = uniform01(rng);
        const double v = uniform01(rng);
        const double base = 0.01 + 0.07 * u * u;
        if (rank < n_malicious) {
            cfg.benign_probs[i] = base;
            cfg.malware_probs[i] = base + 0.05 + 0.20 * v;
        } else if (rank < n_malicious + n_rare) {
            cfg.benign_probs[i] = 0.01 + 0.05 * v;
            cfg.malware_probs[i] = 0.0;
        } else {
            cfg.benign_probs[i] = base;
            cfg.malware_probs[i] = base;
        }
    }
    return cfg;
}

PerturbationMask select_insertable(const std::vector<double> &benign_probs, const std::vector<double> &malware_probs,
                                   double mask_fraction) {
    require_same_dim(benign_probs.size(), malware_probs.size(), "select_insertable");
    const std::size_t n = benign_probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return malware_probs[a] - benign_probs[a] < malware_probs[b] - benign_probs[b];
    });
    const auto take = std::min(n, static_cast<std::size_t>(std::ceil(mask_fraction * static_cast<double>(n) - 1e-9)));
    PerturbationMask mask{BitVector(n)};
    for (std::size_t k = 0; k < take; ++k) mask.insertable.set(order[k]);
    return mask;
}

GeneratedData generate_synthetic_dataset(const GeneratorConfig &cfg) {
    cfg.validate();
    GeneratedData out;
    out.dataset.n = cfg.n;
    out.dataset.name = cfg.name;
    out.dataset.samples.reserve(2 * cfg.samples_per_class);
    Rng rng = make_rng(cfg.seed, {0xda7a});
    for (int label : {kBenign, kMalware}) {
        const auto &probs = label == kBenign ? cfg.benign_probs : cfg.malware_probs;
        for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
            LabeledSample sample{BitVector(cfg.n), label};
            for (std::size_t i = 0; i < cfg.n; ++i) {
                if (uniform01(rng) < probs[i]) sample.features.set(i);
            }
            out.dataset.samples.push_back(std::move(sample));
        }
    }
    out.mask = select_insertable(cfg.benign_probs, cfg.malware_probs, cfg.mask_fraction);
    return out;
}

std::array<std::vector<std::size_t>, 3> split_indices(const Dataset &ds, const SplitRatios &ratios,
                                                       std::uint64_t seed) {
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must be non-negative and sum to 1");
    }
    std::array<std::vector<std::size_t>, 3> parts;
    for (int label : {kBenign, kMalware}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            if (ds.samples[i].label == label) idx.push_back(i);
        }
        Rng rng = make_rng(seed, {0x5b117, static_cast<std::uint64_t>(label)});
        shuffle_in_place(idx, rng);
        const auto total = static_cast<double>(idx.size());
        const auto n_train = std::min(idx.size(), static_cast<std::size_t>(std::llround(ratios.train * total)));
        const auto n_valid =
            std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(ratios.valid * total)));
        parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
        parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
    }
    for (std::size_t p = 0; p < parts.size(); ++p) {
        Rng rng = make_rng(seed, {0x5b118, p});
        shuffle_in_place(parts[p], rng);
    }
    return parts;
}

DatasetSplit split_dataset(const Dataset &ds, const SplitRatios &ratios, std::uint64_t seed) {
    const auto parts = split_indices(ds, ratios, seed);
    auto pick = [&](const std::vector<std::size_t> &idx, const char *suffix) {
        Dataset out{ds.n, ds.name + suffix, {}};
        out.samples.reserve(idx.size());
        for (auto i : idx) out.samples.push_back(ds.samples[i]);
        return out;
    };
    return {pick(parts[0], ".train"), pick(parts[1], ".valid"), pick(parts[2], ".test")};
}

// --- IO ---------------------------------------------------------------------

namespace {

json parse_line(const std::string &line, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error &e) {
        throw FormatError(lineno, std::string("malformed JSON: ") + e.what());
    }
}

std::vector<std::size_t> read_index_list(const json &rec, const char *key, std::size_t n, std::size_t lineno) {
    if (!rec.contains(key) || !rec[key].is_array()) {
        throw FormatError(lineno, std::string("missing array field '") + key + "'");
    }
    std::vector<std::size_t> out;
    out.reserve(rec[key].size());
    for (const auto &v : rec[key]) {
        if (!v.is_number_unsigned()) throw FormatError(lineno, "bit index must be a non-negative integer");
        const auto idx = v.get<std::size_t>();
        if (idx >= n) {
            throw FormatError(lineno, "bit index " + std::to_string(idx) + " >= n=" + std::to_string(n));
        }
        if (!out.empty() && idx <= out.back()) throw FormatError(lineno, "bit indices must be strictly ascending");
        out.push_back(idx);
    }
    return out;
}

std::size_t read_dim(const json &rec, std::size_t lineno) {
    if (!rec.contains("n") || !rec["n"].is_number_unsigned() || rec["n"].get<std::size_t>() == 0) {
        throw FormatError(lineno, "header needs a positive integer 'n'");
    }
    return rec["n"].get<std::size_t>();
}

} // namespace

void write_dataset(std::ostream &out, const Dataset &ds) {
    out << json{{"n", ds.n}, {"name", ds.name}}.dump() << '\n';
    for (const auto &s : ds.samples) {
        require_same_dim(s.features.size(), ds.n, "write_dataset");
        out << json{{"ones", s.features.ones()}, {"label", s.label}}.dump() << '\n';
    }
}

Dataset read_dataset(std::istream &in) {
    std::string line;
    std::size_t lineno = 0;
    Dataset ds;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json rec = parse_line(line, lineno);
        if (!rec.is_object()) throw FormatError(lineno, "record must be a JSON object");
        if (!have_header) {
            ds.n = read_dim(rec, lineno);
            ds.name = rec.value("name", std::string{});
            have_header = true;
            continue;
        }
        const auto ones = read_index_list(rec, "ones", ds.n, lineno);
        if (!rec.contains("label") || !rec["label"].is_number_integer()) {
            throw FormatError(lineno, "missing integer 'label'");
        }
        const int label = rec["label"].get<int>();
        if (label != kBenign && label != kMalware) throw FormatError(lineno, "label must be 0 or 1");
        ds.samples.push_back({BitVector::from_ones(ds.n, ones), label});
    }
    if (!have_header) throw FormatError(0, "empty dataset file");
    return ds;
}

void write_mask(std::ostream &out, const PerturbationMask &mask) {
    out << json{{"n", mask.n()}, {"insertable", mask.insertable.ones()}}.dump() << '\n';
}

PerturbationMask read_mask(std::istream &in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json rec = parse_line(line, lineno);
        const std::size_t n = read_dim(rec, lineno);
        return {BitVector::from_ones(n, read_index_list(rec, "insertable", n, lineno))};
    }
    throw FormatError(0, "empty mask file");
}

namespace {

std::ofstream open_out(const std::string &path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return f;
}

} // namespace

void save_dataset(const std::string &path, const Dataset &ds) {
    auto f = open_out(path);
    write_dataset(f, ds);
}

Dataset load_dataset(const std::string &path) {
    auto f = open_in(path);
    return read_dataset(f);
}

void save_mask(const std::string &path, const PerturbationMask &mask) {
    auto f = open_out(path);
    write_mask(f, mask);
}

PerturbationMask load_mask(const std::string &path) {
    auto f = open_in(path);
    return read_mask(f);
}

} // namespace hashtran
