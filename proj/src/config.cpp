#include "hashtran/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include "hashtran/errors.hpp"

namespace hashtran {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::string> &parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out;
}

std::uint64_t parse_u64(const std::string &s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) throw std::invalid_argument("not an unsigned integer: '" + s + "'");
    return v;
}

double parse_double(const std::string &s) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v))
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return {buf, p};
}

GridCell parse_cell(const std::string &s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw std::invalid_argument("grid cell must look like KxL: '" + s + "'");
    return {parse_u64(trim(s.substr(0, x))), parse_u64(trim(s.substr(x + 1)))};
}

struct Binding {
    ConfigKey doc;
    std::function<std::string(const ExperimentConfig &)> get;
    std::function<void(ExperimentConfig &, const std::string &)> set;
};

// Accessors take a mutable config; getters cast constness away only to read.
template <class F>
Binding size_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) { return std::to_string(field(const_cast<ExperimentConfig &>(c))); },
            [field](ExperimentConfig &c, const std::string &v) { field(c) = static_cast<std::size_t>(parse_u64(v)); }};
}

template <class F>
Binding double_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) { return format_double(field(const_cast<ExperimentConfig &>(c))); },
            [field](ExperimentConfig &c, const std::string &v) { field(c) = parse_double(v); }};
}

template <class F>
Binding string_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) { return field(const_cast<ExperimentConfig &>(c)); },
            [field](ExperimentConfig &c, const std::string &v) { field(c) = v; }};
}

template <class F>
Binding strings_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) { return join(field(const_cast<ExperimentConfig &>(c))); },
            [field](ExperimentConfig &c, const std::string &v) { field(c) = split_list(v); }};
}

template <class F>
Binding sizes_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) {
                std::vector<std::string> parts;
                for (auto v : field(const_cast<ExperimentConfig &>(c))) parts.push_back(std::to_string(v));
                return join(parts);
            },
            [field](ExperimentConfig &c, const std::string &v) {
                std::vector<std::size_t> out;
                for (const auto &p : split_list(v)) out.push_back(static_cast<std::size_t>(parse_u64(p)));
                field(c) = out;
            }};
}

template <class F>
Binding doubles_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) {
                std::vector<std::string> parts;
                for (auto v : field(const_cast<ExperimentConfig &>(c))) parts.push_back(format_double(v));
                return join(parts);
            },
            [field](ExperimentConfig &c, const std::string &v) {
                std::vector<double> out;
                for (const auto &p : split_list(v)) out.push_back(parse_double(p));
                field(c) = out;
            }};
}

template <class F>
Binding grid_key(const char *key, const char *help, F field) {
    return {{key, help},
            [field](const ExperimentConfig &c) {
                std::vector<std::string> parts;
                for (const auto &g : field(const_cast<ExperimentConfig &>(c)))
                    parts.push_back(std::to_string(g.k) + "x" + std::to_string(g.l));
                return join(parts);
            },
            [field](ExperimentConfig &c, const std::string &v) {
                std::vector<GridCell> out;
                for (const auto &p : split_list(v)) out.push_back(parse_cell(p));
                field(c) = out;
            }};
}

using C = ExperimentConfig;

const std::vector<Binding> &bindings() {
    static const std::vector<Binding> table = {
        {{"seed", "master seed; every other seed is derived from it"},
         [](const C &c) { return std::to_string(c.seed); },
         [](C &c, const std::string &v) { c.seed = parse_u64(v); }},

        string_key("data.dir", "directory written by gen-data; empty generates the data from the seed",
                   [](C &c) -> std::string & { return c.data_dir; }),
        size_key("data.n", "feature dimension", [](C &c) -> std::size_t & { return c.n; }),
        size_key("data.samples_per_class", "generated samples per class",
                 [](C &c) -> std::size_t & { return c.samples_per_class; }),
        double_key("data.mask_fraction", "fraction of features an attacker may insert",
                   [](C &c) -> double & { return c.mask_fraction; }),
        double_key("split.train", "training share", [](C &c) -> double & { return c.split.train; }),
        double_key("split.valid", "validation share", [](C &c) -> double & { return c.split.valid; }),
        double_key("split.test", "test share", [](C &c) -> double & { return c.split.test; }),

        size_key("train.epochs", "training epochs for every model", [](C &c) -> std::size_t & { return c.epochs; }),
        size_key("train.batch", "mini-batch size", [](C &c) -> std::size_t & { return c.batch; }),
        double_key("train.dropout", "dropout after every hidden ReLU", [](C &c) -> double & { return c.dropout; }),
        double_key("train.learning_rate", "Adam step size", [](C &c) -> double & { return c.learning_rate; }),
        sizes_key("dnn.hidden", "hidden widths of the plain networks (standard, RFN, adversarial, surrogate, DNN-DAE)",
                  [](C &c) -> std::vector<std::size_t> & { return c.dnn.hidden; }),
        double_key("surrogate.dropout", "dropout used to train the attacker's surrogate",
                   [](C &c) -> double & { return c.surrogate_dropout; }),

        size_key("lsh.k", "bits sampled per LSH row", [](C &c) -> std::size_t & { return c.lsh_k; }),
        size_key("lsh.l", "LSH rows", [](C &c) -> std::size_t & { return c.lsh_l; }),
        size_key("lsh.k1", "units per row-wise layer, LSH models", [](C &c) -> std::size_t & { return c.lsh_arch.k1; }),
        size_key("lsh.mix", "mixing layer width, LSH models", [](C &c) -> std::size_t & { return c.lsh_arch.mix; }),
        sizes_key("lsh.head", "classifier head widths, LSH models",
                  [](C &c) -> std::vector<std::size_t> & { return c.lsh_arch.head; }),
        size_key("lnh.k", "trees per LNH row", [](C &c) -> std::size_t & { return c.lnh_k; }),
        size_key("lnh.l", "LNH rows", [](C &c) -> std::size_t & { return c.lnh_l; }),
        size_key("lnh.m", "bits sampled per tree; 0 selects ceil(sqrt(n))", [](C &c) -> std::size_t & { return c.lnh_m; }),
        size_key("lnh.d", "tree height (2^(d-1) leaves)", [](C &c) -> std::size_t & { return c.lnh_d; }),
        size_key("lnh.k1", "units per row-wise layer, LNH models", [](C &c) -> std::size_t & { return c.lnh_arch.k1; }),
        size_key("lnh.mix", "mixing layer width, LNH models", [](C &c) -> std::size_t & { return c.lnh_arch.mix; }),
        sizes_key("lnh.head", "classifier head widths, LNH models",
                  [](C &c) -> std::vector<std::size_t> & { return c.lnh_arch.head; }),
        double_key("dae.lambda_lsh", "reconstruction weight for LSH-DAE", [](C &c) -> double & { return c.lambda_lsh; }),
        double_key("dae.lambda_lnh", "reconstruction weight for LNH-DAE", [](C &c) -> double & { return c.lambda_lnh; }),
        double_key("dae.lambda_dnn", "reconstruction weight for DNN-DAE", [](C &c) -> double & { return c.lambda_dnn; }),
        double_key("dae.noise_eps", "noise scale: flip rate ~ max(0, N(0, (eps/n)^2))",
                   [](C &c) -> double & { return c.noise_eps; }),
        double_key("reject.pass_rate", "validation pass rate used to calibrate t_r",
                   [](C &c) -> double & { return c.pass_rate; }),

        double_key("rfn.mean", "mean nullification rate", [](C &c) -> double & { return c.rfn_mean; }),
        double_key("rfn.stddev", "stddev of the nullification rate", [](C &c) -> double & { return c.rfn_stddev; }),
        size_key("adv.eps", "JSMA budget used inside adversarial training",
                 [](C &c) -> std::size_t & { return c.adversarial.eps; }),
        double_key("adv.lambda", "weight of adversarial samples", [](C &c) -> double & { return c.adversarial.lambda; }),
        double_key("adv.subsample", "fraction of training malware attacked per epoch",
                   [](C &c) -> double & { return c.adversarial.subsample; }),

        strings_key("attack.list", "attacks to run: jsma, gdkde, cw, mimicry",
                    [](C &c) -> std::vector<std::string> & { return c.attacks; }),
        string_key("attack.eps_mode", "absolute (flip counts) or fraction (of n)",
                   [](C &c) -> std::string & { return c.eps_mode; }),
        sizes_key("attack.eps", "flip budgets in absolute mode",
                  [](C &c) -> std::vector<std::size_t> & { return c.eps_absolute; }),
        doubles_key("attack.eps_fraction", "budgets as fractions of n in fraction mode",
                    [](C &c) -> std::vector<double> & { return c.eps_fraction; }),
        size_key("attack.seeds", "malware test samples attacked", [](C &c) -> std::size_t & { return c.attack_seeds; }),
        double_key("attack.jsma.confidence", "surrogate benign probability at which JSMA stops (0.5 = evasion)",
                   [](C &c) -> double & { return c.jsma_confidence; }),
        double_key("attack.gdkde.lambda", "weight of the kernel density term",
                   [](C &c) -> double & { return c.gdkde.lambda; }),
        double_key("attack.gdkde.sigma", "Laplacian kernel width; 0 selects n/10",
                   [](C &c) -> double & { return c.gdkde.sigma; }),
        double_key("attack.cw.lambda", "weight of the margin term", [](C &c) -> double & { return c.cw.lambda; }),
        double_key("attack.cw.iota", "confidence of the margin term", [](C &c) -> double & { return c.cw.iota; }),
        double_key("attack.cw.step", "gradient step size", [](C &c) -> double & { return c.cw.step; }),
        size_key("attack.cw.steps", "gradient steps", [](C &c) -> std::size_t & { return c.cw.steps; }),
        size_key("attack.mimicry.guides", "benign samples tried per malware sample",
                 [](C &c) -> std::size_t & { return c.mimicry_guides; }),

        size_key("eval.random_probes", "uniform random vectors used to measure rejection",
                 [](C &c) -> std::size_t & { return c.random_probes; }),
        string_key("model.kind",
                   "model for train/evaluate: dnn, rfn, adversarial, surrogate, lsh, lnh, lsh-dae, lnh-dae, dnn-dae",
                   [](C &c) -> std::string & { return c.model_kind; }),
        string_key("eval.checkpoint", "checkpoint read by evaluate and calibrate",
                   [](C &c) -> std::string & { return c.checkpoint; }),
        strings_key("eval.adversarial", "adversarial set files for evaluate; empty generates them",
                    [](C &c) -> std::vector<std::string> & { return c.adversarial_files; }),
        grid_key("rq1.lsh_grid", "(K, L) cells for the LSH rows, as KxL", [](C &c) -> std::vector<GridCell> & { return c.rq1_lsh_grid; }),
        grid_key("rq1.lnh_grid", "(K, L) cells for the LNH rows, as KxL", [](C &c) -> std::vector<GridCell> & { return c.rq1_lnh_grid; }),
        strings_key("rq2.models", "defenses compared in rq2", [](C &c) -> std::vector<std::string> & { return c.rq2_models; }),
        strings_key("rq3.models", "models compared in rq3", [](C &c) -> std::vector<std::string> & { return c.rq3_models; }),

        size_key("theorem.n", "dimension for the collision checks", [](C &c) -> std::size_t & { return c.theorem_n; }),
        size_key("theorem.eps", "flipped coordinates per trial", [](C &c) -> std::size_t & { return c.theorem_eps; }),
        size_key("theorem.k", "LSH bits per row", [](C &c) -> std::size_t & { return c.theorem_k; }),
        size_key("theorem.l", "LSH rows", [](C &c) -> std::size_t & { return c.theorem_l; }),
        size_key("theorem.trials", "LSH collision trials", [](C &c) -> std::size_t & { return c.theorem_trials; }),
        size_key("theorem.lnh_k", "LNH trees per row", [](C &c) -> std::size_t & { return c.theorem_lnh_k; }),
        size_key("theorem.lnh_l", "LNH rows", [](C &c) -> std::size_t & { return c.theorem_lnh_l; }),
        size_key("theorem.lnh_trials", "LNH collision trials", [](C &c) -> std::size_t & { return c.theorem_lnh_trials; }),
        sizes_key("theorem.doubling_k", "K values for the doubling comparison",
                  [](C &c) -> std::vector<std::size_t> & { return c.theorem_doubling_k; }),
        size_key("theorem.doubling_l", "rows for the doubling comparison",
                 [](C &c) -> std::size_t & { return c.theorem_doubling_l; }),
        size_key("theorem.pairs", "input pairs per transform in the doubling comparison",
                 [](C &c) -> std::size_t & { return c.theorem_pairs; }),
        size_key("theorem.realizations", "independent transforms per doubling comparison",
                 [](C &c) -> std::size_t & { return c.theorem_realizations; }),
    };
    return table;
}

} // namespace

FlatConfig parse_flat_config(std::istream &in) {
    FlatConfig out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(number, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw FormatError(number, "empty key");
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) throw FormatError(number, "duplicate key '" + key + "'");
    }
    return out;
}

FlatConfig load_flat_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_flat_config(in);
}

void write_flat_config(std::ostream &out, const FlatConfig &cfg) {
    for (const auto &[k, v] : cfg) out << k << " = " << v << '\n';
}

TrainConfig ExperimentConfig::train_config(std::uint64_t s) const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch = batch;
    t.dropout = dropout;
    t.adam.learning_rate = learning_rate;
    t.seed = s;
    return t;
}

LnhParams ExperimentConfig::lnh_params() const { return {lnh_k, lnh_l, lnh_m, lnh_d}; }

std::vector<std::size_t> ExperimentConfig::eps_grid() const {
    if (eps_mode == "absolute") return eps_absolute;
    if (eps_mode != "fraction") throw std::invalid_argument("attack.eps_mode must be absolute or fraction");
    std::vector<std::size_t> out;
    for (double f : eps_fraction)
        out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n)))));
    return out;
}

std::size_t ExperimentConfig::mid_eps() const {
    const auto g = eps_grid();
    if (g.empty()) throw std::invalid_argument("empty eps grid");
    return g[g.size() / 2];
}

const std::vector<ConfigKey> &config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto &b : bindings()) out.push_back(b.doc);
        return out;
    }();
    return keys;
}

ExperimentConfig config_from_flat(const FlatConfig &flat) {
    ExperimentConfig cfg;
    const auto &table = bindings();
    for (const auto &[key, value] : flat) {
        const auto it = std::find_if(table.begin(), table.end(), [&](const Binding &b) { return b.doc.key == key; });
        if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
        try {
            it->set(cfg, value);
        } catch (const std::invalid_argument &e) {
            throw std::invalid_argument("config key '" + key + "': " + e.what());
        }
    }
    validate(cfg);
    return cfg;
}

FlatConfig config_to_flat(const ExperimentConfig &cfg) {
    FlatConfig out;
    for (const auto &b : bindings()) out[b.doc.key] = b.get(cfg);
    return out;
}

void validate(const ExperimentConfig &c) {
    auto require = [](bool ok, const char *what) {
        if (!ok) throw std::invalid_argument(std::string("config: ") + what);
    };
    require(c.n > 0, "data.n must be positive");
    require(c.samples_per_class > 0 || !c.data_dir.empty(), "data.samples_per_class must be positive");
    require(c.mask_fraction > 0 && c.mask_fraction <= 1, "data.mask_fraction must lie in (0,1]");
    require(std::abs(c.split.train + c.split.valid + c.split.test - 1.0) < 1e-9, "split shares must sum to 1");
    require(c.epochs > 0 && c.batch > 0, "train.epochs and train.batch must be positive");
    require(c.dropout >= 0 && c.dropout < 1 && c.surrogate_dropout >= 0 && c.surrogate_dropout < 1,
            "dropout must lie in [0,1)");
    require(c.learning_rate > 0, "train.learning_rate must be positive");
    require(c.dnn.hidden.size() >= 2, "dnn.hidden needs at least two layers");
    require(c.lsh_k > 0 && c.lsh_l > 0 && c.lnh_k > 0 && c.lnh_l > 0 && c.lnh_d >= 2, "hash shapes must be positive");
    require(c.lambda_lsh >= 0 && c.lambda_lnh >= 0 && c.lambda_dnn >= 0, "dae.lambda_* must be non-negative");
    require(c.noise_eps >= 0, "dae.noise_eps must be non-negative");
    require(c.pass_rate > 0 && c.pass_rate <= 1, "reject.pass_rate must lie in (0,1]");
    require(c.rfn_stddev >= 0, "rfn.stddev must be non-negative");
    require(c.adversarial.subsample > 0 && c.adversarial.subsample <= 1, "adv.subsample must lie in (0,1]");
    for (const auto &a : c.attacks)
        require(a == "jsma" || a == "gdkde" || a == "cw" || a == "mimicry", "attack.list has an unknown attack");
    require(c.eps_mode == "absolute" || c.eps_mode == "fraction", "attack.eps_mode must be absolute or fraction");
    require(!c.eps_grid().empty(), "attack eps grid is empty");
    for (double f : c.eps_fraction) require(f > 0 && f <= 1, "attack.eps_fraction values must lie in (0,1]");
    require(c.jsma_confidence >= 0.5 && c.jsma_confidence < 1, "attack.jsma.confidence must lie in [0.5,1)");
    require(c.attack_seeds > 0 && c.mimicry_guides > 0, "attack.seeds and attack.mimicry.guides must be positive");
    require(c.theorem_eps <= c.theorem_n && c.theorem_trials > 0 && c.theorem_pairs > 0 &&
                c.theorem_realizations > 1, "theorem settings out of range");
}

} // namespace hashtran
