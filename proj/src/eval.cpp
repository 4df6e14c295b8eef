#include "hashtran/eval.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtran/errors.hpp"
#include "hashtran/random.hpp"

namespace hashtran {

using nlohmann::json;

namespace {

// OpenMP regions must not leak exceptions; the first one is rethrown afterwards.
template <class F>
void parallel_for(std::size_t count, F &&body) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical(hashtran_parallel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::pair<double, double> mean_and_stderr(const std::vector<double> &v) {
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    return {mean, se};
}

std::string cell_name(GridCell c) { return std::to_string(c.k) + "x" + std::to_string(c.l); }

std::vector<BitVector> features_of(const Dataset &ds) {
    std::vector<BitVector> out;
    out.reserve(ds.size());
    for (const auto &s : ds.samples) out.push_back(s.features);
    return out;
}

std::vector<BitVector> benign_of(const Dataset &ds) {
    std::vector<BitVector> out;
    for (const auto &s : ds.samples)
        if (s.label == kBenign) out.push_back(s.features);
    return out;
}

} // namespace

// --- metrics --------------------------------------------------------------------

double MetricsReport::error_rate() const noexcept {
    if (total == 0) return 0;
    return static_cast<double>(fp + fn + (rejected - rejected_adversarial)) / static_cast<double>(total);
}

MetricsReport compute_metrics(std::span<const Verdict> predictions, std::span<const int> labels,
                              const std::vector<bool> &adversarial_flags) {
    require_same_dim(predictions.size(), labels.size(), "compute_metrics labels");
    require_same_dim(predictions.size(), adversarial_flags.size(), "compute_metrics adversarial flags");
    MetricsReport r;
    r.total = predictions.size();
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] != kBenign && labels[i] != kMalware) throw std::invalid_argument("compute_metrics: label must be 0 or 1");
        if (predictions[i] == Verdict::rejected) {
            ++r.rejected;
            if (adversarial_flags[i]) ++r.rejected_adversarial;
            continue;
        }
        const bool said_malware = predictions[i] == Verdict::malware;
        if (labels[i] == kMalware) {
            said_malware ? ++r.tp : ++r.fn;
        } else {
            said_malware ? ++r.fp : ++r.tn;
        }
    }
    if (r.total > 0)
        r.accuracy = static_cast<double>(r.tp + r.tn + r.rejected_adversarial) / static_cast<double>(r.total);
    if (r.fn + r.tp > 0) r.fnr = static_cast<double>(r.fn) / static_cast<double>(r.fn + r.tp);
    if (r.fp + r.tn > 0) r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
    return r;
}

// --- deployed models ------------------------------------------------------------

Verdict predict(const Defense &model, const BitVector &x, std::uint64_t query_seed) {
    if (const auto *net = std::get_if<nn::Network>(&model)) {
        require_same_dim(x.size(), net->input_dim(), "predict input");
        return nn::classify(nn::probabilities_of(*net, x.to_dense())) == kMalware ? Verdict::malware : Verdict::benign;
    }
    if (const auto *rfn = std::get_if<RfnModel>(&model))
        return rfn_predict(*rfn, x, query_seed) == kMalware ? Verdict::malware : Verdict::benign;
    return predict_with_rejection(std::get<HashTranModel>(model), x);
}

std::vector<Verdict> predict_all(const Defense &model, std::span<const BitVector> xs, std::uint64_t seed) {
    std::vector<Verdict> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = predict(model, xs[i], derive_seed(seed, {i})); });
    return out;
}

namespace {

std::string hashtran_kind(const HashTranModel &m) {
    const char *base = std::holds_alternative<LshTransform>(m.transform)   ? "lsh"
                       : std::holds_alternative<LnhTransform>(m.transform) ? "lnh"
                                                                           : "dnn";
    return std::string(base) + (m.has_dae() ? "-dae" : "");
}

} // namespace

void save_defense(const std::string &path, const Defense &model, const std::string &kind) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (const auto *net = std::get_if<nn::Network>(&model)) {
        write_dnn(out, *net, kind);
    } else if (const auto *rfn = std::get_if<RfnModel>(&model)) {
        write_rfn(out, *rfn);
    } else {
        write_hashtran(out, std::get<HashTranModel>(model));
    }
    if (!out) throw std::runtime_error("error writing " + path);
}

Defense load_defense(const std::string &path, std::string *kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string first;
    std::getline(in, first);
    json head;
    try {
        head = json::parse(first);
    } catch (const json::parse_error &e) {
        throw FormatError(1, std::string("malformed checkpoint header: ") + e.what());
    }
    if (!head.is_object() || !head.contains("kind") || !head["kind"].is_string())
        throw FormatError(1, "checkpoint header has no kind");
    const std::string k = head["kind"].get<std::string>();
    in.clear();
    in.seekg(0);
    if (k == "rfn") {
        if (kind) *kind = "rfn";
        return read_rfn(in);
    }
    if (k == "hashtran") {
        auto m = read_hashtran(in);
        if (kind) *kind = hashtran_kind(m);
        return m;
    }
    auto net = read_dnn(in);
    if (kind) *kind = k;
    return net;
}

const std::vector<std::string> &model_kinds() {
    static const std::vector<std::string> kinds{"dnn",     "rfn", "adversarial", "surrogate", "lsh",
                                                "lnh",     "lsh-dae", "lnh-dae", "dnn-dae"};
    return kinds;
}

// --- data -------------------------------------------------------------------------

PreparedData prepare_data(const ExperimentConfig &cfg, std::uint64_t data_seed, std::uint64_t split_seed) {
    PreparedData d;
    if (!cfg.data_dir.empty()) {
        const std::filesystem::path dir(cfg.data_dir);
        d.split.train = load_dataset((dir / "train.jsonl").string());
        d.split.valid = load_dataset((dir / "valid.jsonl").string());
        d.split.test = load_dataset((dir / "test.jsonl").string());
        d.mask = load_mask((dir / "mask.jsonl").string());
        for (const Dataset *ds : {&d.split.train, &d.split.valid, &d.split.test})
            require_same_dim(ds->n, cfg.n, "data.dir dataset dimension vs data.n");
        require_same_dim(d.mask.n(), cfg.n, "data.dir mask dimension vs data.n");
        return d;
    }
    auto gc = default_generator_config(cfg.n, cfg.samples_per_class, data_seed);
    gc.mask_fraction = cfg.mask_fraction;
    auto gen = generate_synthetic_dataset(gc);
    d.split = split_dataset(gen.dataset, cfg.split, split_seed);
    d.mask = std::move(gen.mask);
    return d;
}

void save_prepared_data(const std::string &dir, const PreparedData &data) {
    const std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    save_dataset((p / "train.jsonl").string(), data.split.train);
    save_dataset((p / "valid.jsonl").string(), data.split.valid);
    save_dataset((p / "test.jsonl").string(), data.split.test);
    save_mask((p / "mask.jsonl").string(), data.mask);
}

std::string attack_key(const std::string &attack, std::size_t eps) {
    return attack_is_bounded(attack) ? attack + "@" + std::to_string(eps) : attack;
}

bool attack_is_bounded(const std::string &attack) noexcept { return attack != "mimicry"; }

// --- workbench ------------------------------------------------------------------

struct Workbench::State {
    std::optional<PreparedData> data;
    std::optional<nn::Network> surrogate;
    std::optional<std::vector<std::size_t>> sources;
    std::optional<std::vector<BitVector>> probes;
    std::optional<std::vector<BitVector>> benign_pool;
    struct CachedSet {
        AdversarialSet set;
        std::size_t eps = 0;
    };
    std::map<std::string, CachedSet> attacks;
    std::map<std::string, Defense> models;
};

Workbench::Workbench(ExperimentConfig cfg) : cfg_(std::move(cfg)), state_(std::make_unique<State>()) { validate(cfg_); }

Workbench::~Workbench() = default;

std::uint64_t Workbench::seed_for(const std::string &purpose) {
    const auto s = derive_seed(cfg_.seed, {fnv1a(purpose)});
    seeds_[purpose] = s;
    return s;
}

const PreparedData &Workbench::data() {
    if (!state_->data) {
        const auto ds = cfg_.data_dir.empty() ? seed_for("data") : 0;
        const auto ss = cfg_.data_dir.empty() ? seed_for("split") : 0;
        state_->data = prepare_data(cfg_, ds, ss);
    }
    return *state_->data;
}

const nn::Network &Workbench::surrogate() {
    if (!state_->surrogate) {
        const auto &d = data();
        auto tc = cfg_.train_config(seed_for("train/surrogate"));
        tc.dropout = cfg_.surrogate_dropout;
        state_->surrogate = train_surrogate(d.split.train, d.split.valid, cfg_.dnn, tc);
    }
    return *state_->surrogate;
}

const std::vector<std::size_t> &Workbench::attack_sources() {
    if (!state_->sources) {
        const auto &sur = surrogate();
        state_->sources = select_attack_seeds(sur, data().split.test, cfg_.attack_seeds, seed_for("attack-sources"));
    }
    return *state_->sources;
}

const AdversarialSet &Workbench::attack_set(const std::string &attack, std::size_t eps) {
    const std::string key = attack_key(attack, eps);
    if (auto it = state_->attacks.find(key); it != state_->attacks.end()) return it->second.set;
    if (attack != "jsma" && attack != "gdkde" && attack != "cw" && attack != "mimicry")
        throw std::invalid_argument("unknown attack '" + attack + "'");

    const auto &d = data();
    const auto &sur = surrogate();
    const auto &sources = attack_sources();
    if (!state_->benign_pool) state_->benign_pool = benign_of(d.split.train);
    const auto &pool = *state_->benign_pool;
    const std::uint64_t mimicry_seed = attack == "mimicry" ? seed_for("mimicry") : 0;

    std::vector<AttackResult> results(sources.size());
    parallel_for(sources.size(), [&](std::size_t j) {
        const std::size_t i = sources[j];
        const auto &x = d.split.test.samples[i].features;
        if (attack == "jsma") {
            results[j] = jsma_attack(sur, x, d.mask, eps, cfg_.jsma_confidence);
        } else if (attack == "gdkde") {
            results[j] = gdkde_attack(sur, x, pool, d.mask, eps, cfg_.gdkde);
        } else if (attack == "cw") {
            results[j] = cw_attack_binary(sur, x, d.mask, eps, cfg_.cw);
        } else {
            results[j] = mimicry_attack(sur, x, pool, d.mask, cfg_.mimicry_guides, derive_seed(mimicry_seed, {i}));
        }
    });

    AdversarialSet set;
    set.n = cfg_.n;
    set.name = key;
    for (std::size_t j = 0; j < sources.size(); ++j)
        set.samples.push_back({results[j].adversarial, sources[j], attack, results[j].flips, results[j].evaded});
    auto &slot = state_->attacks[key];
    slot.set = std::move(set);
    slot.eps = attack_is_bounded(attack) ? eps : static_cast<std::size_t>(-1);
    return slot.set;
}

std::string Workbench::model_key(const std::string &kind, GridCell &cell) const {
    const bool lsh = kind == "lsh" || kind == "lsh-dae";
    const bool lnh = kind == "lnh" || kind == "lnh-dae";
    if (cell.k == 0 && cell.l == 0) {
        if (lsh) cell = {cfg_.lsh_k, cfg_.lsh_l};
        if (lnh) cell = {cfg_.lnh_k, cfg_.lnh_l};
    }
    return (lsh || lnh) ? kind + "/" + cell_name(cell) : kind;
}

void Workbench::adopt_model(const std::string &kind, Defense m, GridCell cell) {
    state_->models.insert_or_assign(model_key(kind, cell), std::move(m));
}

const Defense &Workbench::model(const std::string &kind, GridCell cell) {
    const bool lsh = kind == "lsh" || kind == "lsh-dae";
    const bool lnh = kind == "lnh" || kind == "lnh-dae";
    const std::string key = model_key(kind, cell);
    if (auto it = state_->models.find(key); it != state_->models.end()) return it->second;

    const auto &d = data();
    const auto &train = d.split.train;
    const auto &valid = d.split.valid;
    const auto tc = cfg_.train_config(seed_for("train/" + key));
    Defense trained;
    if (kind == "dnn") {
        trained = train_standard_dnn(train, valid, cfg_.dnn, tc);
    } else if (kind == "surrogate") {
        trained = surrogate();
    } else if (kind == "rfn") {
        trained = train_rfn(train, valid, cfg_.dnn, tc, cfg_.rfn_mean, cfg_.rfn_stddev);
    } else if (kind == "adversarial") {
        trained = train_adversarial(train, valid, d.mask, cfg_.dnn, tc, cfg_.adversarial);
    } else if (kind == "dnn-dae") {
        auto m = train_dnn_dae(train, valid, cfg_.dnn, cfg_.lambda_dnn, cfg_.noise_eps, tc);
        calibrate_threshold(m, valid, cfg_.pass_rate);
        trained = std::move(m);
    } else if (lsh || lnh) {
        if (cell.k == 0 || cell.l == 0) throw std::invalid_argument("grid cell needs positive K and L");
        const bool dae = kind.ends_with("-dae");
        // LSH/LNH and their DAE variants share the transform of a cell
        const auto ts = seed_for(std::string("transform/") + (lsh ? "lsh/" : "lnh/") + cell_name(cell));
        HashingTransform t;
        if (lsh) {
            t = sample_lsh(cfg_.n, cell.k, cell.l, ts);
        } else {
            auto p = cfg_.lnh_params();
            p.k = cell.k;
            p.l = cell.l;
            t = build_lnh(train, p, ts);
        }
        const double lambda = dae ? (lsh ? cfg_.lambda_lsh : cfg_.lambda_lnh) : 0.0;
        auto init = make_hashtran(t, lsh ? cfg_.lsh_arch : cfg_.lnh_arch, lambda, cfg_.noise_eps,
                                  seed_for("init/" + key));
        auto m = train_hashtran(train, valid, std::move(init), tc);
        calibrate_threshold(m, valid, cfg_.pass_rate);
        trained = std::move(m);
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "'");
    }
    return state_->models.emplace(key, std::move(trained)).first->second;
}

const std::vector<BitVector> &Workbench::random_probes() {
    if (!state_->probes) {
        Rng rng = make_rng(seed_for("random-probes"));
        std::vector<BitVector> probes;
        for (std::size_t p = 0; p < cfg_.random_probes; ++p) {
            BitVector v(cfg_.n);
            for (std::size_t i = 0; i < cfg_.n; ++i)
                if (uniform01(rng) < 0.5) v.set(i);
            probes.push_back(std::move(v));
        }
        state_->probes = std::move(probes);
    }
    return *state_->probes;
}

MetricsReport Workbench::evaluate_clean(const std::string &kind, GridCell cell) {
    const auto &m = model(kind, cell);
    const auto &test = data().split.test;
    const auto xs = features_of(test);
    std::vector<int> labels;
    for (const auto &s : test.samples) labels.push_back(s.label);
    const auto preds = predict_all(m, xs, seed_for("queries/clean"));
    return compute_metrics(preds, labels, std::vector<bool>(xs.size(), false));
}

MetricsReport Workbench::evaluate_attack(const std::string &kind, const std::string &attack, std::size_t eps,
                                         GridCell cell) {
    const auto &m = model(kind, cell);
    const auto &set = attack_set(attack, eps);
    std::vector<BitVector> xs;
    for (const auto &s : set.samples) xs.push_back(s.features);
    const auto preds = predict_all(m, xs, seed_for("queries/" + set.name));
    return compute_metrics(preds, std::vector<int>(xs.size(), kMalware), std::vector<bool>(xs.size(), true));
}

std::optional<double> Workbench::random_rejection(const std::string &kind, GridCell cell) {
    const auto &m = model(kind, cell);
    const auto *ht = std::get_if<HashTranModel>(&m);
    if (!ht || !ht->has_dae()) return std::nullopt;
    const auto &probes = random_probes();
    if (probes.empty()) return std::nullopt;
    const auto preds = predict_all(m, probes, 0);
    const auto rejected = std::count(preds.begin(), preds.end(), Verdict::rejected);
    return static_cast<double>(rejected) / static_cast<double>(probes.size());
}

Workbench::Audit Workbench::audit_attacks() {
    Audit a;
    const auto &d = data();
    for (const auto &[key, cached] : state_->attacks) {
        for (const auto &s : cached.set.samples) {
            ++a.samples;
            AttackResult r;
            r.original = d.split.test.samples.at(s.source_index).features;
            r.adversarial = s.features;
            r.flips = s.flips;
            if (!satisfies_constraints(r, d.mask, cached.eps)) ++a.violations;
        }
    }
    return a;
}

// --- reports --------------------------------------------------------------------

namespace {

std::string csv_cell(const Cell &c) {
    if (const auto *s = std::get_if<std::string>(&c)) {
        if (s->find_first_of(",\"\n") == std::string::npos) return *s;
        std::string q = "\"";
        for (char ch : *s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    if (const auto *i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", std::get<double>(c));
    return buf;
}

json json_cell(const Cell &c) {
    if (const auto *s = std::get_if<std::string>(&c)) return *s;
    if (const auto *i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<double>(c);
}

} // namespace

Report make_report(const std::string &name, const ExperimentConfig &cfg,
                   const std::map<std::string, std::uint64_t> &seeds, const Table &table,
                   const std::map<std::string, Cell> &summary) {
    const auto flat = config_to_flat(cfg);
    Report r;
    r.name = name;

    std::ostringstream csv;
    csv << "# report = " << name << '\n';
    for (const auto &[k, v] : flat) csv << "# config " << k << " = " << v << '\n';
    for (const auto &[k, v] : seeds) csv << "# seed " << k << " = " << v << '\n';
    for (const auto &[k, v] : summary) csv << "# summary " << k << " = " << csv_cell(v) << '\n';
    for (std::size_t c = 0; c < table.columns.size(); ++c) csv << (c ? "," : "") << csv_cell(table.columns[c]);
    csv << '\n';
    for (const auto &row : table.rows) {
        require_same_dim(row.size(), table.columns.size(), "report row width");
        for (std::size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << csv_cell(row[c]);
        csv << '\n';
    }
    r.csv = csv.str();

    json j;
    j["report"] = name;
    j["config"] = json(flat);
    j["seeds"] = json(seeds);
    json sum = json::object();
    for (const auto &[k, v] : summary) sum[k] = json_cell(v);
    j["summary"] = sum;
    j["columns"] = table.columns;
    json rows = json::array();
    for (const auto &row : table.rows) {
        json jr = json::array();
        for (const auto &c : row) jr.push_back(json_cell(c));
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    r.json = j.dump(2) + "\n";
    return r;
}

void write_report(const std::string &dir, const Report &report) {
    std::filesystem::create_directories(dir);
    for (const auto &[ext, text] : {std::pair{".csv", &report.csv}, std::pair{".json", &report.json}}) {
        const auto path = (std::filesystem::path(dir) / (report.name + ext)).string();
        std::ofstream out(path, std::ios::binary);
        out << *text;
        if (!out) throw std::runtime_error("cannot write " + path);
    }
}

// --- experiments ----------------------------------------------------------------

const ResultRow &ExperimentResult::row(const std::string &model) const {
    for (const auto &r : rows)
        if (r.model == model) return r;
    throw std::out_of_range("no result row for " + model);
}

namespace {

using AttackCells = std::vector<std::pair<std::string, std::size_t>>;

ResultRow evaluate_row(Workbench &wb, const std::string &kind, GridCell cell, const AttackCells &attacks) {
    ResultRow row;
    row.model = kind;
    row.cell = cell;
    row.clean = wb.evaluate_clean(kind, cell);
    for (const auto &[a, eps] : attacks)
        row.attack_accuracy[attack_key(a, eps)] = wb.evaluate_attack(kind, a, eps, cell).accuracy;
    row.random_rejection = wb.random_rejection(kind, cell);
    return row;
}

Cell optional_cell(const std::optional<double> &v) { return v ? Cell{*v} : Cell{std::string()}; }

std::map<std::string, Cell> audit_summary(const Workbench::Audit &a) {
    return {{"adversarial_samples", static_cast<std::int64_t>(a.samples)},
            {"constraint_violations", static_cast<std::int64_t>(a.violations)}};
}

AttackCells grid_cells(const ExperimentConfig &cfg, bool include_mimicry) {
    AttackCells out;
    for (const auto &a : cfg.attacks) {
        if (!attack_is_bounded(a)) continue;
        for (auto eps : cfg.eps_grid()) out.emplace_back(a, eps);
    }
    if (include_mimicry)
        for (const auto &a : cfg.attacks)
            if (!attack_is_bounded(a)) out.emplace_back(a, 0);
    return out;
}

} // namespace

ExperimentResult run_rq1(Workbench &wb) {
    const auto &cfg = wb.config();
    AttackCells attacks;
    for (const auto &a : cfg.attacks) attacks.emplace_back(a, cfg.mid_eps());

    ExperimentResult res;
    for (const auto &cell : cfg.rq1_lsh_grid)
        for (const char *kind : {"lsh", "lsh-dae"}) res.rows.push_back(evaluate_row(wb, kind, cell, attacks));
    for (const auto &cell : cfg.rq1_lnh_grid)
        for (const char *kind : {"lnh", "lnh-dae"}) res.rows.push_back(evaluate_row(wb, kind, cell, attacks));

    Table t;
    t.columns = {"model", "K", "L", "clean_accuracy", "clean_fnr", "clean_fpr", "clean_rejected", "random_rejected"};
    for (const auto &[a, eps] : attacks) t.columns.push_back(attack_key(a, eps));
    for (const auto &r : res.rows) {
        std::vector<Cell> row{r.model,
                              static_cast<std::int64_t>(r.cell.k),
                              static_cast<std::int64_t>(r.cell.l),
                              r.clean.accuracy,
                              r.clean.fnr,
                              r.clean.fpr,
                              static_cast<std::int64_t>(r.clean.rejected),
                              optional_cell(r.random_rejection)};
        for (const auto &[a, eps] : attacks) row.emplace_back(r.attack_accuracy.at(attack_key(a, eps)));
        t.rows.push_back(std::move(row));
    }
    res.audit = wb.audit_attacks();
    res.report = make_report("rq1", cfg, wb.seeds_used(), t, audit_summary(res.audit));
    return res;
}

ExperimentResult run_rq2(Workbench &wb) {
    const auto &cfg = wb.config();
    const auto attacks = grid_cells(cfg, true);
    ExperimentResult res;
    for (const auto &kind : cfg.rq2_models) res.rows.push_back(evaluate_row(wb, kind, {}, attacks));

    Table t;
    t.columns = {"model", "no_attack"};
    for (const auto &[a, eps] : attacks) t.columns.push_back(attack_key(a, eps));
    for (const char *c : {"clean_fnr", "clean_fpr", "clean_rejected", "random_rejected"}) t.columns.emplace_back(c);
    for (const auto &r : res.rows) {
        std::vector<Cell> row{r.model, r.clean.accuracy};
        for (const auto &[a, eps] : attacks) row.emplace_back(r.attack_accuracy.at(attack_key(a, eps)));
        row.emplace_back(r.clean.fnr);
        row.emplace_back(r.clean.fpr);
        row.emplace_back(static_cast<std::int64_t>(r.clean.rejected));
        row.push_back(optional_cell(r.random_rejection));
        t.rows.push_back(std::move(row));
    }
    res.audit = wb.audit_attacks();
    res.report = make_report("rq2", cfg, wb.seeds_used(), t, audit_summary(res.audit));
    return res;
}

ExperimentResult run_rq3(Workbench &wb) {
    const auto &cfg = wb.config();
    const auto attacks = grid_cells(cfg, false);
    ExperimentResult res;
    for (const auto &kind : cfg.rq3_models) res.rows.push_back(evaluate_row(wb, kind, {}, attacks));

    Table t;
    t.columns = {"model", "attack", "eps", "accuracy"};
    for (const auto &r : res.rows) {
        for (const auto &a : cfg.attacks) {
            if (!attack_is_bounded(a)) continue;
            t.rows.push_back({r.model, a, std::int64_t{0}, r.clean.accuracy});
            for (auto eps : cfg.eps_grid())
                t.rows.push_back({r.model, a, static_cast<std::int64_t>(eps), r.attack_accuracy.at(attack_key(a, eps))});
        }
    }
    res.audit = wb.audit_attacks();
    res.report = make_report("rq3", cfg, wb.seeds_used(), t, audit_summary(res.audit));
    return res;
}

// --- theorem checks ---------------------------------------------------------------

bool TheoremReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const TheoremCheck &c) { return c.pass; });
}

TheoremReport verify_theorems(const ExperimentConfig &cfg) {
    validate(cfg);
    std::map<std::string, std::uint64_t> seeds;
    auto seed = [&](const std::string &purpose) {
        const auto s = derive_seed(cfg.seed, {fnv1a(purpose)});
        seeds[purpose] = s;
        return s;
    };
    TheoremReport rep;
    const double n = static_cast<double>(cfg.theorem_n);
    const double eps = static_cast<double>(cfg.theorem_eps);
    const double p1 = 1.0 - eps / n;

    {
        const auto t = sample_lsh(cfg.theorem_n, cfg.theorem_k, cfg.theorem_l, seed("theorem/lsh"));
        const auto e = estimate_collision(t, cfg.theorem_eps, cfg.theorem_trials, seed("theorem/lsh-trials"));
        const double p = std::pow(p1, static_cast<double>(cfg.theorem_k));
        rep.checks.push_back({"lsh_row_collision", "|value - bound| <= 0.02", e.row_frequency, p,
                              std::abs(e.row_frequency - p) <= 0.02});
        const double rows = static_cast<double>(cfg.theorem_l) * p;
        rep.checks.push_back({"lsh_matching_rows", "|value - bound| <= 1.5", e.mean_matching_rows, rows,
                              std::abs(e.mean_matching_rows - rows) <= 1.5});
    }
    {
        // K at the largest value the bound allows for theta = L/2 still keeps theta rows in expectation
        const double theta = static_cast<double>(cfg.theorem_l) / 2;
        const auto kb = matching_rows_k_bound(theta, static_cast<double>(cfg.theorem_l), p1);
        if (kb > 0) {
            const auto t = sample_lsh(cfg.theorem_n, kb, cfg.theorem_l, seed("theorem/witness"));
            const auto e = estimate_collision(t, cfg.theorem_eps, cfg.theorem_trials / 10 + 1,
                                              seed("theorem/witness-trials"));
            rep.checks.push_back({"lsh_k_bound_witness_K=" + std::to_string(kb), "value >= bound - 3 stderr",
                                  e.mean_matching_rows, theta, e.mean_matching_rows >= theta - 3 * e.matching_rows_stderr});
        }
    }

    auto gc = default_generator_config(cfg.theorem_n, 200, seed("theorem/data"));
    const auto data = generate_synthetic_dataset(gc).dataset;
    std::vector<BitVector> pool;
    for (const auto &s : data.samples) pool.push_back(s.features);
    {
        const auto t = build_lnh(data, {cfg.theorem_lnh_k, cfg.theorem_lnh_l, 0, cfg.lnh_d}, seed("theorem/lnh"));
        const auto e = estimate_collision(t, cfg.theorem_eps, cfg.theorem_lnh_trials, seed("theorem/lnh-trials"));
        const double bound = std::pow(p1, static_cast<double>(t.m));
        rep.checks.push_back({"lnh_tree_collision", "value >= bound - 3 stderr", e.unit_frequency, bound,
                              e.unit_frequency >= bound - 3 * e.unit_frequency_stderr});
    }
    // The doubling inequality holds in expectation over the hash draw, so each
    // K pools the paired difference over independent transforms and takes the
    // standard error across draws.
    for (auto k : cfg.theorem_doubling_k) {
        const std::string ks = std::to_string(k);
        std::vector<double> lsh_diff, lnh_diff;
        for (std::size_t r = 0; r < cfg.theorem_realizations; ++r) {
            const std::string tag = ks + "/" + std::to_string(r);
            const auto lsh = sample_lsh(cfg.theorem_n, 2 * k, cfg.theorem_doubling_l, seed("theorem/doubling-lsh/" + tag));
            lsh_diff.push_back(
                compare_distortion_doubling(lsh, cfg.theorem_pairs, seed("theorem/doubling-lsh-pairs/" + tag)).mean_difference);
            const auto lnh =
                build_lnh(data, {2 * k, cfg.theorem_doubling_l, 0, cfg.lnh_d}, seed("theorem/doubling-lnh/" + tag));
            lnh_diff.push_back(
                compare_distortion_doubling(lnh, cfg.theorem_pairs, seed("theorem/doubling-lnh-pairs/" + tag), pool)
                    .mean_difference);
        }
        for (const auto &[family, diffs] : {std::pair{"lsh", &lsh_diff}, std::pair{"lnh", &lnh_diff}}) {
            const auto [mean, se] = mean_and_stderr(*diffs);
            rep.checks.push_back(
                {std::string(family) + "_doubling_K=" + ks, "value <= 3 stderr", mean, 3 * se, mean <= 3 * se});
        }
    }

    Table t;
    t.columns = {"check", "rule", "value", "bound", "pass"};
    for (const auto &c : rep.checks) t.rows.push_back({c.name, c.rule, c.value, c.bound, std::string(c.pass ? "yes" : "no")});
    rep.report = make_report("theorems", cfg, seeds, t, {{"passed", std::string(rep.passed() ? "yes" : "no")}});
    return rep;
}

} // namespace hashtran
