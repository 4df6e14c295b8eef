#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hashtran/attacks.hpp"
#include "hashtran/baselines.hpp"
#include "hashtran/config.hpp"
#include "hashtran/model.hpp"

namespace hashtran {

// --- metrics --------------------------------------------------------------------

struct MetricsReport {
    std::size_t total = 0;
    // confusion counts over the samples that were not rejected
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t rejected = 0;
    std::size_t rejected_adversarial = 0;
    double accuracy = 0;  // (TP + TN + rejected adversarial) / total
    double fnr = 0;       // FN / (FN + TP), 0 when empty
    double fpr = 0;       // FP / (FP + TN), 0 when empty

    // Fraction of the set counted as wrong: FP, FN and rejected clean samples.
    [[nodiscard]] double error_rate() const noexcept;

    friend bool operator==(const MetricsReport &, const MetricsReport &) = default;
};

// A rejected adversarial sample counts as handled correctly; a rejected clean
// sample counts as an error. Throws DimensionError on length mismatch.
[[nodiscard]] MetricsReport compute_metrics(std::span<const Verdict> predictions, std::span<const int> labels,
                                            const std::vector<bool> &adversarial_flags);

// --- deployed models ------------------------------------------------------------

using Defense = std::variant<nn::Network, RfnModel, HashTranModel>;

// Plain networks never reject. RFN draws its nullification from `query_seed`.
[[nodiscard]] Verdict predict(const Defense &model, const BitVector &x, std::uint64_t query_seed);
// Query i uses derive_seed(seed, {i}); parallel over samples.
[[nodiscard]] std::vector<Verdict> predict_all(const Defense &model, std::span<const BitVector> xs,
                                               std::uint64_t seed);

// Checkpoint files carry their kind in the header record.
void save_defense(const std::string &path, const Defense &model, const std::string &kind);
[[nodiscard]] Defense load_defense(const std::string &path, std::string *kind = nullptr);

[[nodiscard]] const std::vector<std::string> &model_kinds();

// --- workbench ------------------------------------------------------------------

struct PreparedData {
    DatasetSplit split;
    PerturbationMask mask;
};

// Loads the data from config.data_dir (gen-data layout) or generates it.
[[nodiscard]] PreparedData prepare_data(const ExperimentConfig &cfg, std::uint64_t data_seed,
                                        std::uint64_t split_seed);
void save_prepared_data(const std::string &dir, const PreparedData &data);

// "jsma@10", or "mimicry" for the unbounded attack.
[[nodiscard]] std::string attack_key(const std::string &attack, std::size_t eps);
[[nodiscard]] bool attack_is_bounded(const std::string &attack) noexcept;

// Lazily builds and caches everything an experiment needs: data, surrogate,
// attack sets and trained models. Every seed comes from
// derive_seed(config.seed, {hash(purpose)}) and is recorded under its purpose.
class Workbench {
public:
    explicit Workbench(ExperimentConfig cfg);
    ~Workbench();
    Workbench(const Workbench &) = delete;
    Workbench &operator=(const Workbench &) = delete;

    [[nodiscard]] const ExperimentConfig &config() const noexcept { return cfg_; }
    [[nodiscard]] std::uint64_t seed_for(const std::string &purpose);
    [[nodiscard]] const std::map<std::string, std::uint64_t> &seeds_used() const noexcept { return seeds_; }

    const PreparedData &data();
    const nn::Network &surrogate();
    // Test indices of the attacked malware.
    const std::vector<std::size_t> &attack_sources();
    // Cached per (attack, eps); eps is ignored for mimicry.
    const AdversarialSet &attack_set(const std::string &attack, std::size_t eps);
    // A cell of {0, 0} selects the configured (K, L) of the model family.
    const Defense &model(const std::string &kind, GridCell cell = {});
    // Use an already trained model (e.g. a loaded checkpoint) for `kind` instead of training one.
    void adopt_model(const std::string &kind, Defense model, GridCell cell = {});
    const std::vector<BitVector> &random_probes();

    [[nodiscard]] MetricsReport evaluate_clean(const std::string &kind, GridCell cell = {});
    [[nodiscard]] MetricsReport evaluate_attack(const std::string &kind, const std::string &attack, std::size_t eps,
                                                GridCell cell = {});
    // Fraction of uniform random vectors rejected; empty for models without a DAE.
    [[nodiscard]] std::optional<double> random_rejection(const std::string &kind, GridCell cell = {});

    struct Audit {
        std::size_t samples = 0;
        std::size_t violations = 0;
    };
    // Insertion-only, mask membership and flip budget over every generated set.
    [[nodiscard]] Audit audit_attacks();

private:
    struct State;
    [[nodiscard]] std::string model_key(const std::string &kind, GridCell &cell) const;
    ExperimentConfig cfg_;
    std::map<std::string, std::uint64_t> seeds_;
    std::unique_ptr<State> state_;
};

// --- reports --------------------------------------------------------------------

using Cell = std::variant<std::string, std::int64_t, double>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Report {
    std::string name;
    std::string csv;   // '#' lines with the resolved config, seeds and summary, then the table
    std::string json;  // {"report", "config", "seeds", "summary", "columns", "rows"}
};

[[nodiscard]] Report make_report(const std::string &name, const ExperimentConfig &cfg,
                                 const std::map<std::string, std::uint64_t> &seeds, const Table &table,
                                 const std::map<std::string, Cell> &summary = {});
// Writes <dir>/<name>.csv and <dir>/<name>.json, creating dir if needed.
void write_report(const std::string &dir, const Report &report);

// --- experiments ----------------------------------------------------------------

struct ResultRow {
    std::string model;
    GridCell cell;
    MetricsReport clean;
    std::map<std::string, double> attack_accuracy;  // by attack_key
    std::optional<double> random_rejection;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    Workbench::Audit audit;
    Report report;

    [[nodiscard]] const ResultRow &row(const std::string &model) const;
};

// {LSH, LSH-DAE} over rq1.lsh_grid and {LNH, LNH-DAE} over rq1.lnh_grid; clean
// metrics and per-attack accuracy at the mid budget.
[[nodiscard]] ExperimentResult run_rq1(Workbench &wb);
// rq2.models across the eps grid plus mimicry, with a no-attack column.
[[nodiscard]] ExperimentResult run_rq2(Workbench &wb);
// rq3.models: long-form (model, attack, eps, accuracy); eps = 0 is clean accuracy.
[[nodiscard]] ExperimentResult run_rq3(Workbench &wb);

struct TheoremCheck {
    std::string name;
    std::string rule;  // how value and bound are compared
    double value = 0;
    double bound = 0;
    bool pass = false;
};

struct TheoremReport {
    std::vector<TheoremCheck> checks;
    Report report;
    [[nodiscard]] bool passed() const noexcept;
};

// Collision and distortion Monte Carlo checks with the tolerances of the
// hashing module's invariants.
[[nodiscard]] TheoremReport verify_theorems(const ExperimentConfig &cfg);

} // namespace hashtran
