// hashtran: command-line front end for the experiment workbench.
//
// Every subcommand takes --config <file> (flat key = value), --seed and --out,
// plus repeated --set key=value overrides. Exit status: 0 success, 2 failed
// property check, 1 usage or IO error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hashtran/eval.hpp"

using namespace hashtran;

namespace {

constexpr int kPropertyFailure = 2;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> overrides;
};

ExperimentConfig resolve_config(const CommonOptions &o) {
    FlatConfig flat;
    if (!o.config_path.empty()) flat = load_flat_config(o.config_path);
    for (const auto &kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        flat[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
    }
    if (o.seed) flat["seed"] = std::to_string(*o.seed);
    return config_from_flat(flat);
}

std::string file_key(std::string key) {
    std::replace(key.begin(), key.end(), '@', '-');
    return key;
}

std::map<std::string, Cell> metrics_summary(const std::string &prefix, const MetricsReport &m) {
    return {{prefix + "accuracy", m.accuracy},
            {prefix + "fnr", m.fnr},
            {prefix + "fpr", m.fpr},
            {prefix + "rejected", static_cast<std::int64_t>(m.rejected)}};
}

std::vector<Cell> metrics_row(const std::string &name, const MetricsReport &m) {
    return {name,
            static_cast<std::int64_t>(m.total),
            m.accuracy,
            m.fnr,
            m.fpr,
            static_cast<std::int64_t>(m.tp),
            static_cast<std::int64_t>(m.tn),
            static_cast<std::int64_t>(m.fp),
            static_cast<std::int64_t>(m.fn),
            static_cast<std::int64_t>(m.rejected)};
}

const std::vector<std::string> kMetricColumns{"set", "samples", "accuracy", "fnr", "fpr", "tp", "tn", "fp", "fn", "rejected"};

int cmd_gen_data(const CommonOptions &o) {
    Workbench wb(resolve_config(o));
    const auto &d = wb.data();
    save_prepared_data(o.out, d);
    Table t;
    t.columns = {"split", "samples", "benign", "malware"};
    for (const auto &[name, ds] : {std::pair{"train", &d.split.train}, std::pair{"valid", &d.split.valid},
                                   std::pair{"test", &d.split.test}})
        t.rows.push_back({std::string(name), static_cast<std::int64_t>(ds->size()),
                          static_cast<std::int64_t>(ds->count_label(kBenign)),
                          static_cast<std::int64_t>(ds->count_label(kMalware))});
    write_report(o.out, make_report("gen-data", wb.config(), wb.seeds_used(), t,
                                    {{"insertable_features", static_cast<std::int64_t>(d.mask.insertable.count())}}));
    return 0;
}

int cmd_train(const CommonOptions &o) {
    Workbench wb(resolve_config(o));
    const auto &kind = wb.config().model_kind;
    const auto &m = wb.model(kind);
    std::filesystem::create_directories(o.out);
    save_defense((std::filesystem::path(o.out) / (kind + ".ckpt")).string(), m, kind);

    const auto clean = wb.evaluate_clean(kind);
    auto summary = metrics_summary("test_", clean);
    if (const auto *ht = std::get_if<HashTranModel>(&m)) {
        summary["threshold"] = ht->threshold ? *ht->threshold : 0.0;
        if (auto r = wb.random_rejection(kind)) summary["random_rejected"] = *r;
    }
    Table t;
    t.columns = kMetricColumns;
    t.rows.push_back(metrics_row("test", clean));
    write_report(o.out, make_report("train-" + kind, wb.config(), wb.seeds_used(), t, summary));
    return 0;
}

int cmd_calibrate(const CommonOptions &o) {
    Workbench wb(resolve_config(o));
    const auto &cfg = wb.config();
    if (cfg.checkpoint.empty()) throw std::invalid_argument("calibrate needs eval.checkpoint");
    std::string kind;
    Defense loaded = load_defense(cfg.checkpoint, &kind);
    auto *ht = std::get_if<HashTranModel>(&loaded);
    if (!ht) throw std::invalid_argument("calibrate needs a hashed or DAE checkpoint, got " + kind);
    const double tr = calibrate_threshold(*ht, wb.data().split.valid, cfg.pass_rate);
    std::filesystem::create_directories(o.out);
    save_defense((std::filesystem::path(o.out) / (kind + "-calibrated.ckpt")).string(), loaded, kind);

    wb.adopt_model(kind, loaded);
    const auto clean = wb.evaluate_clean(kind);
    Table t;
    t.columns = kMetricColumns;
    t.rows.push_back(metrics_row("test", clean));
    write_report(o.out, make_report("calibrate", cfg, wb.seeds_used(), t,
                                    {{"threshold", std::isfinite(tr) ? Cell{tr} : Cell{std::string("inf")}},
                                     {"pass_rate", cfg.pass_rate}}));
    return 0;
}

int cmd_attack(const CommonOptions &o) {
    Workbench wb(resolve_config(o));
    const auto &cfg = wb.config();
    std::filesystem::create_directories(o.out);
    Table t;
    t.columns = {"attack", "eps", "samples", "evaded", "mean_flips"};
    for (const auto &a : cfg.attacks) {
        const auto budgets = attack_is_bounded(a) ? cfg.eps_grid() : std::vector<std::size_t>{0};
        for (auto eps : budgets) {
            const auto &set = wb.attack_set(a, eps);
            std::ofstream out(std::filesystem::path(o.out) / ("adv-" + file_key(set.name) + ".jsonl"), std::ios::binary);
            write_adversarial_set(out, set);
            if (!out) throw std::runtime_error("cannot write adversarial set " + set.name);
            std::size_t evaded = 0, flips = 0;
            for (const auto &s : set.samples) {
                evaded += s.evaded ? 1 : 0;
                flips += s.flips;
            }
            const double n = static_cast<double>(std::max<std::size_t>(1, set.samples.size()));
            t.rows.push_back({a, static_cast<std::int64_t>(eps), static_cast<std::int64_t>(set.samples.size()),
                              static_cast<std::int64_t>(evaded), static_cast<double>(flips) / n});
        }
    }
    const auto audit = wb.audit_attacks();
    write_report(o.out, make_report("attack", cfg, wb.seeds_used(), t,
                                    {{"adversarial_samples", static_cast<std::int64_t>(audit.samples)},
                                     {"constraint_violations", static_cast<std::int64_t>(audit.violations)}}));
    if (audit.violations > 0) {
        std::cerr << "attack: " << audit.violations << " adversarial samples break their constraints\n";
        return kPropertyFailure;
    }
    return 0;
}

int cmd_evaluate(const CommonOptions &o) {
    Workbench wb(resolve_config(o));
    const auto &cfg = wb.config();
    std::string kind = cfg.model_kind;
    if (!cfg.checkpoint.empty()) {
        auto loaded = load_defense(cfg.checkpoint, &kind);
        wb.adopt_model(kind, std::move(loaded));
    }

    Table t;
    t.columns = kMetricColumns;
    t.rows.push_back(metrics_row("clean", wb.evaluate_clean(kind)));
    if (!cfg.adversarial_files.empty()) {
        const auto &m = wb.model(kind);
        for (const auto &path : cfg.adversarial_files) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + path);
            const auto set = read_adversarial_set(in);
            std::vector<BitVector> xs;
            for (const auto &s : set.samples) xs.push_back(s.features);
            const auto preds = predict_all(m, xs, wb.seed_for("queries/" + set.name));
            t.rows.push_back(metrics_row(set.name, compute_metrics(preds, std::vector<int>(xs.size(), kMalware),
                                                                   std::vector<bool>(xs.size(), true))));
        }
    } else {
        for (const auto &a : cfg.attacks) {
            const auto budgets = attack_is_bounded(a) ? cfg.eps_grid() : std::vector<std::size_t>{0};
            for (auto eps : budgets) t.rows.push_back(metrics_row(attack_key(a, eps), wb.evaluate_attack(kind, a, eps)));
        }
    }
    std::map<std::string, Cell> summary{{"model", kind}};
    if (auto r = wb.random_rejection(kind)) summary["random_rejected"] = *r;
    write_report(o.out, make_report("evaluate", cfg, wb.seeds_used(), t, summary));
    return 0;
}

int cmd_rq(const CommonOptions &o, int which) {
    Workbench wb(resolve_config(o));
    const auto res = which == 1 ? run_rq1(wb) : which == 2 ? run_rq2(wb) : run_rq3(wb);
    write_report(o.out, res.report);
    if (res.audit.violations > 0) {
        std::cerr << "rq" << which << ": " << res.audit.violations << " adversarial samples break their constraints\n";
        return kPropertyFailure;
    }
    return 0;
}

int cmd_verify(const CommonOptions &o) {
    const auto rep = verify_theorems(resolve_config(o));
    write_report(o.out, rep.report);
    for (const auto &c : rep.checks)
        std::cout << (c.pass ? "pass " : "FAIL ") << c.name << ": " << c.value << " (" << c.rule << ", bound "
                  << c.bound << ")\n";
    return rep.passed() ? 0 : kPropertyFailure;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"hashtran: hashing-transformation defense workbench"};
    app.require_subcommand(1);

    CommonOptions opts;
    struct Command {
        const char *name;
        const char *help;
    };
    const std::vector<Command> commands{
        {"gen-data", "generate the dataset, split and insertable mask"},
        {"train", "train model.kind and write its checkpoint"},
        {"calibrate", "recalibrate t_r of eval.checkpoint on the validation split"},
        {"attack", "craft adversarial sets against the surrogate"},
        {"evaluate", "score a model on clean and adversarial data"},
        {"rq1", "hashing variants over the (K, L) grid"},
        {"rq2", "defenses across the budget grid and mimicry"},
        {"rq3", "accuracy versus budget curves"},
        {"verify-theorems", "collision and distortion Monte Carlo checks"},
    };
    for (const auto &c : commands) {
        auto *sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", opts.config_path, "flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "master seed (overrides the config)");
        sub->add_option("--out", opts.out, "output directory")->capture_default_str();
        sub->add_option("--set", opts.overrides, "override a config key: key=value (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 1;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "gen-data") return cmd_gen_data(opts);
        if (name == "train") return cmd_train(opts);
        if (name == "calibrate") return cmd_calibrate(opts);
        if (name == "attack") return cmd_attack(opts);
        if (name == "evaluate") return cmd_evaluate(opts);
        if (name == "verify-theorems") return cmd_verify(opts);
        return cmd_rq(opts, name == "rq1" ? 1 : name == "rq2" ? 2 : 3);
    } catch (const std::exception &e) {
        std::cerr << name << ": " << e.what() << '\n';
        return 1;
    }
}
