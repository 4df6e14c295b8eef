#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtran/errors.hpp"
#include "hashtran/eval.hpp"

using namespace hashtran;

namespace {

constexpr Verdict B = Verdict::benign;
constexpr Verdict M = Verdict::malware;
constexpr Verdict R = Verdict::rejected;

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.seed = 3;
    c.n = 96;
    c.samples_per_class = 120;
    c.epochs = 6;
    c.batch = 32;
    c.dnn.hidden = {16, 8};
    c.lsh_k = 8;
    c.lsh_l = 6;
    c.lsh_arch = {3, 8, {4}};
    c.lnh_k = 3;
    c.lnh_l = 6;
    c.lnh_m = 0;
    c.lnh_arch = {3, 8, {4}};
    c.eps_absolute = {2, 4};
    c.attack_seeds = 6;
    c.cw.steps = 20;
    c.mimicry_guides = 5;
    c.adversarial.eps = 2;
    c.random_probes = 40;
    c.rq1_lsh_grid = {{8, 6}};
    c.rq1_lnh_grid = {{3, 6}};
    return c;
}

std::string temp_dir(const std::string &name) {
    const auto p = std::filesystem::temp_directory_path() / ("hashtran_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

} // namespace

TEST_CASE("compute_metrics: simple fixtures") {
    SUBCASE("90 of 100 correct, no rejections") {
        std::vector<Verdict> p(100, M);
        std::vector<int> y(100, kMalware);
        for (int i = 0; i < 10; ++i) p[static_cast<std::size_t>(i)] = B;
        const auto m = compute_metrics(p, y, std::vector<bool>(100, false));
        CHECK(m.accuracy == doctest::Approx(0.90));
        CHECK(m.fnr == doctest::Approx(0.10));
        CHECK(m.fpr == 0.0);
    }
    SUBCASE("every adversarial input rejected") {
        std::vector<Verdict> p(7, R);
        const auto m = compute_metrics(p, std::vector<int>(7, kMalware), std::vector<bool>(7, true));
        CHECK(m.accuracy == 1.0);
        CHECK(m.rejected == 7);
        CHECK(m.error_rate() == 0.0);
    }
    SUBCASE("hand-counted 10-sample fixture") {
        //             0  1  2  3  4  5  6  7  8  9
        std::vector<Verdict> p{M, M, B, R, B, B, M, R, R, M};
        std::vector<int> y{1, 1, 1, 1, 0, 0, 0, 0, 1, 1};
        std::vector<bool> adv{false, false, false, false, false, false, false, false, true, true};
        const auto m = compute_metrics(p, y, adv);
        // TP: 0,1,9  FN: 2  TN: 4,5  FP: 6  rejected: 3 (clean), 7 (clean), 8 (adversarial)
        CHECK(m.tp == 3);
        CHECK(m.fn == 1);
        CHECK(m.tn == 2);
        CHECK(m.fp == 1);
        CHECK(m.rejected == 3);
        CHECK(m.rejected_adversarial == 1);
        CHECK(m.accuracy == doctest::Approx(6.0 / 10));
        CHECK(m.error_rate() == doctest::Approx(4.0 / 10));
        CHECK(m.fnr == doctest::Approx(1.0 / 4));
        CHECK(m.fpr == doctest::Approx(1.0 / 3));
    }
    CHECK_THROWS_AS((void)compute_metrics(std::vector<Verdict>{B}, std::vector<int>{}, {}), DimensionError);
    CHECK_THROWS_AS((void)compute_metrics(std::vector<Verdict>{B}, std::vector<int>{0}, {}), DimensionError);
    CHECK_THROWS_AS((void)compute_metrics(std::vector<Verdict>{B}, std::vector<int>{3}, {false}), std::invalid_argument);
    CHECK(compute_metrics({}, {}, {}).accuracy == 0.0);
}

TEST_CASE("compute_metrics: accuracy and errors partition the set") {
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 40);
        std::vector<Verdict> p;
        std::vector<int> y;
        std::vector<bool> adv;
        for (std::size_t i = 0; i < n; ++i) {
            p.push_back(static_cast<Verdict>(uniform_below(rng, 3)));
            y.push_back(static_cast<int>(uniform_below(rng, 2)));
            adv.push_back(y.back() == kMalware && uniform_below(rng, 2) == 1);
        }
        const auto m = compute_metrics(p, y, adv);
        CHECK(m.tp + m.tn + m.fp + m.fn + m.rejected == n);
        CHECK(m.accuracy + m.error_rate() == doctest::Approx(1.0).epsilon(1e-12));
        // the same counts by brute force
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i)
            correct += (p[i] == R && adv[i]) || (p[i] == M && y[i] == 1) || (p[i] == B && y[i] == 0) ? 1 : 0;
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(correct) / static_cast<double>(n)));
    }
}

TEST_CASE("flat config parsing") {
    std::istringstream in("# comment\n\nseed = 9   # trailing\n  data.n=128\nattack.eps = 1, 2 ,3\n");
    const auto flat = parse_flat_config(in);
    CHECK(flat.size() == 3);
    CHECK(flat.at("seed") == "9");
    CHECK(flat.at("data.n") == "128");
    const auto cfg = config_from_flat(flat);
    CHECK(cfg.seed == 9);
    CHECK(cfg.n == 128);
    CHECK(cfg.eps_absolute == std::vector<std::size_t>{1, 2, 3});

    std::istringstream bad("seed = 1\n\nno equals sign\n");
    try {
        (void)parse_flat_config(bad);
        FAIL("expected FormatError");
    } catch (const FormatError &e) {
        CHECK(e.line() == 3);
    }
    std::istringstream dup("seed = 1\nseed = 2\n");
    CHECK_THROWS_AS((void)parse_flat_config(dup), FormatError);
    std::istringstream empty_key(" = 4\n");
    CHECK_THROWS_AS((void)parse_flat_config(empty_key), FormatError);

    CHECK_THROWS_AS((void)config_from_flat({{"no.such.key", "1"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"data.n", "ten"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"data.n", "-3"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"split.train", "0.9"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"attack.list", "jsma,fgsm"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"attack.eps_mode", "relative"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)config_from_flat({{"rq1.lsh_grid", "8by6"}}), std::invalid_argument);
}

TEST_CASE("config round trip and the shipped defaults") {
    const ExperimentConfig defaults;
    CHECK(config_to_flat(config_from_flat(config_to_flat(defaults))) == config_to_flat(defaults));

    auto modified = tiny_config();
    modified.eps_mode = "fraction";
    modified.eps_fraction = {0.1, 1.0 / 3};
    modified.attacks = {"cw"};
    const auto flat = config_to_flat(modified);
    CHECK(config_to_flat(config_from_flat(flat)) == flat);
    CHECK(config_from_flat(flat).eps_fraction[1] == 1.0 / 3);  // doubles survive exactly

    // every key is documented and the shipped file holds the defaults
    CHECK(config_keys().size() == flat.size());
    const auto shipped = load_flat_config(HASHTRAN_SOURCE_DIR "/configs/default.conf");
    CHECK(config_to_flat(config_from_flat(shipped)) == config_to_flat(defaults));
    CHECK(shipped.size() == config_keys().size());
    CHECK_NOTHROW((void)config_from_flat(load_flat_config(HASHTRAN_SOURCE_DIR "/configs/smoke.conf")));
}

TEST_CASE("eps grid in both modes") {
    ExperimentConfig c;
    CHECK(c.eps_grid() == std::vector<std::size_t>{5, 10, 15});
    CHECK(c.mid_eps() == 10);
    c.eps_mode = "fraction";
    c.n = 13596;
    CHECK(c.eps_grid() == std::vector<std::size_t>{10, 20, 30});
    c.n = 1024;
    CHECK(c.eps_grid() == std::vector<std::size_t>{1, 2, 2});  // 0.75, 1.51, 2.26 rounded, at least 1
    c.eps_fraction = {0.01};
    CHECK(c.eps_grid() == std::vector<std::size_t>{10});
    CHECK(c.mid_eps() == 10);
}

TEST_CASE("make_report embeds config, seeds and summary") {
    Table t;
    t.columns = {"name", "count", "value"};
    t.rows.push_back({std::string("a,b"), std::int64_t{3}, 0.25});
    t.rows.push_back({std::string("say \"hi\""), std::int64_t{-1}, 1.0 / 3});
    const auto cfg = tiny_config();
    const auto r = make_report("demo", cfg, {{"x", 42}}, t, {{"total", std::int64_t{2}}});
    CHECK(r.csv.find("# config data.n = 96\n") != std::string::npos);
    CHECK(r.csv.find("# seed x = 42\n") != std::string::npos);
    CHECK(r.csv.find("# summary total = 2\n") != std::string::npos);
    CHECK(r.csv.find("name,count,value\n\"a,b\",3,0.25\n\"say \"\"hi\"\"\",-1,0.333333\n") != std::string::npos);

    const auto j = nlohmann::json::parse(r.json);
    CHECK(j["report"] == "demo");
    CHECK(j["config"].size() == config_keys().size());
    CHECK(j["seeds"]["x"] == 42);
    CHECK(j["rows"][1][2].get<double>() == 1.0 / 3);
    CHECK(r.json == make_report("demo", cfg, {{"x", 42}}, t, {{"total", std::int64_t{2}}}).json);

    Table ragged;
    ragged.columns = {"a", "b"};
    ragged.rows.push_back({std::int64_t{1}});
    CHECK_THROWS_AS((void)make_report("bad", cfg, {}, ragged), DimensionError);
}

TEST_CASE("defense checkpoints and predictions") {
    const auto dir = temp_dir("defense");
    Workbench wb(tiny_config());
    const auto &test = wb.data().split.test;
    std::vector<BitVector> xs;
    for (const auto &s : test.samples) xs.push_back(s.features);

    for (const std::string kind : {"dnn", "rfn", "lsh-dae", "lnh", "dnn-dae"}) {
        CAPTURE(kind);
        const auto &m = wb.model(kind);
        const auto path = dir + "/" + kind + ".ckpt";
        save_defense(path, m, kind);
        std::string loaded_kind;
        const auto back = load_defense(path, &loaded_kind);
        CHECK(back == m);
        CHECK(loaded_kind == kind);

        // the parallel batch equals a serial loop over the same query seeds
        const auto batch = predict_all(m, xs, 17);
        for (std::size_t i = 0; i < xs.size(); ++i) CHECK(batch[i] == predict(m, xs[i], derive_seed(17, {i})));
    }
    CHECK(std::holds_alternative<nn::Network>(wb.model("surrogate")));
    CHECK_THROWS_AS((void)wb.model("forest"), std::invalid_argument);

    std::ofstream(dir + "/junk.ckpt") << "not json\n";
    CHECK_THROWS_AS((void)load_defense(dir + "/junk.ckpt"), FormatError);
    CHECK_THROWS((void)load_defense(dir + "/missing.ckpt"));
}

TEST_CASE("clean evaluation matches a hand-counted confusion matrix") {
    Workbench wb(tiny_config());
    const auto &m = std::get<HashTranModel>(wb.model("dnn-dae"));
    const auto &test = wb.data().split.test;
    const auto report = wb.evaluate_clean("dnn-dae");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0, rej = 0;
    for (const auto &s : test.samples) {
        const auto v = predict_with_rejection(m, s.features);
        if (v == Verdict::rejected) ++rej;
        else if (v == Verdict::malware) (s.label == 1 ? tp : fp)++;
        else (s.label == 1 ? fn : tn)++;
    }
    CHECK(report.tp == tp);
    CHECK(report.tn == tn);
    CHECK(report.fp == fp);
    CHECK(report.fn == fn);
    CHECK(report.rejected == rej);
    CHECK(report.accuracy == doctest::Approx(static_cast<double>(tp + tn) / static_cast<double>(test.size())));
}

TEST_CASE("prepared data survives a save and reload through data.dir") {
    const auto dir = temp_dir("data");
    auto cfg = tiny_config();
    Workbench wb(cfg);
    save_prepared_data(dir, wb.data());
    cfg.data_dir = dir;
    Workbench again(cfg);
    CHECK(again.data().split.train == wb.data().split.train);
    CHECK(again.data().split.test == wb.data().split.test);
    CHECK(again.data().mask == wb.data().mask);
    cfg.n = 95;
    CHECK_THROWS_AS((void)prepare_data(cfg, 0, 0), DimensionError);
}

TEST_CASE("experiment runners: shapes, identities and byte-identical reruns") {
    auto cfg = tiny_config();
    Workbench wb(cfg);
    const auto rq2 = run_rq2(wb);
    const auto rq3 = run_rq3(wb);
    const auto rq1 = run_rq1(wb);

    // rq2: a no-attack column and every budgeted attack for each defense
    CHECK(rq2.rows.size() == cfg.rq2_models.size());
    CHECK(rq2.report.csv.find("model,no_attack,jsma@2,jsma@4,gdkde@2,gdkde@4,cw@2,cw@4,mimicry,") != std::string::npos);
    for (const auto &r : rq2.rows) CHECK(r.attack_accuracy.size() == 7);
    CHECK(rq2.audit.samples == 7 * wb.attack_sources().size());
    CHECK(rq2.audit.violations == 0);

    // rq3: eps = 0 equals clean accuracy
    const auto j3 = nlohmann::json::parse(rq3.report.json);
    CHECK(j3["rows"].size() == cfg.rq3_models.size() * 3 * 3);
    for (const auto &row : j3["rows"]) {
        if (row[2].get<int>() != 0) continue;
        CHECK(row[3].get<double>() == rq3.row(row[0].get<std::string>()).clean.accuracy);
    }

    // rq1: one cell per family gives a plain row and a DAE row each
    CHECK(rq1.rows.size() == 4);
    CHECK(rq1.row("lnh-dae").random_rejection.has_value());
    CHECK_FALSE(rq1.row("lnh").random_rejection.has_value());
    CHECK_THROWS_AS((void)rq1.row("nope"), std::out_of_range);

    // rerun from scratch
    Workbench again(cfg);
    CHECK(run_rq2(again).report.csv == rq2.report.csv);
    // reports embed every seed the workbench has drawn, so compare like with like
    Workbench third(cfg), fourth(cfg);
    CHECK(run_rq3(third).report.json == run_rq3(fourth).report.json);

    // a different seed changes the result
    cfg.seed = 4;
    Workbench other(cfg);
    CHECK(run_rq2(other).report.csv != rq2.report.csv);

    const auto dir = temp_dir("reports");
    write_report(dir, rq2.report);
    std::ifstream in(dir + "/rq2.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == rq2.report.csv);
}

TEST_CASE("verify_theorems on a reduced budget") {
    ExperimentConfig cfg;
    cfg.theorem_trials = 20000;
    cfg.theorem_lnh_trials = 2000;
    cfg.theorem_pairs = 500;
    cfg.theorem_realizations = 8;
    const auto rep = verify_theorems(cfg);
    CHECK(rep.checks.size() == 4 + 2 * cfg.theorem_doubling_k.size());
    for (const auto &c : rep.checks) {
        CAPTURE(c.name);
        CHECK(c.pass);
    }
    CHECK(rep.passed());
    CHECK(rep.report.json == verify_theorems(cfg).report.json);
}
