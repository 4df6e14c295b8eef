#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hashtran/attacks.hpp"
#include "hashtran/baselines.hpp"
#include "hashtran/dataset.hpp"
#include "hashtran/hashing.hpp"
#include "hashtran/model.hpp"

namespace hashtran {

// `key = value` lines; '#' starts a comment, blank lines are skipped. Keys are
// kept sorted so anything emitted from a FlatConfig is stable.
using FlatConfig = std::map<std::string, std::string>;

// Throws FormatError on a line without '=' or with an empty key, and on a
// repeated key.
[[nodiscard]] FlatConfig parse_flat_config(std::istream &in);
[[nodiscard]] FlatConfig load_flat_config(const std::string &path);
void write_flat_config(std::ostream &out, const FlatConfig &cfg);

struct GridCell {
    std::size_t k = 0;
    std::size_t l = 0;
    friend bool operator==(const GridCell &, const GridCell &) = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;

    // data: generated from (n, samples_per_class, seed) unless data_dir names a gen-data output
    std::string data_dir;
    std::size_t n = 1024;
    std::size_t samples_per_class = 2000;
    double mask_fraction = 0.85;
    SplitRatios split{};

    // training, shared by every model
    std::size_t epochs = 30;
    std::size_t batch = 128;
    double dropout = 0.4;
    double learning_rate = 1e-3;
    DnnArch dnn{};
    double surrogate_dropout = 0.0;

    // hashing models
    std::size_t lsh_k = 64;
    std::size_t lsh_l = 64;
    HashTranArch lsh_arch{8, 64, {32}};
    std::size_t lnh_k = 16;
    std::size_t lnh_l = 32;
    std::size_t lnh_m = 32;
    std::size_t lnh_d = 4;
    HashTranArch lnh_arch{16, 64, {32}};
    double lambda_lsh = 32;
    double lambda_lnh = 1;
    double lambda_dnn = 1;
    double noise_eps = 8;
    double pass_rate = 0.999;

    // baselines
    double rfn_mean = 0.3;
    double rfn_stddev = 0.05;
    AdversarialTrainingConfig adversarial{10, 1.0, 0.1};

    // attacks
    std::vector<std::string> attacks{"jsma", "gdkde", "cw", "mimicry"};
    std::string eps_mode = "absolute";  // or "fraction"
    std::vector<std::size_t> eps_absolute{5, 10, 15};
    std::vector<double> eps_fraction{10.0 / 13596, 20.0 / 13596, 30.0 / 13596};
    std::size_t attack_seeds = 100;
    double jsma_confidence = 0.999;
    GdkdeParams gdkde{};
    CwParams cw{};
    std::size_t mimicry_guides = 60;

    // evaluation
    std::size_t random_probes = 1000;
    std::string model_kind = "lnh-dae";
    std::string checkpoint;
    std::vector<std::string> adversarial_files;
    std::vector<GridCell> rq1_lsh_grid{{64, 64}};
    std::vector<GridCell> rq1_lnh_grid{{16, 32}};
    std::vector<std::string> rq2_models{"dnn", "rfn", "adversarial", "lsh-dae", "lnh-dae"};
    std::vector<std::string> rq3_models{"dnn-dae", "lsh", "lnh", "lsh-dae", "lnh-dae"};

    // theorem checks
    std::size_t theorem_n = 1000;
    std::size_t theorem_eps = 10;
    std::size_t theorem_k = 32;
    std::size_t theorem_l = 64;
    std::size_t theorem_trials = 100000;
    std::size_t theorem_lnh_k = 8;
    std::size_t theorem_lnh_l = 8;
    std::size_t theorem_lnh_trials = 20000;
    std::vector<std::size_t> theorem_doubling_k{8, 16, 32};
    std::size_t theorem_doubling_l = 8;
    std::size_t theorem_pairs = 1000;        // per realization
    std::size_t theorem_realizations = 16;  // independent transforms per doubling check

    [[nodiscard]] TrainConfig train_config(std::uint64_t seed) const;
    [[nodiscard]] LnhParams lnh_params() const;
    // Flip budgets after applying eps_mode; fractions round to the nearest count, at least 1.
    [[nodiscard]] std::vector<std::size_t> eps_grid() const;
    // Middle element of eps_grid().
    [[nodiscard]] std::size_t mid_eps() const;
};

struct ConfigKey {
    std::string key;
    std::string help;
};

// Every recognized key with a one-line description, in documentation order.
[[nodiscard]] const std::vector<ConfigKey> &config_keys();

// Unknown keys and unparsable values throw std::invalid_argument naming the key.
[[nodiscard]] ExperimentConfig config_from_flat(const FlatConfig &flat);
// Every key with its resolved value.
[[nodiscard]] FlatConfig config_to_flat(const ExperimentConfig &cfg);
// Throws std::invalid_argument when fields are out of range.
void validate(const ExperimentConfig &cfg);

} // namespace hashtran
