#include "hashtran/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hashtran/attacks.hpp"
#include "hashtran/errors.hpp"
#include "layer_io.hpp"

namespace hashtran {

using nn::Matrix;

nn::Network make_dnn(std::size_t n, const DnnArch &arch, std::uint64_t seed) {
    std::vector<std::size_t> widths{n};
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(2);
    return nn::make_network(widths, seed);
}

std::vector<double> rfn_nullify(const BitVector &x, double mean, double stddev, std::uint64_t seed) {
    if (stddev < 0) throw std::invalid_argument("rfn_nullify: stddev must be non-negative");
    Rng rng = make_rng(seed, {0x4f11});
    double p = mean;
    if (stddev > 0) p = std::normal_distribution<double>(mean, stddev)(rng);
    p = std::clamp(p, 0.0, 1.0);
    std::vector<double> out = x.to_dense();
    const auto count = static_cast<std::size_t>(std::ceil(static_cast<double>(x.size()) * p - 1e-12));
    for (auto i : sample_distinct(rng, x.size(), std::min(count, x.size()))) out[i] = 0.0;
    return out;
}

namespace {

struct Item {
    const BitVector *x;
    int label;
    double weight;
};

// Clean validation accuracy and mean cross-entropy.
std::pair<double, double> validation_score(const nn::Network &net, const Dataset &valid, const FitOptions &opt,
                                           std::uint64_t seed) {
    std::size_t correct = 0;
    double loss = 0;
    constexpr std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < valid.samples.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, valid.samples.size() - begin);
        Matrix x(count, valid.n);
        for (std::size_t k = 0; k < count; ++k) {
            const auto &s = valid.samples[begin + k];
            if (opt.nullify) {
                const auto v = rfn_nullify(s.features, opt.nullify->first, opt.nullify->second,
                                           derive_seed(seed, {0x7a1, begin + k}));
                std::copy(v.begin(), v.end(), x.row(k).begin());
            } else {
                s.features.to_dense(x.row(k));
            }
        }
        Matrix p = nn::forward_batch(net, x);
        nn::softmax_rows(p);
        for (std::size_t k = 0; k < count; ++k) {
            const int y = valid.samples[begin + k].label;
            correct += (p(k, 1) > p(k, 0) ? 1 : 0) == y ? 1 : 0;
            loss -= std::log(std::max(p(k, static_cast<std::size_t>(y)), nn::kLogClamp));
        }
    }
    const auto total = static_cast<double>(valid.samples.size());
    return {static_cast<double>(correct) / total, loss / total};
}

} // namespace

nn::Network fit_network(nn::Network net, const Dataset &train, const Dataset &valid, const TrainConfig &cfg,
                        const FitOptions &opt, TrainHistory *history) {
    if (train.samples.empty() || valid.samples.empty()) throw std::invalid_argument("fit_network: empty data");
    if (cfg.batch == 0) throw std::invalid_argument("fit_network: batch size must be positive");
    require_same_dim(train.n, net.input_dim(), "fit_network input");
    require_same_dim(net.output_dim(), 2, "fit_network output");

    auto params = nn::parameters(net);
    nn::AdamState adam = nn::make_adam(cfg.adam, params);
    nn::Gradients grads = nn::zero_gradients(net);
    TrainHistory hist;
    nn::Network best = net;
    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<LabeledSample> extra;
        if (opt.augment && opt.augment_weight > 0) extra = opt.augment(net, epoch);
        std::vector<Item> items;
        items.reserve(train.samples.size() + extra.size());
        for (const auto &s : train.samples) items.push_back({&s.features, s.label, 1.0});
        for (const auto &s : extra) {
            require_same_dim(s.features.size(), train.n, "augmented sample");
            items.push_back({&s.features, s.label, opt.augment_weight});
        }
        std::vector<std::size_t> order(items.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        // first the clean block, shuffled exactly as without augmentation, then the rest mixed in
        {
            std::vector<std::size_t> clean(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train.samples.size()));
            Rng rng = make_rng(cfg.seed, {0xe90c, epoch});
            shuffle_in_place(clean, rng);
            if (extra.empty()) {
                order = std::move(clean);
            } else {
                Rng mix = make_rng(cfg.seed, {0xe90d, epoch});
                shuffle_in_place(order, mix);
            }
        }

        double loss_sum = 0, weight_sum = 0;
        for (std::size_t begin = 0, bi = 0; begin < order.size(); begin += cfg.batch, ++bi) {
            const std::size_t count = std::min(cfg.batch, order.size() - begin);
            Matrix x(count, train.n);
            double w_total = 0;
            for (std::size_t k = 0; k < count; ++k) {
                const auto idx = order[begin + k];
                const Item &it = items[idx];
                if (opt.nullify) {
                    const auto v = rfn_nullify(*it.x, opt.nullify->first, opt.nullify->second,
                                               derive_seed(cfg.seed, {0x4f12, epoch, idx}));
                    std::copy(v.begin(), v.end(), x.row(k).begin());
                } else {
                    it.x->to_dense(x.row(k));
                }
                w_total += it.weight;
            }
            if (w_total <= 0) continue;
            nn::NetworkCache cache;
            Matrix p = nn::forward_batch(net, x, {cfg.dropout, derive_seed(cfg.seed, {0xd0, epoch, bi})}, &cache);
            nn::softmax_rows(p);
            for (std::size_t k = 0; k < count; ++k) {
                const Item &it = items[order[begin + k]];
                const auto y = static_cast<std::size_t>(it.label);
                loss_sum -= it.weight * std::log(std::max(p(k, y), nn::kLogClamp));
                for (std::size_t c = 0; c < 2; ++c) p(k, c) = it.weight * (p(k, c) - (c == y ? 1.0 : 0.0)) / w_total;
            }
            weight_sum += w_total;
            for (auto &g : grads) std::fill(g.begin(), g.end(), 0.0);
            nn::backward_batch(net, cache, p, nn::GradientAt::pre_activation, grads, false);
            nn::adam_step(adam, params, grads);
        }
        hist.train_loss.push_back(weight_sum > 0 ? loss_sum / weight_sum : 0.0);
        const auto [acc, loss] = validation_score(net, valid, opt, cfg.seed);
        hist.valid_accuracy.push_back(acc);
        hist.valid_loss.push_back(loss);
        if (acc > best_acc || (acc == best_acc && loss < best_loss)) {
            best_acc = acc;
            best_loss = loss;
            best = net;
            hist.best_epoch = epoch;
        }
    }
    if (cfg.epochs == 0) best = net;
    if (history) *history = std::move(hist);
    return best;
}

nn::Network train_standard_dnn(const Dataset &train, const Dataset &valid, const DnnArch &arch,
                               const TrainConfig &cfg, TrainHistory *history) {
    return fit_network(make_dnn(train.n, arch, derive_seed(cfg.seed, {0xd77})), train, valid, cfg, {}, history);
}

RfnModel train_rfn(const Dataset &train, const Dataset &valid, const DnnArch &arch, const TrainConfig &cfg,
                   double mean, double stddev, TrainHistory *history) {
    if (stddev < 0) throw std::invalid_argument("train_rfn: stddev must be non-negative");
    FitOptions opt;
    opt.nullify = std::make_pair(mean, stddev);
    RfnModel m;
    m.network = fit_network(make_dnn(train.n, arch, derive_seed(cfg.seed, {0xd77})), train, valid, cfg, opt, history);
    m.mean = mean;
    m.stddev = stddev;
    return m;
}

int rfn_predict(const RfnModel &model, const BitVector &x, std::uint64_t seed) {
    return nn::classify(nn::probabilities_of(model.network, rfn_nullify(x, model.mean, model.stddev, seed)));
}

nn::Network train_adversarial(const Dataset &train, const Dataset &valid, const PerturbationMask &mask,
                              const DnnArch &arch, const TrainConfig &cfg, const AdversarialTrainingConfig &adv,
                              TrainHistory *history) {
    require_same_dim(mask.n(), train.n, "train_adversarial mask");
    if (!(adv.subsample > 0.0 && adv.subsample <= 1.0)) throw std::invalid_argument("train_adversarial: subsample must lie in (0,1]");
    std::vector<std::size_t> malware;
    for (std::size_t i = 0; i < train.samples.size(); ++i)
        if (train.samples[i].label == kMalware) malware.push_back(i);
    Rng rng = make_rng(cfg.seed, {0xad5});
    const auto count = static_cast<std::size_t>(std::ceil(adv.subsample * static_cast<double>(malware.size())));
    std::vector<std::size_t> chosen;
    for (auto k : sample_distinct(rng, malware.size(), count)) chosen.push_back(malware[k]);

    FitOptions opt;
    opt.augment_weight = adv.lambda;
    opt.augment = [&](const nn::Network &net, std::size_t) {
        std::vector<LabeledSample> out(chosen.size());
#pragma omp parallel for schedule(dynamic, 4)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(chosen.size()); ++k) {
            const auto &x = train.samples[chosen[static_cast<std::size_t>(k)]].features;
            out[static_cast<std::size_t>(k)] = {jsma_attack(net, x, mask, adv.eps).adversarial, kMalware};
        }
        return out;
    };
    return fit_network(make_dnn(train.n, arch, derive_seed(cfg.seed, {0xd77})), train, valid, cfg, opt, history);
}

double mixed_adversarial_loss(const nn::Network &net, const Dataset &clean, std::span<const BitVector> adversarial,
                              double lambda) {
    double clean_sum = 0, adv_sum = 0;
    for (const auto &s : clean.samples) {
        const auto p = nn::probabilities_of(net, s.features.to_dense());
        clean_sum -= std::log(std::max(p[static_cast<std::size_t>(s.label)], nn::kLogClamp));
    }
    for (const auto &x : adversarial) {
        const auto p = nn::probabilities_of(net, x.to_dense());
        adv_sum -= std::log(std::max(p[kMalware], nn::kLogClamp));
    }
    const double norm = static_cast<double>(clean.samples.size()) + lambda * static_cast<double>(adversarial.size());
    if (norm <= 0) throw std::invalid_argument("mixed_adversarial_loss: empty objective");
    return (clean_sum + lambda * adv_sum) / norm;
}

HashTranModel train_dnn_dae(const Dataset &train, const Dataset &valid, const DnnArch &arch, double lambda_d,
                            double noise_eps, const TrainConfig &cfg, TrainHistory *history) {
    if (arch.hidden.size() < 2) throw std::invalid_argument("train_dnn_dae: need at least two hidden layers");
    HashTranArch ha;
    ha.k1 = arch.hidden[0];
    ha.mix = arch.hidden[1];
    ha.head.assign(arch.hidden.begin() + 2, arch.hidden.end());
    auto init = make_hashtran(IdentityTransform{train.n}, ha, lambda_d, noise_eps, derive_seed(cfg.seed, {0xdae}));
    return train_hashtran(train, valid, std::move(init), cfg, history);
}

// --- checkpoints ---------------------------------------------------------------

void write_dnn(std::ostream &out, const nn::Network &net, const std::string &kind) {
    records::json head;
    head["format"] = "hashtran-checkpoint";
    head["kind"] = kind;
    head["layers"] = net.layers.size();
    records::write(out, head);
    detail::write_network_records(out, "net", net);
}

nn::Network read_dnn(std::istream &in) {
    records::Reader reader(in);
    const auto head = reader.next("checkpoint header");
    const auto kind = reader.field<std::string>(head, "kind");
    if (kind != "dnn" && kind != "adversarial" && kind != "surrogate") reader.fail("not a plain network checkpoint: " + kind);
    return detail::read_network_records(reader, "net", reader.field<std::size_t>(head, "layers"));
}

void write_rfn(std::ostream &out, const RfnModel &m) {
    records::json head;
    head["format"] = "hashtran-checkpoint";
    head["kind"] = "rfn";
    head["layers"] = m.network.layers.size();
    head["mean"] = m.mean;
    head["stddev"] = m.stddev;
    records::write(out, head);
    detail::write_network_records(out, "net", m.network);
}

RfnModel read_rfn(std::istream &in) {
    records::Reader reader(in);
    const auto head = reader.next("checkpoint header");
    if (reader.field<std::string>(head, "kind") != "rfn") reader.fail("not an rfn checkpoint");
    RfnModel m;
    m.mean = reader.field<double>(head, "mean");
    m.stddev = reader.field<double>(head, "stddev");
    m.network = detail::read_network_records(reader, "net", reader.field<std::size_t>(head, "layers"));
    return m;
}

} // namespace hashtran
