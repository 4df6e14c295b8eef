#include "hashtran/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hashtran/errors.hpp"
#include "layer_io.hpp"
#include "transform_io.hpp"

namespace hashtran {

using nn::Matrix;

HashTranModel make_hashtran(const HashingTransform &t, const HashTranArch &arch, double lambda_d, double noise_eps,
                            std::uint64_t seed) {
    if (arch.k1 == 0 || arch.mix == 0) throw std::invalid_argument("make_hashtran: zero layer width");
    if (lambda_d < 0) throw std::invalid_argument("make_hashtran: lambda_d must be non-negative");
    HashTranModel m;
    m.transform = t;
    const std::size_t rows = row_count(t);
    const std::size_t width = row_width(t);
    Rng rng = make_rng(seed, {0x4e7});
    m.encoder_rows = nn::RowwiseFirstLayer::random(rows, width, arch.k1, rng);

    const std::vector<std::size_t> mix{rows * arch.k1, arch.mix};
    m.encoder_mix = nn::make_network(mix, derive_seed(seed, {0x31c}), nn::Activation::relu);

    std::vector<std::size_t> head{arch.mix};
    head.insert(head.end(), arch.head.begin(), arch.head.end());
    head.push_back(2);
    m.classifier = nn::make_network(head, derive_seed(seed, {0xc1a}));

    if (lambda_d > 0) {
        const std::vector<std::size_t> dec{arch.mix, rows * width};
        m.decoder = nn::make_network(dec, derive_seed(seed, {0xdec}), nn::Activation::sigmoid);
    }
    m.lambda_d = lambda_d;
    m.noise_eps = noise_eps;
    return m;
}

std::vector<std::span<double>> parameters(HashTranModel &m) {
    auto out = nn::parameters(m.encoder_rows);
    for (auto *net : {&m.encoder_mix, &m.classifier, &m.decoder}) {
        auto p = nn::parameters(*net);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

nn::Gradients zero_gradients(const HashTranModel &m) {
    nn::Gradients g;
    nn::append_zero_gradients(m.encoder_rows, g);
    nn::append_zero_gradients(m.encoder_mix, g);
    nn::append_zero_gradients(m.classifier, g);
    nn::append_zero_gradients(m.decoder, g);
    return g;
}

// --- noise ------------------------------------------------------------------

HashMatrix flip_fraction(const HashMatrix &m, double p, Rng &rng) {
    HashMatrix out = m;
    const std::size_t total = m.bits.size();
    if (!(p > 0.0) || total == 0) return out;
    const auto flips = std::min(total, static_cast<std::size_t>(std::ceil(static_cast<double>(total) * p)));
    for (auto i : sample_distinct(rng, total, flips)) out.bits[i] ^= 1;
    return out;
}

HashMatrix inject_noise(const HashMatrix &m, const NoiseSpec &spec, std::uint64_t seed) {
    if (spec.n == 0) throw std::invalid_argument("inject_noise: n must be positive");
    if (spec.eps < 0) throw std::invalid_argument("inject_noise: eps must be non-negative");
    if (spec.eps == 0) return m;
    Rng rng = make_rng(seed, {0x4015e});
    std::normal_distribution<double> normal(0.0, spec.eps / static_cast<double>(spec.n));
    const double p = std::max(0.0, normal(rng));
    return flip_fraction(m, p, rng);
}

// --- forward pieces -----------------------------------------------------------

namespace {

constexpr std::size_t kEvalChunk = 256;

nn::Dropout sub_dropout(const nn::Dropout &d, std::uint64_t part) { return {d.rate, derive_seed(d.seed, {part})}; }

void check_shape(const HashTranModel &m, const Matrix &x) {
    require_same_dim(x.cols, m.hash_width(), "hash matrix width");
}

double bce_sum(const Matrix &probs, const Matrix &target, std::size_t r) {
    double total = 0;
    for (std::size_t c = 0; c < probs.cols; ++c) {
        const double p = std::clamp(probs(r, c), nn::kLogClamp, 1.0 - nn::kLogClamp);
        total -= target(r, c) > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    return total;
}

// Backward from d(hidden) through W_c1 and W_h.
void encoder_backward(const HashTranModel &model, const Encoded &enc, const Matrix &d_hidden, nn::Gradients &grads) {
    const std::size_t rows_blocks = 2 * model.encoder_rows.per_row.size();
    std::span<std::vector<double>> all(grads);
    Matrix d_rows = nn::backward_batch(model.encoder_mix, enc.mix, d_hidden, nn::GradientAt::output,
                                       all.subspan(rows_blocks, 2 * model.encoder_mix.layers.size()), true);
    nn::rowwise_backward_batch(model.encoder_rows, enc.rows, d_rows, all.subspan(0, rows_blocks), false);
}

} // namespace

Matrix encode(const HashTranModel &m, const Matrix &x, const nn::Dropout &dropout, Encoded *cache) {
    check_shape(m, x);
    Matrix h = nn::rowwise_forward_batch(m.encoder_rows, x, sub_dropout(dropout, 1), cache ? &cache->rows : nullptr);
    Matrix hidden = nn::forward_batch(m.encoder_mix, h, sub_dropout(dropout, 2), cache ? &cache->mix : nullptr);
    if (cache) cache->hidden = hidden;
    return hidden;
}

std::vector<double> reconstruction_errors(const HashTranModel &model, std::span<const HashMatrix> ms) {
    if (!model.has_dae()) throw StateError("reconstruction_error: model has no DAE");
    std::vector<double> out;
    out.reserve(ms.size());
    for (std::size_t begin = 0; begin < ms.size(); begin += kEvalChunk) {
        const auto chunk = ms.subspan(begin, std::min(kEvalChunk, ms.size() - begin));
        const Matrix x = nn::flatten(chunk);
        check_shape(model, x);
        const Matrix recon = nn::forward_batch(model.decoder, encode(model, x));
        for (std::size_t r = 0; r < x.rows; ++r) out.push_back(bce_sum(recon, x, r) / static_cast<double>(x.cols));
    }
    return out;
}

double reconstruction_error(const HashTranModel &model, const HashMatrix &m) {
    return reconstruction_errors(model, std::span<const HashMatrix>(&m, 1)).front();
}

JointLossValue joint_loss(const HashTranModel &model, const Matrix &clean, const Matrix &noisy,
                          std::span<const int> labels, const nn::Dropout &dropout, nn::Gradients &grads) {
    check_shape(model, clean);
    require_same_dim(labels.size(), clean.rows, "joint_loss labels");
    const std::size_t batch = clean.rows;
    if (batch == 0) throw std::invalid_argument("joint_loss: empty batch");
    const auto b = static_cast<double>(batch);
    const std::size_t head_begin = 2 * (model.encoder_rows.per_row.size() + model.encoder_mix.layers.size());
    std::span<std::vector<double>> all(grads);
    JointLossValue value;

    // classification path on clean matrices
    {
        Encoded enc;
        encode(model, clean, sub_dropout(dropout, 0xa), &enc);
        nn::NetworkCache head;
        Matrix p = nn::forward_batch(model.classifier, enc.hidden, sub_dropout(dropout, 0xb), &head);
        nn::softmax_rows(p);
        for (std::size_t r = 0; r < batch; ++r) {
            const auto y = static_cast<std::size_t>(labels[r]);
            value.classification -= std::log(std::max(p(r, y), nn::kLogClamp));
            for (std::size_t c = 0; c < p.cols; ++c) p(r, c) = (p(r, c) - (c == y ? 1.0 : 0.0)) / b;
        }
        value.classification /= b;
        Matrix d_hidden = nn::backward_batch(model.classifier, head, p, nn::GradientAt::pre_activation,
                                             all.subspan(head_begin, 2 * model.classifier.layers.size()), true);
        encoder_backward(model, enc, d_hidden, grads);
    }

    // reconstruction path: noisy input, clean target
    if (model.has_dae()) {
        require_same_dim(noisy.rows, batch, "joint_loss noisy batch");
        Encoded enc;
        encode(model, noisy, sub_dropout(dropout, 0xc), &enc);
        nn::NetworkCache dec;
        Matrix out = nn::forward_batch(model.decoder, enc.hidden, {}, &dec);
        const double scale = model.lambda_d / (b * static_cast<double>(out.cols));
        double total = 0;
        for (std::size_t r = 0; r < batch; ++r) total += bce_sum(out, clean, r);
        value.reconstruction = total / (b * static_cast<double>(out.cols));
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = (out.data[i] - clean.data[i]) * scale;
        const std::size_t dec_begin = head_begin + 2 * model.classifier.layers.size();
        Matrix d_hidden = nn::backward_batch(model.decoder, dec, out, nn::GradientAt::pre_activation,
                                             all.subspan(dec_begin, 2 * model.decoder.layers.size()), true);
        encoder_backward(model, enc, d_hidden, grads);
    }
    value.total = value.classification + model.lambda_d * value.reconstruction;
    return value;
}

// --- training ---------------------------------------------------------------

namespace {

// Clean validation accuracy and mean classification cross-entropy.
std::pair<double, double> validation_score(const HashTranModel &model, std::span<const HashMatrix> ms,
                                           const Dataset &valid) {
    std::size_t correct = 0;
    double loss = 0;
    for (std::size_t begin = 0; begin < ms.size(); begin += kEvalChunk) {
        const auto chunk = ms.subspan(begin, std::min(kEvalChunk, ms.size() - begin));
        Matrix p = nn::forward_batch(model.classifier, encode(model, nn::flatten(chunk)));
        nn::softmax_rows(p);
        for (std::size_t r = 0; r < p.rows; ++r) {
            const int y = valid.samples[begin + r].label;
            correct += (p(r, 1) > p(r, 0) ? 1 : 0) == y ? 1 : 0;
            loss -= std::log(std::max(p(r, static_cast<std::size_t>(y)), nn::kLogClamp));
        }
    }
    const auto count = static_cast<double>(ms.size());
    return {static_cast<double>(correct) / count, loss / count};
}

std::vector<BitVector> features_of(const Dataset &ds) {
    std::vector<BitVector> xs;
    xs.reserve(ds.samples.size());
    for (const auto &s : ds.samples) xs.push_back(s.features);
    return xs;
}

} // namespace

HashTranModel train_hashtran(const Dataset &train, const Dataset &valid, HashTranModel model, const TrainConfig &cfg,
                             TrainHistory *history) {
    if (train.samples.empty() || valid.samples.empty()) throw std::invalid_argument("train_hashtran: empty data");
    if (cfg.batch == 0) throw std::invalid_argument("train_hashtran: batch size must be positive");
    require_same_dim(train.n, input_dim(model.transform), "train_hashtran input");
    const auto train_x = features_of(train);
    const auto valid_x = features_of(valid);
    const auto train_h = apply_batch(model.transform, train_x);
    const auto valid_h = apply_batch(model.transform, valid_x);
    const NoiseSpec noise{model.noise_eps, train.n};

    auto params = parameters(model);
    nn::AdamState adam = nn::make_adam(cfg.adam, params);
    nn::Gradients grads = zero_gradients(model);

    TrainHistory hist;
    HashTranModel best = model;
    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = make_rng(cfg.seed, {0xe90c, epoch});
        shuffle_in_place(order, shuffle_rng);
        double loss_sum = 0;
        for (std::size_t begin = 0, batch_index = 0; begin < order.size(); begin += cfg.batch, ++batch_index) {
            const std::size_t count = std::min(cfg.batch, order.size() - begin);
            std::vector<HashMatrix> clean, noisy;
            std::vector<int> labels;
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t idx = order[begin + k];
                clean.push_back(train_h[idx]);
                if (model.has_dae()) noisy.push_back(inject_noise(train_h[idx], noise, derive_seed(cfg.seed, {0x0153, epoch, idx})));
                labels.push_back(train.samples[idx].label);
            }
            for (auto &g : grads) std::fill(g.begin(), g.end(), 0.0);
            const nn::Dropout dropout{cfg.dropout, derive_seed(cfg.seed, {0xd0, epoch, batch_index})};
            const Matrix clean_m = nn::flatten(clean);
            const Matrix noisy_m = model.has_dae() ? nn::flatten(noisy) : Matrix{};
            const auto value = joint_loss(model, clean_m, noisy_m, labels, dropout, grads);
            loss_sum += value.total * static_cast<double>(count);
            nn::adam_step(adam, params, grads);
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(order.size()));

        const auto [acc, loss] = validation_score(model, valid_h, valid);
        hist.valid_accuracy.push_back(acc);
        hist.valid_loss.push_back(loss);
        if (acc > best_acc || (acc == best_acc && loss < best_loss)) {
            best_acc = acc;
            best_loss = loss;
            best = model;
            hist.best_epoch = epoch;
        }
    }
    if (cfg.epochs == 0) best = model;
    best.threshold.reset();
    if (!best.has_dae()) best.threshold = std::numeric_limits<double>::infinity();
    if (history) *history = std::move(hist);
    return best;
}

// --- calibration and prediction ---------------------------------------------

std::vector<double> exponential_grid(double base, int lo, int hi) {
    if (!(base > 0.0) || lo > hi) throw std::invalid_argument("exponential_grid: need base > 0 and lo <= hi");
    std::vector<double> out;
    for (int e = lo; e <= hi; ++e) out.push_back(std::pow(base, e));
    return out;
}

LambdaSearch search_lambda_d(const Dataset &train, const Dataset &valid, const HashingTransform &t,
                             const HashTranArch &arch, double noise_eps, std::span<const double> candidates,
                             const TrainConfig &cfg) {
    if (candidates.empty()) throw std::invalid_argument("search_lambda_d: no candidates");
    LambdaSearch out;
    double best = -1.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        TrainHistory hist;
        auto init = make_hashtran(t, arch, candidates[k], noise_eps, derive_seed(cfg.seed, {0x1a5, k}));
        (void)train_hashtran(train, valid, std::move(init), cfg, &hist);
        const double acc = hist.valid_accuracy.empty() ? 0.0 : hist.valid_accuracy[hist.best_epoch];
        out.candidates.push_back(candidates[k]);
        out.valid_accuracy.push_back(acc);
        if (acc > best) {
            best = acc;
            out.lambda_d = candidates[k];
        }
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_threshold(HashTranModel &model, const Dataset &valid, double pass_rate) {
    if (!(pass_rate > 0.0 && pass_rate <= 1.0)) throw std::invalid_argument("calibrate_threshold: pass_rate must lie in (0,1]");
    if (valid.samples.empty()) throw std::invalid_argument("calibrate_threshold: empty validation set");
    if (!model.has_dae()) {
        model.threshold = std::numeric_limits<double>::infinity();
        return *model.threshold;
    }
    const auto hashes = apply_batch(model.transform, features_of(valid));
    model.threshold = quantile(reconstruction_errors(model, hashes), pass_rate);
    return *model.threshold;
}

const char *verdict_name(Verdict v) noexcept {
    switch (v) {
    case Verdict::benign: return "benign";
    case Verdict::malware: return "malware";
    case Verdict::rejected: return "rejected";
    }
    return "?";
}

std::vector<Verdict> predict_with_rejection(const HashTranModel &model, std::span<const BitVector> xs) {
    if (!model.threshold) throw StateError("predict_with_rejection: threshold t_r is not calibrated");
    const double t_r = *model.threshold;
    std::vector<Verdict> out;
    out.reserve(xs.size());
    for (std::size_t begin = 0; begin < xs.size(); begin += kEvalChunk) {
        const auto chunk = xs.subspan(begin, std::min(kEvalChunk, xs.size() - begin));
        const auto hashes = apply_batch(model.transform, chunk);
        const Matrix x = nn::flatten(hashes);
        const Matrix hidden = encode(model, x);
        const Matrix logits = nn::forward_batch(model.classifier, hidden);
        Matrix recon;
        if (model.has_dae()) recon = nn::forward_batch(model.decoder, hidden);
        for (std::size_t r = 0; r < x.rows; ++r) {
            if (model.has_dae() && bce_sum(recon, x, r) / static_cast<double>(x.cols) > t_r) {
                out.push_back(Verdict::rejected);
            } else {
                out.push_back(logits(r, 1) > logits(r, 0) ? Verdict::malware : Verdict::benign);
            }
        }
    }
    return out;
}

Verdict predict_with_rejection(const HashTranModel &model, const BitVector &x) {
    return predict_with_rejection(model, std::span<const BitVector>(&x, 1)).front();
}

std::vector<double> hashtran_probabilities(const HashTranModel &model, const BitVector &x) {
    const Matrix m = nn::flatten(apply_transform(model.transform, x));
    return nn::softmax(nn::forward_batch(model.classifier, encode(model, m)).data);
}

// --- checkpoint -------------------------------------------------------------

void write_hashtran(std::ostream &out, const HashTranModel &m) {
    records::json head;
    head["format"] = "hashtran-checkpoint";
    head["kind"] = "hashtran";
    head["lambda_d"] = m.lambda_d;
    head["noise_eps"] = m.noise_eps;
    if (!m.threshold) {
        head["threshold"] = nullptr;
    } else if (std::isinf(*m.threshold)) {
        head["threshold"] = "inf";
    } else {
        head["threshold"] = *m.threshold;
    }
    head["rows"] = m.encoder_rows.per_row.size();
    head["mix_layers"] = m.encoder_mix.layers.size();
    head["classifier_layers"] = m.classifier.layers.size();
    head["decoder_layers"] = m.decoder.layers.size();
    records::write(out, head);
    detail::write_transform_records(out, m.transform);
    detail::write_rowwise_records(out, "W_h", m.encoder_rows);
    detail::write_network_records(out, "W_c1", m.encoder_mix);
    detail::write_network_records(out, "head", m.classifier);
    detail::write_network_records(out, "W_d", m.decoder);
}

HashTranModel read_hashtran(std::istream &in) {
    records::Reader reader(in);
    const auto head = reader.next("checkpoint header");
    if (reader.field<std::string>(head, "kind") != "hashtran") reader.fail("not a hashtran checkpoint");
    HashTranModel m;
    m.lambda_d = reader.field<double>(head, "lambda_d");
    m.noise_eps = reader.field<double>(head, "noise_eps");
    const auto &t = head.at("threshold");
    if (t.is_string()) {
        if (t.get<std::string>() != "inf") reader.fail("threshold must be a number, null or \"inf\"");
        m.threshold = std::numeric_limits<double>::infinity();
    } else if (t.is_number()) {
        m.threshold = t.get<double>();
    }
    const auto rows = reader.field<std::size_t>(head, "rows");
    const auto mix = reader.field<std::size_t>(head, "mix_layers");
    const auto cls = reader.field<std::size_t>(head, "classifier_layers");
    const auto dec = reader.field<std::size_t>(head, "decoder_layers");
    m.transform = detail::read_transform_records(reader);
    m.encoder_rows = detail::read_rowwise_records(reader, "W_h", rows);
    m.encoder_mix = detail::read_network_records(reader, "W_c1", mix);
    m.classifier = detail::read_network_records(reader, "head", cls);
    m.decoder = detail::read_network_records(reader, "W_d", dec);
    if (m.encoder_rows.rows != row_count(m.transform) || m.encoder_rows.width != row_width(m.transform)) {
        reader.fail("row-wise layer does not match the transform shape");
    }
    return m;
}

} // namespace hashtran
