#include "hashtran/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hashtran/errors.hpp"
#include "records.hpp"

namespace hashtran {

namespace {

std::vector<double> dense(const BitVector &x) { return x.to_dense(); }

AttackResult finish(const nn::Network &s, const BitVector &x, BitVector adv, std::size_t iterations) {
    AttackResult r;
    r.original = x;
    r.flips = hamming_distance(x, adv);
    r.evaded = !classified_malware(s, adv);
    r.adversarial = std::move(adv);
    r.iterations = iterations;
    return r;
}

bool admissible(const BitVector &x, const PerturbationMask &mask, std::size_t i) { return mask.allows(i) && !x[i]; }

void check_inputs(const nn::Network &s, const BitVector &x, const PerturbationMask &mask) {
    require_same_dim(x.size(), s.input_dim(), "attack input");
    require_same_dim(mask.n(), x.size(), "attack mask");
    if (s.output_dim() != 2) throw DimensionError("attack: surrogate must have two outputs");
}

double benign_probability(const nn::Network &s, const BitVector &x) { return 1.0 - malware_probability(s, x); }

} // namespace

bool satisfies_constraints(const AttackResult &r, const PerturbationMask &mask, std::size_t eps) {
    if (r.original.size() != r.adversarial.size() || mask.n() != r.original.size()) return false;
    if (!is_subset(r.original, r.adversarial)) return false;
    if (!is_subset(r.original ^ r.adversarial, mask.insertable)) return false;
    if (hamming_distance(r.original, r.adversarial) != r.flips) return false;
    return r.flips <= eps;
}

nn::Network train_surrogate(const Dataset &train, const Dataset &valid, const DnnArch &arch, const TrainConfig &cfg,
                            TrainHistory *history) {
    return fit_network(make_dnn(train.n, arch, derive_seed(cfg.seed, {0x5a6})), train, valid, cfg, {}, history);
}

double malware_probability(const nn::Network &net, const BitVector &x) {
    return nn::probabilities_of(net, dense(x))[1];
}

bool classified_malware(const nn::Network &net, const BitVector &x) {
    return nn::classify(nn::probabilities_of(net, dense(x))) == kMalware;
}

std::vector<std::size_t> select_attack_seeds(const nn::Network &surrogate, const Dataset &pool, std::size_t count,
                                             std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
        const auto &s = pool.samples[i];
        if (s.label == kMalware && classified_malware(surrogate, s.features)) eligible.push_back(i);
    }
    Rng rng = make_rng(seed, {0x5eed5});
    shuffle_in_place(eligible, rng);
    if (eligible.size() > count) eligible.resize(count);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

// --- JSMA -----------------------------------------------------------------------

std::vector<double> saliency_map(const nn::Network &net, const BitVector &x) {
    const nn::Matrix j = nn::input_jacobian(net, dense(x), true);
    std::vector<double> s(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double alpha = j(0, i);
        const double beta = j(1, i);
        if (alpha > 0.0 && beta < 0.0) s[i] = alpha * std::abs(beta);
    }
    return s;
}

namespace {

// Candidate order: score descending, index ascending. Only positive scores.
std::vector<std::size_t> ranked(const std::vector<double> &score, const BitVector &x, const PerturbationMask &mask) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < score.size(); ++i)
        if (admissible(x, mask, i) && score[i] > 0.0) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    return idx;
}

constexpr std::size_t kMaxTries = 16;

} // namespace

AttackResult jsma_attack(const nn::Network &surrogate, const BitVector &x, const PerturbationMask &mask,
                         std::size_t eps, double confidence) {
    check_inputs(surrogate, x, mask);
    if (!(confidence >= 0.5 && confidence < 1.0)) throw std::invalid_argument("jsma: confidence must be in [0.5, 1)");
    BitVector adv = x;
    std::size_t iterations = 0;
    double benign = benign_probability(surrogate, adv);
    for (std::size_t flips = 0; flips < eps && (classified_malware(surrogate, adv) || benign < confidence); ++flips) {
        ++iterations;
        const auto order = ranked(saliency_map(surrogate, adv), adv, mask);
        bool accepted = false;
        for (std::size_t t = 0; t < std::min(kMaxTries, order.size()); ++t) {
            BitVector trial = adv;
            trial.set(order[t]);
            const double b = benign_probability(surrogate, trial);
            if (b >= benign) {
                adv = std::move(trial);
                benign = b;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    return finish(surrogate, x, std::move(adv), iterations);
}

// --- GD-KDE ---------------------------------------------------------------------

namespace {

double sigma_of(const GdkdeParams &p, std::size_t n) { return p.sigma > 0 ? p.sigma : static_cast<double>(n) / 10.0; }

// (lambda / N_t) * sum_r k(x, r)
double kde_term(const BitVector &x, std::span<const BitVector> refs, double lambda, double sigma) {
    double total = 0;
    for (const auto &r : refs) total += std::exp(-static_cast<double>(hamming_distance(x, r)) / sigma);
    return lambda * total / static_cast<double>(refs.size());
}

} // namespace

double gdkde_objective(const nn::Network &surrogate, const BitVector &x, std::span<const BitVector> benign_refs,
                       const GdkdeParams &params) {
    if (benign_refs.empty()) throw std::invalid_argument("gdkde: empty benign reference set");
    const double g = -nn::logits_of(surrogate, dense(x))[0];
    return g - kde_term(x, benign_refs, params.lambda, sigma_of(params, x.size()));
}

AttackResult gdkde_attack(const nn::Network &surrogate, const BitVector &x, std::span<const BitVector> benign_refs,
                          const PerturbationMask &mask, std::size_t eps, const GdkdeParams &params) {
    check_inputs(surrogate, x, mask);
    if (benign_refs.empty()) throw std::invalid_argument("gdkde: empty benign reference set");
    for (const auto &r : benign_refs) require_same_dim(r.size(), x.size(), "gdkde reference");
    const std::size_t n = x.size();
    const double sigma = sigma_of(params, n);
    const double scale = params.lambda / static_cast<double>(benign_refs.size());
    const double away = std::exp(-1.0 / sigma) - 1.0;  // kernel change when d_r grows by one
    const double toward = std::exp(1.0 / sigma) - 1.0;  // ... when d_r shrinks by one

    BitVector adv = x;
    std::vector<double> dist(benign_refs.size());
    for (std::size_t r = 0; r < benign_refs.size(); ++r) dist[r] = static_cast<double>(hamming_distance(adv, benign_refs[r]));
    double objective = gdkde_objective(surrogate, adv, benign_refs, params);
    double benign = benign_probability(surrogate, adv);
    std::size_t iterations = 0;

    for (std::size_t flips = 0; flips < eps; ++flips) {
        ++iterations;
        // linearized change of g for a 0 -> 1 flip
        std::vector<double> delta = nn::logit_gradient(surrogate, dense(adv), std::vector<double>{-1.0, 0.0});
        // exact change of the kernel sum
        std::vector<double> kde(n, 0.0);
        double all_away = 0;
        for (std::size_t r = 0; r < benign_refs.size(); ++r) {
            const double k = std::exp(-dist[r] / sigma);
            all_away += k * away;
            for (auto i : benign_refs[r].ones()) kde[i] += k * (toward - away);
        }
        std::vector<double> improvement(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) improvement[i] = -(delta[i] - scale * (all_away + kde[i]));

        const auto order = ranked(improvement, adv, mask);
        bool accepted = false;
        for (std::size_t t = 0; t < std::min(kMaxTries, order.size()); ++t) {
            BitVector trial = adv;
            trial.set(order[t]);
            const double obj = gdkde_objective(surrogate, trial, benign_refs, params);
            const double b = benign_probability(surrogate, trial);
            if (obj < objective && b >= benign) {
                adv = std::move(trial);
                objective = obj;
                benign = b;
                for (std::size_t r = 0; r < benign_refs.size(); ++r) dist[r] += benign_refs[r][order[t]] ? -1.0 : 1.0;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    return finish(surrogate, x, std::move(adv), iterations);
}

// --- CW -------------------------------------------------------------------------

std::vector<double> cw_project(std::span<const double> candidate, const BitVector &x, const PerturbationMask &mask) {
    require_same_dim(candidate.size(), x.size(), "cw_project");
    require_same_dim(mask.n(), x.size(), "cw_project mask");
    std::vector<double> out(candidate.size());
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        const double xi = x[i] ? 1.0 : 0.0;
        out[i] = mask.allows(i) ? std::max(std::clamp(candidate[i], 0.0, 1.0), xi) : xi;
    }
    return out;
}

double cw_margin(const nn::Network &surrogate, std::span<const double> x, double iota) {
    const auto f = nn::logits_of(surrogate, x);
    return std::max(f[1] - f[0], -iota);
}

namespace {

// Round projected coordinates >= 0.5 to 1, then keep the eps largest insertions.
// Magnitudes come from the unclipped step so coordinates saturated at 1 are
// still ordered by how hard the gradient pushes them.
BitVector cw_discretize(const std::vector<double> &cur, const std::vector<double> &raw, const BitVector &x,
                        std::size_t eps) {
    std::vector<std::size_t> inserted;
    for (std::size_t i = 0; i < cur.size(); ++i)
        if (!x[i] && cur[i] >= 0.5) inserted.push_back(i);
    std::stable_sort(inserted.begin(), inserted.end(), [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
    if (inserted.size() > eps) inserted.resize(eps);
    BitVector adv = x;
    for (auto i : inserted) adv.set(i);
    return adv;
}

} // namespace

AttackResult cw_attack_binary(const nn::Network &surrogate, const BitVector &x, const PerturbationMask &mask,
                              std::size_t eps, const CwParams &params) {
    check_inputs(surrogate, x, mask);
    const std::size_t n = x.size();
    const std::vector<double> base = dense(x);
    std::vector<double> cur = base;

    // gradient descent rarely settles on a binary point, so every iterate is
    // discretized and the one with the lowest surrogate margin is kept
    BitVector best = x;
    double best_margin = nn::logits_of(surrogate, base)[1] - nn::logits_of(surrogate, base)[0];
    std::size_t iterations = 0;
    for (std::size_t step = 0; step < params.steps; ++step) {
        ++iterations;
        const auto f = nn::logits_of(surrogate, cur);
        std::vector<double> grad(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) grad[i] = 2.0 * (cur[i] - base[i]);
        if (f[1] - f[0] > -params.iota) {  // hinge is flat once saturated
            const auto g = nn::logit_gradient(surrogate, cur, std::vector<double>{-1.0, 1.0});
            for (std::size_t i = 0; i < n; ++i) grad[i] += params.lambda * g[i];
        }
        for (std::size_t i = 0; i < n; ++i) cur[i] -= params.step * grad[i];
        const std::vector<double> raw = cur;
        cur = cw_project(cur, x, mask);

        BitVector cand = cw_discretize(cur, raw, x, eps);
        const auto fc = nn::logits_of(surrogate, dense(cand));
        if (fc[1] - fc[0] < best_margin) {
            best_margin = fc[1] - fc[0];
            best = std::move(cand);
        }
    }
    return finish(surrogate, x, std::move(best), iterations);
}

// --- Mimicry --------------------------------------------------------------------

AttackResult mimicry_attack(const nn::Network &surrogate, const BitVector &x, std::span<const BitVector> benign_pool,
                            const PerturbationMask &mask, std::size_t guides, std::uint64_t seed) {
    check_inputs(surrogate, x, mask);
    if (benign_pool.empty()) throw std::invalid_argument("mimicry: empty benign pool");
    if (guides == 0) throw std::invalid_argument("mimicry: need at least one guide");
    if (benign_pool.size() < guides) throw std::invalid_argument("mimicry: benign pool smaller than the guide count");
    Rng rng = make_rng(seed, {0x313c});
    const auto picks = sample_distinct(rng, benign_pool.size(), guides);

    BitVector best;
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_flips = 0;
    for (auto p : picks) {  // ascending pool index, so strict comparisons keep the lowest index
        require_same_dim(benign_pool[p].size(), x.size(), "mimicry guide");
        BitVector cand = x | (benign_pool[p] & mask.insertable);
        const double score = malware_probability(surrogate, cand);
        const std::size_t flips = hamming_distance(x, cand);
        if (score < best_score || (score == best_score && flips < best_flips)) {
            best_score = score;
            best_flips = flips;
            best = std::move(cand);
        }
    }
    return finish(surrogate, x, std::move(best), picks.size());
}

// --- files ----------------------------------------------------------------------

void write_adversarial_set(std::ostream &out, const AdversarialSet &set) {
    records::json head;
    head["n"] = set.n;
    head["name"] = set.name;
    records::write(out, head);
    for (const auto &s : set.samples) {
        require_same_dim(s.features.size(), set.n, "adversarial sample");
        records::json rec;
        rec["ones"] = s.features.ones();
        rec["label"] = kMalware;
        rec["source_index"] = s.source_index;
        rec["attack"] = s.attack;
        rec["flips"] = s.flips;
        rec["evaded"] = s.evaded;
        records::write(out, rec);
    }
}

AdversarialSet read_adversarial_set(std::istream &in) {
    records::Reader reader(in);
    const auto head = reader.next("adversarial set header");
    AdversarialSet set;
    set.n = reader.field<std::size_t>(head, "n");
    set.name = reader.field<std::string>(head, "name");
    if (set.n == 0) reader.fail("header needs a positive 'n'");
    while (true) {
        records::json rec;
        try {
            rec = reader.next("sample");
        } catch (const FormatError &e) {
            if (std::string(e.what()).find("unexpected end of file") != std::string::npos) break;
            throw;
        }
        AdversarialSample s;
        const auto ones = reader.field<std::vector<std::size_t>>(rec, "ones");
        for (std::size_t k = 0; k < ones.size(); ++k) {
            if (ones[k] >= set.n) reader.fail("bit index " + std::to_string(ones[k]) + " >= n=" + std::to_string(set.n));
            if (k > 0 && ones[k] <= ones[k - 1]) reader.fail("bit indices must be strictly ascending");
        }
        s.features = BitVector::from_ones(set.n, ones);
        if (reader.field<int>(rec, "label") != kMalware) reader.fail("adversarial samples must carry label 1");
        s.source_index = reader.field<std::size_t>(rec, "source_index");
        s.attack = reader.field<std::string>(rec, "attack");
        s.flips = reader.field<std::size_t>(rec, "flips");
        s.evaded = rec.contains("evaded") && rec.at("evaded").get<bool>();
        set.samples.push_back(std::move(s));
    }
    return set;
}

} // namespace hashtran
