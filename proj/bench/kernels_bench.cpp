// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <vector>

#include <benchmark/benchmark.h>

#include "hashtran/dataset.hpp"
#include "hashtran/hashing.hpp"
#include "hashtran/nn/kernels.hpp"
#include "hashtran/random.hpp"

using namespace hashtran;

namespace {

struct AffineCase {
    nn::Matrix x, w, b, y, dy, gw, gb, dx;

    AffineCase(std::size_t batch, std::size_t in, std::size_t out)
        : x(batch, in), w(in, out), b(1, out), y(batch, out), dy(batch, out), gw(in, out), gb(1, out), dx(batch, in) {
        auto rng = make_rng(7);
        std::uniform_real_distribution<double> u(-1, 1);
        std::bernoulli_distribution bit(0.05);
        for (auto &v : x.data) v = bit(rng) ? 1.0 : 0.0;
        for (auto &v : w.data) v = u(rng);
        for (auto &v : b.data) v = u(rng);
        for (auto &v : dy.data) v = u(rng);
    }
};

template <bool Parallel>
void BM_affine(benchmark::State &st) {
    AffineCase c(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::affine(nn::view(c.x), c.w.data.data(), c.b.data.data(), nn::view(c.y));
        else
            kernels::serial::affine(nn::view(c.x), c.w.data.data(), c.b.data.data(), nn::view(c.y));
        benchmark::DoNotOptimize(c.y.data.data());
    }
}

template <bool Parallel>
void BM_weight_grad(benchmark::State &st) {
    AffineCase c(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::accumulate_weight_grad(nn::view(c.x), nn::view(c.dy), c.gw.data.data(), c.gb.data.data());
        else
            kernels::serial::accumulate_weight_grad(nn::view(c.x), nn::view(c.dy), c.gw.data.data(),
                                                    c.gb.data.data());
        benchmark::DoNotOptimize(c.gw.data.data());
    }
}

template <bool Parallel>
void BM_input_grad(benchmark::State &st) {
    AffineCase c(st.range(0), st.range(1), st.range(2));
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::input_grad(nn::view(c.dy), c.w.data.data(), nn::view(c.dx));
        else
            kernels::serial::input_grad(nn::view(c.dy), c.w.data.data(), nn::view(c.dx));
        benchmark::DoNotOptimize(c.dx.data.data());
    }
}

const GeneratedData &bench_data() {
    static const GeneratedData d = generate_synthetic_dataset(default_generator_config(1024, 256, 3));
    return d;
}

std::vector<BitVector> bench_inputs() {
    std::vector<BitVector> xs;
    for (const auto &s : bench_data().dataset.samples) xs.push_back(s.features);
    return xs;
}

template <bool Parallel>
void BM_apply_lsh(benchmark::State &st) {
    const HashingTransform t = sample_lsh(1024, 64, 64, 11);
    const auto xs = bench_inputs();
    for (auto _ : st) {
        auto h = Parallel ? apply_batch(t, xs) : serial::apply_batch(t, xs);
        benchmark::DoNotOptimize(h.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(xs.size()));
}

template <bool Parallel>
void BM_apply_lnh(benchmark::State &st) {
    const HashingTransform t = build_lnh(bench_data().dataset, {16, 32, 32, 4}, 11);
    const auto xs = bench_inputs();
    for (auto _ : st) {
        auto h = Parallel ? apply_batch(t, xs) : serial::apply_batch(t, xs);
        benchmark::DoNotOptimize(h.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(xs.size()));
}

void shapes(benchmark::internal::Benchmark *b) {
    b->Args({128, 1024, 256})->Args({128, 256, 64})->Args({512, 1024, 256});
}

} // namespace

BENCHMARK(BM_affine<false>)->Name("affine/serial")->Apply(shapes);
BENCHMARK(BM_affine<true>)->Name("affine/parallel")->Apply(shapes);
BENCHMARK(BM_weight_grad<false>)->Name("weight_grad/serial")->Apply(shapes);
BENCHMARK(BM_weight_grad<true>)->Name("weight_grad/parallel")->Apply(shapes);
BENCHMARK(BM_input_grad<false>)->Name("input_grad/serial")->Apply(shapes);
BENCHMARK(BM_input_grad<true>)->Name("input_grad/parallel")->Apply(shapes);
BENCHMARK(BM_apply_lsh<false>)->Name("apply_lsh/serial");
BENCHMARK(BM_apply_lsh<true>)->Name("apply_lsh/parallel");
BENCHMARK(BM_apply_lnh<false>)->Name("apply_lnh/serial");
BENCHMARK(BM_apply_lnh<true>)->Name("apply_lnh/parallel");

BENCHMARK_MAIN();
