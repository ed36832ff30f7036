// Serial reference vs OpenMP kernels on MNIST-sized layers.
//   cvkaf_bench --benchmark_filter=Dense

#include "cvkaf/compute.hpp"
#include "cvkaf/network.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace cvkaf;

namespace {

ComplexTensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    ComplexTensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = cplx(rng.gaussian(), rng.gaussian());
    return t;
}

Backend backend(const benchmark::State& s) { return s.range(0) ? Backend::Parallel : Backend::Serial; }

void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "openmp" : "serial"); }

// 40 x 100 input through a 100 x 100 layer
void BM_DenseForward(benchmark::State& s) {
    const auto W = random_matrix(100, 100, 1), X = random_matrix(40, 100, 2);
    ComplexTensor b({100}), S;
    for (auto _ : s) {
        compute::dense_forward(backend(s), W, b, X, S);
        benchmark::DoNotOptimize(S.data());
    }
    label(s);
}

void BM_DenseBackward(benchmark::State& s) {
    const auto W = random_matrix(100, 100, 1), X = random_matrix(40, 100, 2), dS = random_matrix(40, 100, 3);
    ComplexTensor gW, gb, dX;
    for (auto _ : s) {
        compute::dense_backward(backend(s), W, X, dS, gW, gb, &dX);
        benchmark::DoNotOptimize(dX.data());
    }
    label(s);
}

Activation make_activation(ActivationKind kind) {
    Rng rng(4);
    if (kind == ActivationKind::SplitKAF)
        return Activation::split_kaf(100, std::make_shared<KernelDictionary>(build_dictionary_1d(20, -2, 2)), rng, 0.3);
    if (kind == ActivationKind::ComplexKAF)
        return Activation::complex_kaf(100, std::make_shared<KernelDictionary>(build_dictionary_2d(8, -2, 2)),
                                       KernelKind::IndependentGaussian, rng, 0.3);
    return Activation::make(kind, 100, nullptr, KernelKind::IndependentGaussian, rng, {});
}

template <ActivationKind Kind>
void BM_ActivationForward(benchmark::State& s) {
    const Activation act = make_activation(Kind);
    const auto S = random_matrix(40, 100, 5);
    ComplexTensor H;
    for (auto _ : s) {
        compute::activation_forward(backend(s), act, S, H);
        benchmark::DoNotOptimize(H.data());
    }
    label(s);
}

template <ActivationKind Kind>
void BM_ActivationBackward(benchmark::State& s) {
    const Activation act = make_activation(Kind);
    const auto S = random_matrix(40, 100, 5), dH = random_matrix(40, 100, 6);
    ComplexTensor dS;
    for (auto _ : s) {
        auto grads = act.zero_grads();
        compute::activation_backward(backend(s), act, S, dH, dS, grads);
        benchmark::DoNotOptimize(dS.data());
    }
    label(s);
}

// one forward and backward pass of the MNIST kaf_split network
void BM_TrainStep(benchmark::State& s) {
    NetworkSpec spec;
    spec.input_dim = 100;
    spec.hidden = {100, 100, 100};
    spec.output_dim = 10;
    spec.hidden_activation = ActivationKind::SplitKAF;
    spec.head = OutputHead::MagnitudeSoftmax;
    Rng rng(7);
    const Network net = build_network(spec, rng);
    Batch batch{random_matrix(40, 100, 8), {}, std::vector<int>(40)};
    for (std::size_t i = 0; i < 40; ++i) batch.labels[i] = int(i % 10);
    for (auto _ : s) {
        const auto cache = forward(net, batch.inputs, backend(s));
        const auto out = output_loss(net, cache.output, batch);
        auto g = backward(net, cache, out.delta, backend(s));
        benchmark::DoNotOptimize(g);
    }
    label(s);
}

} // namespace

BENCHMARK(BM_DenseForward)->Arg(0)->Arg(1);
BENCHMARK(BM_DenseBackward)->Arg(0)->Arg(1);
BENCHMARK(BM_ActivationForward<ActivationKind::SplitKAF>)->Arg(0)->Arg(1);
BENCHMARK(BM_ActivationForward<ActivationKind::ComplexKAF>)->Arg(0)->Arg(1);
BENCHMARK(BM_ActivationForward<ActivationKind::Cardioid>)->Arg(0)->Arg(1);
BENCHMARK(BM_ActivationBackward<ActivationKind::SplitKAF>)->Arg(0)->Arg(1);
BENCHMARK(BM_ActivationBackward<ActivationKind::ComplexKAF>)->Arg(0)->Arg(1);
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
