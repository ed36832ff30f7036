#include "cvkaf/compute.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <stdexcept>

using namespace cvkaf;
namespace cs = cvkaf::compute;

namespace {

ComplexTensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    ComplexTensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * cplx(rng.gaussian(), rng.gaussian());
    return t;
}

Activation make(ActivationKind kind, std::size_t neurons, Rng& rng) {
    switch (kind) {
    case ActivationKind::SplitKAF:
        return Activation::split_kaf(neurons, std::make_shared<KernelDictionary>(build_dictionary_1d(20, -2, 2)), rng,
                                     0.3);
    case ActivationKind::ComplexKAF:
        return Activation::complex_kaf(neurons, std::make_shared<KernelDictionary>(build_dictionary_2d(8, -2, 2)),
                                       KernelKind::ComplexGaussian, rng, 0.3);
    default: return Activation::make(kind, neurons, nullptr, KernelKind::IndependentGaussian, rng, {});
    }
}

bool same(const ActivationGrads& a, const ActivationGrads& b) {
    return a.modrelu_bias == b.modrelu_bias && a.alpha_re == b.alpha_re && a.alpha_im == b.alpha_im &&
           a.alpha == b.alpha && a.gamma == b.gamma;
}

} // namespace

TEST(Compute, DenseSerialEqualsParallel) {
    Rng rng(3);
    for (auto [batch, out, in] : {std::tuple{1, 1, 1}, {40, 10, 5}, {7, 100, 100}, {33, 3, 64}}) {
        const auto W = random_matrix(out, in, rng), X = random_matrix(batch, in, rng), dS = random_matrix(batch, out, rng);
        auto b = ComplexTensor({std::size_t(out)});
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = cplx(rng.gaussian(), rng.gaussian());
        ComplexTensor s1, s2, gw1, gw2, gb1, gb2, dx1, dx2;
        cs::serial::dense_forward(W, b, X, s1);
        cs::parallel::dense_forward(W, b, X, s2);
        EXPECT_EQ(s1, s2);
        cs::serial::dense_backward(W, X, dS, gw1, gb1, &dx1);
        cs::parallel::dense_backward(W, X, dS, gw2, gb2, &dx2);
        EXPECT_EQ(gw1, gw2);
        EXPECT_EQ(gb1, gb2);
        EXPECT_EQ(dx1, dx2);
    }
}

TEST(Compute, DenseMatchesNaiveProduct) {
    Rng rng(4);
    const auto W = random_matrix(3, 4, rng), X = random_matrix(2, 4, rng), dS = random_matrix(2, 3, rng);
    ComplexTensor b({3}), S, gW, gb, dX;
    cs::parallel::dense_forward(W, b, X, S);
    cs::parallel::dense_backward(W, X, dS, gW, gb, &dX);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < 3; ++j) {
            cplx acc = 0;
            for (std::size_t k = 0; k < 4; ++k) acc += W(j, k) * X(s, k);
            EXPECT_LT(std::abs(S(s, j) - acc), 1e-13);
        }
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 4; ++k)
            EXPECT_LT(std::abs(gW(j, k) - (dS(0, j) * std::conj(X(0, k)) + dS(1, j) * std::conj(X(1, k)))), 1e-13);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t k = 0; k < 4; ++k) {
            cplx acc = 0;
            for (std::size_t j = 0; j < 3; ++j) acc += std::conj(W(j, k)) * dS(s, j);
            EXPECT_LT(std::abs(dX(s, k) - acc), 1e-13);
        }
    ComplexTensor bad = random_matrix(2, 5, rng);
    EXPECT_THROW(cs::parallel::dense_forward(W, b, bad, S), std::invalid_argument);
    EXPECT_THROW(cs::serial::dense_forward(W, b, bad, S), std::invalid_argument);
}

class ComputeActivation : public ::testing::TestWithParam<ActivationKind> {};

TEST_P(ComputeActivation, SerialEqualsParallel) {
    Rng rng(11);
    const std::size_t batch = 40, out = 17;
    const Activation act = make(GetParam(), out, rng);
    const auto S = random_matrix(batch, out, rng, 0.8), dH = random_matrix(batch, out, rng);
    ComplexTensor h1, h2, d1, d2;
    cs::serial::activation_forward(act, S, h1);
    cs::parallel::activation_forward(act, S, h2);
    EXPECT_EQ(h1, h2);
    auto g1 = act.zero_grads(), g2 = act.zero_grads();
    cs::serial::activation_backward(act, S, dH, d1, g1);
    cs::parallel::activation_backward(act, S, dH, d2, g2);
    EXPECT_EQ(d1, d2);
    EXPECT_TRUE(same(g1, g2));
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t j = 0; j < out; ++j) EXPECT_EQ(h1(s, j), act.value(j, S(s, j)));
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ComputeActivation, ::testing::ValuesIn(kAllActivationKinds),
                         [](const auto& info) { return to_string(info.param); });

TEST(Compute, DomainErrorLeavesParallelRegion) {
    Rng rng(1);
    const Activation act = make(ActivationKind::ComplexTanh, 4, rng);
    ComplexTensor S({8, 4}), H;
    S(5, 2) = cplx(0, 1.5707963267948966); // pole
    EXPECT_THROW(cs::parallel::activation_forward(act, S, H), DomainError);
    EXPECT_THROW(cs::serial::activation_forward(act, S, H), DomainError);
}
