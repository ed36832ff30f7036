#include "cvkaf/optim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace cvkaf;

namespace {

Network scalar_net(cplx w) {
    Network net;
    net.input_dim = 1;
    Layer l;
    l.weights = ComplexTensor({1, 1}, std::vector<cplx>{w});
    l.bias = ComplexTensor({1});
    l.activation = Activation::fixed(ActivationKind::Identity);
    net.layers.push_back(std::move(l));
    return net;
}

Network kind_net(ActivationKind kind, std::uint64_t seed, bool real = false) {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden = {4};
    spec.output_dim = 1;
    spec.hidden_activation = kind;
    spec.dict_size = 6;
    spec.real_valued = real;
    Rng r(seed);
    return build_network(spec, r);
}

Batch random_batch(Rng& r, std::size_t n, std::size_t in, bool real = false) {
    Batch b;
    b.inputs = ComplexTensor({n, in});
    b.targets = ComplexTensor({n, 1});
    for (auto& v : b.inputs.flat()) v = cplx(2 * r.uniform() - 1, real ? 0.0 : 2 * r.uniform() - 1);
    for (auto& v : b.targets.flat()) v = cplx(2 * r.uniform() - 1, real ? 0.0 : 2 * r.uniform() - 1);
    return b;
}

std::vector<double> flatten(const Network& net) {
    std::vector<double> v;
    for_each_parameter(net, [&](const std::string&, auto span, bool) {
        for (auto x : span) {
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, cplx>) {
                v.push_back(x.real());
                v.push_back(x.imag());
            } else {
                v.push_back(x);
            }
        }
    });
    return v;
}

} // namespace

TEST(Regularizer, Examples) {
    Network net = scalar_net(cplx(1, 1));
    EXPECT_EQ(regularized_loss(net, 0.7, 0.0), 0.7);
    EXPECT_DOUBLE_EQ(regularized_loss(net, 0.0, 1.0), 2.0);
    // biases are exempt
    Network b = scalar_net(0.0);
    b.layers[0].bias[0] = cplx(3, 4);
    EXPECT_EQ(regularized_loss(b, 0.0, 5.0), 0.0);
    // modReLU radius exempt, KAF coefficients and gamma are not
    Network m = kind_net(ActivationKind::ModReLU, 1);
    double weights = 0;
    for (const auto& l : m.layers)
        for (cplx w : l.weights.flat()) weights += abs2(w);
    EXPECT_NEAR(regularization_penalty(m), weights, 1e-12);
    Network k = kind_net(ActivationKind::SplitKAF, 1);
    double expect = 0;
    for (const auto& l : k.layers) {
        for (cplx w : l.weights.flat()) expect += abs2(w);
        const auto& p = l.activation.params();
        for (double a : p.alpha_re.flat()) expect += a * a;
        for (double a : p.alpha_im.flat()) expect += a * a;
        if (l.activation.kind() == ActivationKind::SplitKAF) expect += p.gamma * p.gamma;
    }
    EXPECT_NEAR(regularization_penalty(k), expect, 1e-10);
}

TEST(Regularizer, GradientMatchesFiniteDifferences) {
    const double lambda = 0.37;
    for (auto kind : {ActivationKind::SplitKAF, ActivationKind::ComplexKAF, ActivationKind::ModReLU}) {
        Network net = kind_net(kind, 2);
        for (auto& l : net.layers)
            for (auto& b : l.bias.flat()) b = cplx(0.3, -0.2);
        GradientSet g = zero_gradients(net);
        add_regularization_gradient(net, g, lambda);
        // analytic blocks in traversal order
        std::vector<std::vector<cplx>> an_c;
        std::vector<std::vector<double>> an_r;
        for_each_gradient(net, g, [&](const std::string&, auto span, bool) {
            if constexpr (std::is_same_v<std::decay_t<decltype(span[0])>, cplx>)
                an_c.emplace_back(span.begin(), span.end());
            else
                an_r.emplace_back(span.begin(), span.end());
        });
        std::size_t ic = 0, ir = 0;
        const double h = 1e-6;
        Network probe = net;
        for_each_parameter(probe, [&](const std::string& name, auto span, bool) {
            using T = std::decay_t<decltype(span[0])>;
            for (std::size_t k = 0; k < span.size(); ++k) {
                const T o = span[k];
                if constexpr (std::is_same_v<T, cplx>) {
                    span[k] = o + h;
                    const double ap = lambda * regularization_penalty(probe);
                    span[k] = o - h;
                    const double am = lambda * regularization_penalty(probe);
                    span[k] = o + cplx(0, h);
                    const double bp = lambda * regularization_penalty(probe);
                    span[k] = o - cplx(0, h);
                    const double bm = lambda * regularization_penalty(probe);
                    span[k] = o;
                    const cplx fd = 0.5 * cplx((ap - am) / (2 * h), (bp - bm) / (2 * h));
                    EXPECT_LE(std::abs(an_c[ic][k] - fd), 1e-6) << name;
                } else {
                    span[k] = o + h;
                    const double p = lambda * regularization_penalty(probe);
                    span[k] = o - h;
                    const double m = lambda * regularization_penalty(probe);
                    span[k] = o;
                    EXPECT_LE(std::abs(an_r[ir][k] - (p - m) / (2 * h)), 1e-6) << name;
                }
            }
            if constexpr (std::is_same_v<std::decay_t<decltype(span[0])>, cplx>)
                ++ic;
            else
                ++ir;
        });
        // complex weights: exactly lambda w
        EXPECT_EQ(g.layers[0].weights[0], lambda * net.layers[0].weights[0]);
        EXPECT_EQ(g.layers[0].bias[0], cplx(0));
    }
}

TEST(Adagrad, FirstStepUnitGradient) {
    Network net = scalar_net(0.0);
    Adagrad opt(net, {1.0, 0.0});
    GradientSet g = zero_gradients(net);
    g.layers[0].weights[0] = 1.0;
    opt.step(net, g);
    EXPECT_EQ(net.layers[0].weights[0], cplx(-1.0));
    EXPECT_EQ(opt.accumulators()[0][0], 1.0);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adagrad, SecondStepShrinks) {
    Network net = scalar_net(0.0);
    const double mu = 0.3;
    Adagrad opt(net, {mu, 0.0});
    GradientSet g = zero_gradients(net);
    g.layers[0].weights[0] = 1.0;
    opt.step(net, g);
    const cplx after1 = net.layers[0].weights[0];
    opt.step(net, g);
    EXPECT_NEAR(std::abs(net.layers[0].weights[0] - after1), mu / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(net.layers[0].weights[0] - after1) / mu, 0.70711, 1e-5);
}

TEST(Adagrad, ComplexGradientUsesSquaredMagnitude) {
    Network net = scalar_net(0.0);
    Adagrad opt(net, {1.0, 0.0});
    GradientSet g = zero_gradients(net);
    g.layers[0].weights[0] = cplx(3, 4);
    opt.step(net, g);
    EXPECT_EQ(opt.accumulators()[0][0], 25.0);
    EXPECT_NEAR(std::abs(net.layers[0].weights[0] - cplx(-0.6, -0.8)), 0, 1e-15);
}

TEST(Adagrad, ZeroGradientChangesNothing) {
    Network net = kind_net(ActivationKind::SplitKAF, 3);
    const auto before = flatten(net);
    Adagrad opt(net);
    opt.step(net, zero_gradients(net));
    EXPECT_EQ(flatten(net), before);
    for (const auto& block : opt.accumulators())
        for (double a : block) EXPECT_EQ(a, 0.0);
}

TEST(Adagrad, AccumulatorsMonotoneAndStepsDecay) {
    Network net = kind_net(ActivationKind::ComplexKAF, 4);
    Adagrad opt(net, {0.01, 1e-8});
    Rng r(5);
    std::vector<std::vector<double>> prev = opt.accumulators();
    for (int it = 0; it < 20; ++it) {
        const Batch b = random_batch(r, 8, 3);
        const auto cache = forward(net, b.inputs);
        const auto g = backward(net, cache, output_loss(net, cache.output, b).delta);
        opt.step(net, g);
        const auto& acc = opt.accumulators();
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::size_t k = 0; k < acc[i].size(); ++k) ASSERT_GE(acc[i][k], prev[i][k]);
        prev = acc;
    }
    // constant gradient magnitude: update sizes never grow
    Network s = scalar_net(0.0);
    Adagrad o2(s, {0.5, 1e-8});
    GradientSet g = zero_gradients(s);
    double last = 1e9;
    for (int it = 0; it < 50; ++it) {
        g.layers[0].weights[0] = std::polar(2.0, 0.3 * it);
        const cplx before = s.layers[0].weights[0];
        o2.step(s, g);
        const double step = std::abs(s.layers[0].weights[0] - before);
        EXPECT_LE(step, last);
        last = step;
    }
}

TEST(Adagrad, ExemptParametersStayFixedUnderRegularization) {
    Network net = kind_net(ActivationKind::ModReLU, 6);
    for (auto& l : net.layers)
        for (auto& b : l.bias.flat()) b = cplx(0.5, 0.5);
    GradientSet g = zero_gradients(net);
    add_regularization_gradient(net, g, 0.1);
    const Network before = net;
    Adagrad opt(net, {0.01, 1e-8});
    opt.step(net, g);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        EXPECT_EQ(net.layers[l].bias, before.layers[l].bias);
        EXPECT_EQ(net.layers[l].activation.params().modrelu_bias,
                  before.layers[l].activation.params().modrelu_bias);
        EXPECT_NE(net.layers[l].weights, before.layers[l].weights);
    }
}

TEST(Adagrad, GammaIsClamped) {
    Network net = kind_net(ActivationKind::SplitKAF, 7);
    net.layers[0].activation.params().gamma = 0.002;
    GradientSet g = zero_gradients(net);
    g.layers[0].activation.gamma = 1.0;
    Adagrad opt(net, {0.5, 0.0});
    opt.step(net, g);
    EXPECT_EQ(net.layers[0].activation.params().gamma, kGammaFloor);
}

TEST(Adagrad, RealValuedNetworkStaysReal) {
    Network net = kind_net(ActivationKind::RealTanh, 8, true);
    Rng r(9);
    GradientSet g = zero_gradients(net);
    for (auto& l : g.layers) {
        for (auto& v : l.weights.flat()) v = cplx(r.gaussian(), r.gaussian());
        for (auto& v : l.bias.flat()) v = cplx(r.gaussian(), r.gaussian());
    }
    Adagrad opt(net);
    opt.step(net, g);
    for (const auto& l : net.layers) {
        for (cplx v : l.weights.flat()) EXPECT_EQ(v.imag(), 0.0);
        for (cplx v : l.bias.flat()) EXPECT_EQ(v.imag(), 0.0);
    }
}

TEST(Adagrad, NonFiniteUpdateLeavesNetworkUntouched) {
    Network net = kind_net(ActivationKind::SplitTanh, 10);
    const auto before = flatten(net);
    GradientSet g = zero_gradients(net);
    g.layers[0].weights[0] = cplx(1, 0);
    g.layers[1].weights[0] = cplx(std::nan(""), 0);
    Adagrad opt(net);
    EXPECT_THROW(opt.step(net, g), NumericalError);
    EXPECT_EQ(flatten(net), before);
}

TEST(Adagrad, OneSmallStepDecreasesBatchLoss) {
    for (auto kind : kAllActivationKinds) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const bool real = kind == ActivationKind::RealTanh || kind == ActivationKind::RealReLU;
            Network net = kind_net(kind, 20 + seed, real);
            Rng r(30 + seed);
            const Batch b = random_batch(r, 10, 3, real);
            const double lambda = 1e-4;
            const auto cache = forward(net, b.inputs);
            auto g = backward(net, cache, output_loss(net, cache.output, b).delta);
            add_regularization_gradient(net, g, lambda);
            const double before = regularized_loss(net, batch_loss(net, b), lambda);
            Adagrad opt(net, {1e-4, 1e-8});
            opt.step(net, g);
            const double after = regularized_loss(net, batch_loss(net, b), lambda);
            EXPECT_LT(after, before) << to_string(kind) << " seed " << seed;
        }
    }
}

TEST(Minibatch, SingleSampleIsRepeated) {
    Batch data;
    data.inputs = ComplexTensor({1, 2}, std::vector<cplx>{cplx(1, 2), cplx(3, 4)});
    data.targets = ComplexTensor({1, 1}, std::vector<cplx>{cplx(5, 6)});
    Rng r(1);
    const Batch b = sample_minibatch(r, data);
    ASSERT_EQ(b.inputs.extent(0), 40u);
    for (std::size_t i = 0; i < 40; ++i) {
        EXPECT_EQ(b.inputs(i, 1), cplx(3, 4));
        EXPECT_EQ(b.targets(i, 0), cplx(5, 6));
    }
}

TEST(Minibatch, DeterministicAndCovering) {
    Rng a(42), b(42);
    EXPECT_EQ(sample_indices(a, 100, 40), sample_indices(b, 100, 40));
    Rng c(43);
    std::set<std::size_t> seen;
    for (int i = 0; i < 10000; ++i)
        for (auto k : sample_indices(c, 100, 1)) {
            ASSERT_LT(k, 100u);
            seen.insert(k);
        }
    EXPECT_EQ(seen.size(), 100u);
    EXPECT_THROW(sample_indices(c, 0, 5), std::invalid_argument);
}

TEST(Minibatch, GatherKeepsLabels) {
    Batch data;
    data.inputs = ComplexTensor({3, 1}, std::vector<cplx>{1.0, 2.0, 3.0});
    data.labels = {7, 8, 9};
    const std::vector<std::size_t> idx{2, 0, 2};
    const Batch b = gather(data, idx);
    EXPECT_EQ(b.labels, (std::vector<int>{9, 7, 9}));
    EXPECT_EQ(b.inputs[1], cplx(1.0));
}

TEST(Train, ZeroIterationsChangeNothing) {
    Network net = kind_net(ActivationKind::SplitKAF, 11);
    const auto before = flatten(net);
    Rng r(12);
    const Batch data = random_batch(r, 20, 3);
    TrainConfig cfg;
    cfg.iterations = 0;
    const auto res = train(net, data, cfg, r);
    EXPECT_TRUE(res.loss_curve.empty());
    EXPECT_EQ(flatten(net), before);
}

TEST(Train, LinearDataReachesLeastSquares) {
    // y = A x + c exactly; the closed-form least-squares fit is the oracle
    Rng r(13);
    const std::size_t n = 400, d = 3;
    const std::vector<cplx> a{cplx(0.5, -0.3), cplx(-0.2, 0.8), cplx(0.1, 0.1)};
    const cplx c(0.2, -0.1);
    Batch data;
    data.inputs = ComplexTensor({n, d});
    data.targets = ComplexTensor({n, 1});
    std::vector<cplx> design(n * (d + 1)), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx t = c;
        for (std::size_t k = 0; k < d; ++k) {
            const cplx x(2 * r.uniform() - 1, 2 * r.uniform() - 1);
            data.inputs(i, k) = x;
            design[i * (d + 1) + k] = x;
            t += a[k] * x;
        }
        design[i * (d + 1) + d] = 1.0;
        data.targets(i, 0) = t;
        y[i] = t;
    }
    const auto ls = oracle::least_squares(design, y, int(n), int(d + 1));
    double ls_mse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cplx p = 0;
        for (std::size_t k = 0; k <= d; ++k) p += design[i * (d + 1) + k] * ls[k];
        ls_mse += abs2(p - y[i]);
    }
    ls_mse /= double(n);
    EXPECT_LT(ls_mse, 1e-20);

    NetworkSpec spec;
    spec.input_dim = d;
    spec.output_dim = 1;
    Rng init(14);
    Network net = build_network(spec, init);
    TrainConfig cfg;
    cfg.iterations = 5000;
    cfg.lambda = 0.0;
    cfg.adagrad.lr = 0.05;
    Rng sampler(15);
    train(net, data, cfg, sampler);
    const double mse = batch_loss(net, data);
    EXPECT_LT(mse, 1e-3);
    for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(std::abs(net.layers[0].weights[k] - ls[k]), 0.0, 0.05);
    EXPECT_NEAR(std::abs(net.layers[0].bias[0] - ls[d]), 0.0, 0.05);
}

TEST(Train, DeterministicUnderSeed) {
    Rng r(16);
    const Batch data = random_batch(r, 60, 3);
    auto run = [&] {
        Network net = kind_net(ActivationKind::ComplexKAF, 17);
        TrainConfig cfg;
        cfg.iterations = 50;
        Rng s(18);
        const auto res = train(net, data, cfg, s);
        return std::make_pair(flatten(net), res.loss_curve);
    };
    EXPECT_EQ(run(), run());
}

TEST(Train, NonFiniteLossAborts) {
    Network net = kind_net(ActivationKind::SplitTanh, 19);
    Rng r(20);
    Batch data = random_batch(r, 5, 3);
    data.targets[2] = cplx(std::numeric_limits<double>::infinity(), 0);
    TrainConfig cfg;
    cfg.iterations = 100;
    cfg.batch_size = 40;
    try {
        train(net, data, cfg, r);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
    }
}
