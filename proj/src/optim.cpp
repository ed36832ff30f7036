#include "cvkaf/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace cvkaf {

namespace {

template <typename T>
constexpr bool is_complex_v = std::is_same_v<std::remove_const_t<T>, cplx>;

void clamp_gamma(Network& net) {
    for (auto& layer : net.layers) {
        auto k = layer.activation.kind();
        if (k == ActivationKind::SplitKAF || k == ActivationKind::ComplexKAF) {
            auto& g = layer.activation.params().gamma;
            if (g < kGammaFloor) g = kGammaFloor;
        }
    }
}

// Flattened views of the gradient blocks in traversal order.
struct GradViews {
    std::vector<std::span<const cplx>> complex_blocks;
    std::vector<std::span<const double>> real_blocks;
    std::vector<bool> is_complex;
};

GradViews collect(const Network& net, const GradientSet& grads) {
    GradViews v;
    for_each_gradient(net, grads, [&](const std::string&, auto span, bool) {
        using T = typename decltype(span)::element_type;
        if constexpr (is_complex_v<T>) {
            v.complex_blocks.emplace_back(span);
            v.is_complex.push_back(true);
        } else {
            v.real_blocks.emplace_back(span);
            v.is_complex.push_back(false);
        }
    });
    return v;
}

} // namespace

Adagrad::Adagrad(const Network& net, AdagradConfig cfg) : cfg_(cfg) {
    if (!(cfg.lr > 0.0) || !(cfg.eps >= 0.0)) throw std::invalid_argument("Adagrad: need lr > 0 and eps >= 0");
    for_each_parameter(net, [&](const std::string&, auto span, bool) { acc_.emplace_back(span.size(), 0.0); });
}

void Adagrad::step(Network& net, const GradientSet& grads) {
    const GradViews gv = collect(net, grads);
    if (gv.is_complex.size() != acc_.size()) throw std::invalid_argument("Adagrad: gradient set does not match");

    // Compute all updates first so a non-finite value leaves the network intact.
    std::vector<std::vector<cplx>> dc;
    std::vector<std::vector<double>> dr;
    std::vector<std::vector<double>> acc = acc_;
    std::size_t ci = 0, ri = 0;
    for (std::size_t b = 0; b < acc.size(); ++b) {
        auto& G = acc[b];
        if (gv.is_complex[b]) {
            auto g = gv.complex_blocks[ci++];
            if (g.size() != G.size()) throw std::invalid_argument("Adagrad: block size mismatch");
            std::vector<cplx> d(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                cplx gi = net.real_valued ? cplx(g[i].real(), 0.0) : g[i];
                G[i] += abs2(gi);
                d[i] = gi == 0.0 ? cplx{} : cfg_.lr * gi / (std::sqrt(G[i]) + cfg_.eps);
                if (!is_finite(d[i])) throw NumericalError("Adagrad: non-finite update");
            }
            dc.push_back(std::move(d));
        } else {
            auto g = gv.real_blocks[ri++];
            if (g.size() != G.size()) throw std::invalid_argument("Adagrad: block size mismatch");
            std::vector<double> d(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                G[i] += g[i] * g[i];
                d[i] = g[i] == 0.0 ? 0.0 : cfg_.lr * g[i] / (std::sqrt(G[i]) + cfg_.eps);
                if (!std::isfinite(d[i])) throw NumericalError("Adagrad: non-finite update");
            }
            dr.push_back(std::move(d));
        }
    }

    ci = ri = 0;
    for_each_parameter(net, [&](const std::string& name, auto span, bool) {
        using T = typename decltype(span)::element_type;
        if constexpr (is_complex_v<T>) {
            const auto& d = dc[ci++];
            for (std::size_t i = 0; i < span.size(); ++i) {
                span[i] -= d[i];
                if (!is_finite(span[i])) throw NumericalError("Adagrad: non-finite parameter in " + name);
            }
        } else {
            const auto& d = dr[ri++];
            for (std::size_t i = 0; i < span.size(); ++i) {
                span[i] -= d[i];
                if (!std::isfinite(span[i])) throw NumericalError("Adagrad: non-finite parameter in " + name);
            }
        }
    });
    acc_ = std::move(acc);
    clamp_gamma(net);
    ++steps_;
}

double regularization_penalty(const Network& net) {
    double sum = 0.0;
    for_each_parameter(net, [&](const std::string&, auto span, bool regularized) {
        if (!regularized) return;
        using T = typename decltype(span)::element_type;
        for (const auto& v : span) {
            if constexpr (is_complex_v<T>)
                sum += abs2(v);
            else
                sum += v * v;
        }
    });
    return sum;
}

void add_regularization_gradient(const Network& net, GradientSet& grads, double lambda) {
    if (lambda == 0.0) return;
    std::vector<std::span<const cplx>> pc;
    std::vector<std::span<const double>> pr;
    std::vector<bool> reg;
    for_each_parameter(net, [&](const std::string&, auto span, bool regularized) {
        using T = typename decltype(span)::element_type;
        if constexpr (is_complex_v<T>)
            pc.emplace_back(span);
        else
            pr.emplace_back(span);
        reg.push_back(regularized);
    });
    std::size_t ci = 0, ri = 0, b = 0;
    for_each_gradient(net, grads, [&](const std::string&, auto span, bool) {
        using T = typename decltype(span)::element_type;
        const bool r = reg[b++];
        if constexpr (is_complex_v<T>) {
            auto p = pc[ci++];
            if (r)
                for (std::size_t i = 0; i < span.size(); ++i) span[i] += lambda * p[i];
        } else {
            auto p = pr[ri++];
            if (r)
                for (std::size_t i = 0; i < span.size(); ++i) span[i] += 2.0 * lambda * p[i];
        }
    });
}

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t size) {
    if (n == 0) throw std::invalid_argument("sample_indices: empty dataset");
    std::vector<std::size_t> idx(size);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(n));
    return idx;
}

Batch gather(const Batch& data, std::span<const std::size_t> idx) {
    Batch b;
    const std::size_t n = data.inputs.extent(0), in = data.inputs.extent(1);
    b.inputs = ComplexTensor({idx.size(), in});
    const bool has_targets = data.targets.rank() == 2 && data.targets.extent(0) == n;
    const std::size_t out = has_targets ? data.targets.extent(1) : 0;
    if (has_targets) b.targets = ComplexTensor({idx.size(), out});
    if (!data.labels.empty()) b.labels.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t s = idx[r];
        if (s >= n) throw std::out_of_range("gather: index " + std::to_string(s) + " out of range");
        std::copy_n(data.inputs.data() + s * in, in, b.inputs.data() + r * in);
        if (has_targets) std::copy_n(data.targets.data() + s * out, out, b.targets.data() + r * out);
        if (!data.labels.empty()) b.labels[r] = data.labels.at(s);
    }
    return b;
}

TrainResult train(Network& net, const Batch& data, const TrainConfig& cfg, Rng& rng) {
    if (cfg.lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
    TrainResult result;
    result.loss_curve.reserve(cfg.iterations);
    Adagrad opt(net, cfg.adagrad);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const Batch batch = sample_minibatch(rng, data, cfg.batch_size);
        const ForwardCache cache = forward(net, batch.inputs, cfg.backend);
        LossAndDelta ld = output_loss(net, cache.output, batch);
        const double loss = regularized_loss(net, ld.loss, cfg.lambda);
        if (!std::isfinite(loss))
            throw NumericalError("training diverged: non-finite loss at iteration " + std::to_string(it));
        result.loss_curve.push_back(loss);
        GradientSet grads = backward(net, cache, ld.delta, cfg.backend);
        add_regularization_gradient(net, grads, cfg.lambda);
        opt.step(net, grads);
    }
    return result;
}

} // namespace cvkaf
