#include "cvkaf/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <type_traits>

namespace cvkaf {

std::string to_string(OutputHead head) {
    switch (head) {
    case OutputHead::Regression: return "regression";
    case OutputHead::MagnitudeSoftmax: return "magnitude_softmax";
    case OutputHead::RealSoftmax: return "real_softmax";
    }
    return "?";
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for_each_parameter(*this, [&](const std::string&, auto span, bool) { n += span.size(); });
    return n;
}

Network build_network(const NetworkSpec& spec, Rng& rng) {
    if (spec.input_dim == 0 || spec.output_dim == 0)
        throw std::invalid_argument("build_network: input and output extents must be positive");
    Network net;
    net.input_dim = spec.input_dim;
    net.head = spec.head;
    net.real_valued = spec.real_valued;

    std::shared_ptr<const KernelDictionary> dict;
    if (spec.hidden_activation == ActivationKind::SplitKAF)
        dict = std::make_shared<KernelDictionary>(build_dictionary_1d(spec.dict_size, spec.dict_lo, spec.dict_hi));
    else if (spec.hidden_activation == ActivationKind::ComplexKAF)
        dict = std::make_shared<KernelDictionary>(build_dictionary_2d(spec.dict_size, spec.dict_lo, spec.dict_hi));

    std::vector<std::size_t> widths{spec.input_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.output_dim);

    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        if (out == 0) throw std::invalid_argument("build_network: hidden layer of width 0");
        Layer layer;
        layer.weights = ComplexTensor({out, in});
        layer.bias = ComplexTensor({out});
        if (spec.real_valued) {
            const double sd = 1.0 / std::sqrt(static_cast<double>(in));
            for (auto& w : layer.weights.flat()) w = sd * rng.gaussian();
        } else {
            const double sigma = 1.0 / std::sqrt(2.0 * static_cast<double>(in));
            for (auto& w : layer.weights.flat()) {
                const double mag = sigma * std::sqrt(-2.0 * std::log1p(-rng.uniform()));
                const double phase = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
                w = std::polar(mag, phase);
            }
        }
        const bool last = l + 2 == widths.size();
        layer.activation = last ? Activation::fixed(ActivationKind::Identity)
                                : Activation::make(spec.hidden_activation, out, dict, spec.kernel, rng, spec.init);
        net.layers.push_back(std::move(layer));
    }
    validate(net);
    return net;
}

void validate(const Network& net) {
    if (net.layers.empty()) throw std::invalid_argument("network needs at least one layer");
    std::size_t in = net.input_dim;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        if (layer.weights.rank() != 2 || layer.inputs() != in)
            throw std::invalid_argument("layer " + std::to_string(l) + " expects " +
                                        std::to_string(layer.weights.rank() == 2 ? layer.inputs() : 0) +
                                        " inputs but receives " + std::to_string(in));
        if (layer.bias.size() != layer.outputs())
            throw std::invalid_argument("layer " + std::to_string(l) + " bias length mismatch");
        in = layer.outputs();
    }
    if (net.head != OutputHead::Regression && net.output_dim() < 2)
        throw std::invalid_argument("classification head needs at least 2 outputs");
}

GradientSet zero_gradients(const Network& net) {
    GradientSet g;
    for (const Layer& layer : net.layers)
        g.layers.push_back({ComplexTensor(layer.weights.shape()), ComplexTensor(layer.bias.shape()),
                            layer.activation.zero_grads()});
    return g;
}

ForwardCache forward(const Network& net, const ComplexTensor& X, Backend backend) {
    if (X.rank() != 2 || X.extent(1) != net.input_dim)
        throw std::invalid_argument("forward: batch must have " + std::to_string(net.input_dim) + " columns");
    ForwardCache cache;
    cache.inputs.reserve(net.layers.size());
    cache.preactivation.reserve(net.layers.size());
    ComplexTensor h = X;
    for (const Layer& layer : net.layers) {
        ComplexTensor s;
        compute::dense_forward(backend, layer.weights, layer.bias, h, s);
        ComplexTensor out;
        compute::activation_forward(backend, layer.activation, s, out);
        cache.inputs.push_back(std::move(h));
        cache.preactivation.push_back(std::move(s));
        h = std::move(out);
    }
    cache.output = std::move(h);
    return cache;
}

ComplexTensor predict(const Network& net, const ComplexTensor& X, Backend backend) {
    return forward(net, X, backend).output;
}

namespace {

// Softmax of class scores, and the exact -log p[label] via log-sum-exp.
struct SoftmaxResult {
    std::vector<double> p;
    double nll = 0.0;
};

SoftmaxResult softmax_of_scores(std::vector<double> score) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : score) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : score) sum += (v = std::exp(v - mx));
    SoftmaxResult r;
    r.p = std::move(score);
    for (auto& v : r.p) v /= sum;
    return r;
}

std::vector<double> scores(std::span<const cplx> h, bool magnitude) {
    std::vector<double> s(h.size());
    for (std::size_t c = 0; c < h.size(); ++c) s[c] = magnitude ? abs2(h[c]) : h[c].real();
    return s;
}

SoftmaxResult softmax_nll(std::span<const cplx> h, bool magnitude, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= h.size())
        throw std::out_of_range("label " + std::to_string(label) + " out of range");
    auto s = scores(h, magnitude);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : s) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : s) sum += std::exp(v - mx);
    const double nll = mx + std::log(sum) - s[static_cast<std::size_t>(label)];
    SoftmaxResult r = softmax_of_scores(std::move(s));
    r.nll = nll;
    return r;
}

} // namespace

std::vector<double> magnitude_softmax(std::span<const cplx> h) { return softmax_of_scores(scores(h, true)).p; }

std::vector<double> real_softmax(std::span<const cplx> h) { return softmax_of_scores(scores(h, false)).p; }

double cross_entropy(std::span<const double> p, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= p.size())
        throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range");
    return -std::log(std::max(p[static_cast<std::size_t>(label)], kProbabilityFloor));
}

LossAndDelta output_loss(const Network& net, const ComplexTensor& output, const Batch& batch) {
    const std::size_t n = output.extent(0), k = output.extent(1);
    if (n == 0) throw std::invalid_argument("output_loss: empty batch");
    LossAndDelta r{0.0, ComplexTensor({n, k})};
    const double inv = 1.0 / static_cast<double>(n);
    if (net.head == OutputHead::Regression) {
        if (batch.targets.rank() != 2 || batch.targets.extent(0) != n || batch.targets.extent(1) != k)
            throw std::invalid_argument("output_loss: target shape does not match network output");
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t c = 0; c < k; ++c) {
                const cplx e = output(s, c) - batch.targets(s, c);
                r.loss += abs2(e);
                r.delta(s, c) = e * inv;
            }
        }
        r.loss *= inv;
        return r;
    }
    if (batch.labels.size() != n) throw std::invalid_argument("output_loss: label count does not match batch");
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = output.row(s);
        const int label = batch.labels[s];
        // The loss is evaluated in log-sum-exp form rather than through the
        // clamped cross_entropy so that it stays differentiable everywhere.
        const bool magnitude = net.head == OutputHead::MagnitudeSoftmax;
        const auto sm = softmax_nll(row, magnitude, label);
        const auto& p = sm.p;
        r.loss += sm.nll;
        if (magnitude) {
            // dJ/d|h_c|^2 = p_c - t_c and d|h|^2/dh* = h.
            for (std::size_t c = 0; c < k; ++c)
                r.delta(s, c) = (p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * row[c] * inv;
        } else {
            for (std::size_t c = 0; c < k; ++c)
                r.delta(s, c) = 0.5 * (p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv;
        }
    }
    r.loss *= inv;
    return r;
}

GradientSet backward(const Network& net, const ForwardCache& cache, const ComplexTensor& output_delta,
                     Backend backend) {
    if (cache.inputs.size() != net.layers.size())
        throw std::invalid_argument("backward: cache does not belong to this network");
    GradientSet grads = zero_gradients(net);
    ComplexTensor delta = output_delta;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const Layer& layer = net.layers[l];
        LayerGrads& g = grads.layers[l];
        ComplexTensor d_pre;
        compute::activation_backward(backend, layer.activation, cache.preactivation[l], delta, d_pre, g.activation);
        ComplexTensor d_in;
        compute::dense_backward(backend, layer.weights, cache.inputs[l], d_pre, g.weights, g.bias,
                                l > 0 ? &d_in : nullptr);
        delta = std::move(d_in);
    }
    for_each_gradient(net, grads, [](const std::string& name, auto span, bool) {
        for (const auto& v : span) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, cplx>) {
                if (!is_finite(v)) throw NumericalError("non-finite gradient in " + name);
            } else {
                if (!std::isfinite(v)) throw NumericalError("non-finite gradient in " + name);
            }
        }
    });
    return grads;
}

double batch_loss(const Network& net, const Batch& batch, Backend backend) {
    return output_loss(net, predict(net, batch.inputs, backend), batch).loss;
}

double mse_db(std::span<const double> squared_errors) {
    if (squared_errors.empty()) throw std::invalid_argument("mse_db: no errors given");
    const double mean = std::accumulate(squared_errors.begin(), squared_errors.end(), 0.0) /
                        static_cast<double>(squared_errors.size());
    return 10.0 * std::log10(mean);
}

double r_squared(std::span<const cplx> y, std::span<const cplx> yhat) {
    if (y.size() != yhat.size() || y.size() < 2)
        throw std::invalid_argument("r_squared: need two equal-length series of at least 2 values");
    cplx mean = 0.0;
    for (auto v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) {
        num += abs2(y[n] - yhat[n]);
        den += abs2(y[n] - mean);
    }
    if (den <= 0.0) throw std::invalid_argument("r_squared: target is constant");
    return 1.0 - num / den;
}

double accuracy(const Network& net, const ComplexTensor& outputs, std::span<const int> labels) {
    const std::size_t n = outputs.extent(0);
    if (labels.size() != n || n == 0) throw std::invalid_argument("accuracy: label count mismatch");
    std::size_t correct = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = outputs.row(s);
        const auto p = net.head == OutputHead::RealSoftmax ? real_softmax(row) : magnitude_softmax(row);
        const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (best == labels[s]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace cvkaf
