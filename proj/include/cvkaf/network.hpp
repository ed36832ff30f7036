#pragma once

// Layered complex-valued networks h_l = g(W_l h_{l-1} + b_l), CR-calculus
// backpropagation, output losses and evaluation metrics.
//
// Backward pass convention: every delta is dJ/d(.)* for the real batch loss
// J. Through an activation with Wirtinger pair (d_z, d_z*) the input delta is
// conj(delta) d_z* + delta conj(d_z); through s = W h + b the gradients are
// dJ/dW* = delta_s h^H, dJ/db* = delta_s and dJ/dh* = W^H delta_s.

#include "cvkaf/activations.hpp"
#include "cvkaf/compute.hpp"
#include "cvkaf/core.hpp"
#include "cvkaf/kernels.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvkaf {

enum class OutputHead {
    Regression,       // mean squared error over complex outputs
    MagnitudeSoftmax, // softmax of |h_c|^2, cross-entropy
    RealSoftmax,      // ordinary softmax of Re h_c (real-valued baseline)
};

std::string to_string(OutputHead head);

struct Layer {
    ComplexTensor weights; // outputs x inputs
    ComplexTensor bias;    // outputs
    Activation activation;

    std::size_t inputs() const { return weights.extent(1); }
    std::size_t outputs() const { return weights.extent(0); }
};

struct Network {
    std::size_t input_dim = 0;
    std::vector<Layer> layers;
    OutputHead head = OutputHead::Regression;
    /// Real-valued baseline: weights, biases and activations stay real.
    bool real_valued = false;

    std::size_t output_dim() const { return layers.empty() ? input_dim : layers.back().outputs(); }
    /// Number of adaptable scalars (complex entries count once).
    std::size_t parameter_count() const;
};

struct NetworkSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 1;
    ActivationKind hidden_activation = ActivationKind::SplitTanh;
    OutputHead head = OutputHead::Regression;
    bool real_valued = false;
    KernelKind kernel = KernelKind::IndependentGaussian;
    int dict_size = 20;
    double dict_lo = -2.0;
    double dict_hi = 2.0;
    ActivationInit init;
};

/// Hidden layers use `hidden_activation`, the last layer is linear. Complex
/// weights get Rayleigh magnitudes (scale 1/sqrt(2 fan_in)) with uniform
/// phase; real-valued networks draw N(0, 1/fan_in). Biases start at zero.
Network build_network(const NetworkSpec& spec, Rng& rng);

/// Throws std::invalid_argument when consecutive layer extents do not chain.
void validate(const Network& net);

// Parameter traversal ---------------------------------------------------------

struct LayerGrads {
    ComplexTensor weights;
    ComplexTensor bias;
    ActivationGrads activation;
};

/// dJ/dW*, dJ/db* per layer plus activation parameter gradients.
struct GradientSet {
    std::vector<LayerGrads> layers;
};

GradientSet zero_gradients(const Network& net);

/// Visits every parameter block in a fixed order as
/// f(name, span, regularized), where span is std::span<(const) cplx> or
/// std::span<(const) double>. Biases and the modReLU radius are not
/// regularized.
template <typename Net, typename F>
void for_each_parameter(Net& net, F&& f) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        f(p + "weights", layer.weights.flat(), true);
        f(p + "bias", layer.bias.flat(), false);
        auto& ap = layer.activation.params();
        switch (layer.activation.kind()) {
        case ActivationKind::ModReLU: f(p + "modrelu_bias", std::span(ap.modrelu_bias), false); break;
        case ActivationKind::SplitKAF:
            f(p + "alpha_re", ap.alpha_re.flat(), true);
            f(p + "alpha_im", ap.alpha_im.flat(), true);
            f(p + "gamma", std::span(&ap.gamma, 1), true);
            break;
        case ActivationKind::ComplexKAF:
            f(p + "alpha", ap.alpha.flat(), true);
            f(p + "gamma", std::span(&ap.gamma, 1), true);
            break;
        default: break;
        }
    }
}

/// Same traversal order over a GradientSet congruent with `net`.
template <typename Grads, typename F>
void for_each_gradient(const Network& net, Grads& grads, F&& f) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& g = grads.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        f(p + "weights", g.weights.flat(), true);
        f(p + "bias", g.bias.flat(), false);
        auto& ag = g.activation;
        switch (net.layers[l].activation.kind()) {
        case ActivationKind::ModReLU: f(p + "modrelu_bias", std::span(ag.modrelu_bias), false); break;
        case ActivationKind::SplitKAF:
            f(p + "alpha_re", ag.alpha_re.flat(), true);
            f(p + "alpha_im", ag.alpha_im.flat(), true);
            f(p + "gamma", std::span(&ag.gamma, 1), true);
            break;
        case ActivationKind::ComplexKAF:
            f(p + "alpha", ag.alpha.flat(), true);
            f(p + "gamma", std::span(&ag.gamma, 1), true);
            break;
        default: break;
        }
    }
}

// Forward / backward ------------------------------------------------------------

struct ForwardCache {
    std::vector<ComplexTensor> inputs;       // h_{l-1} per layer
    std::vector<ComplexTensor> preactivation; // W_l h_{l-1} + b_l per layer
    ComplexTensor output;                    // h_L
};

ForwardCache forward(const Network& net, const ComplexTensor& X, Backend backend = Backend::Parallel);
ComplexTensor predict(const Network& net, const ComplexTensor& X, Backend backend = Backend::Parallel);

/// Supervised batch. Regression uses `targets` (batch x outputs);
/// classification uses `labels`.
struct Batch {
    ComplexTensor inputs;
    ComplexTensor targets;
    std::vector<int> labels;
};

struct LossAndDelta {
    double loss = 0.0;   // mean over the batch
    ComplexTensor delta; // dJ/d(output*), batch x outputs
};

LossAndDelta output_loss(const Network& net, const ComplexTensor& output, const Batch& batch);

/// Conjugate cogradients of the mean batch loss. Throws NumericalError on a
/// non-finite gradient.
GradientSet backward(const Network& net, const ForwardCache& cache, const ComplexTensor& output_delta,
                     Backend backend = Backend::Parallel);

/// Mean (unregularized) loss of `net` on `batch`.
double batch_loss(const Network& net, const Batch& batch, Backend backend = Backend::Parallel);

// Losses and metrics -------------------------------------------------------------

inline double squared_loss(cplx y, cplx yhat) { return abs2(y - yhat); }

/// p_c = exp(|h_c|^2) / sum_t exp(|h_t|^2), evaluated with max subtraction.
std::vector<double> magnitude_softmax(std::span<const cplx> h);
/// Ordinary softmax of Re h_c.
std::vector<double> real_softmax(std::span<const cplx> h);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log p[label], with p[label] clamped at 1e-12.
double cross_entropy(std::span<const double> p, int label);

/// 10 log10(mean of squared errors). Rejects an empty list.
double mse_db(std::span<const double> squared_errors);

/// 1 - sum |y - yhat|^2 / sum |y - mean(y)|^2. Rejects a constant target.
double r_squared(std::span<const cplx> y, std::span<const cplx> yhat);

/// Fraction of rows whose arg-max class probability matches the label.
double accuracy(const Network& net, const ComplexTensor& outputs, std::span<const int> labels);

} // namespace cvkaf
