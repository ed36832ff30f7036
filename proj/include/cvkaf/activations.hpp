#pragma once

// Fixed complex activation functions and the two kernel activation
// functions (split and fully complex). Every activation exposes its value,
// its Wirtinger pair and, for adaptive ones, parameter gradients.

#include "cvkaf/core.hpp"
#include "cvkaf/kernels.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvkaf {

enum class ActivationKind {
    Identity,
    SplitTanh,
    SplitReLU,
    RealTanh,
    RealReLU,
    AMP,
    PATanh,
    ComplexTanh,
    CReLU,
    ModReLU,
    Cardioid,
    SplitKAF,
    ComplexKAF,
};

inline constexpr ActivationKind kAllActivationKinds[] = {
    ActivationKind::Identity,  ActivationKind::SplitTanh, ActivationKind::SplitReLU,
    ActivationKind::RealTanh,  ActivationKind::RealReLU,  ActivationKind::AMP,
    ActivationKind::PATanh,    ActivationKind::ComplexTanh, ActivationKind::CReLU,
    ActivationKind::ModReLU,   ActivationKind::Cardioid,  ActivationKind::SplitKAF,
    ActivationKind::ComplexKAF,
};

/// Config names: identity, split_tanh, split_relu, real_tanh, real_relu, amp,
/// pa_tanh, complex_tanh, crelu, modrelu, cardioid, split_kaf, complex_kaf.
ActivationKind parse_activation_kind(std::string_view name);
std::string to_string(ActivationKind kind);

// Scalar maps ----------------------------------------------------------------

template <typename RealFn>
cplx split_apply(RealFn&& g, cplx z) {
    return {g(z.real()), g(z.imag())};
}

/// z / (c + |z| / r).
cplx amp(cplx z, double c = 1.0, double r = 1.0);
/// tanh(|z| / m) exp(i phase(z)); 0 at z = 0.
cplx pa_tanh(cplx z, double m = 1.0);
/// Holomorphic tanh. Throws DomainError within 1e-6 of a pole i (n + 1/2) pi.
cplx complex_tanh(cplx z);
/// z on the closed first quadrant, 0 elsewhere.
cplx crelu(cplx z);
/// ReLU(|z| + b) exp(i phase(z)); 0 at z = 0.
cplx modrelu(cplx z, double b);
/// (1 + cos phase(z)) z / 2; 0 at z = 0.
cplx cardioid(cplx z);

inline constexpr double kComplexTanhGuard = 1e-6;

/// Sum_n aR_n k(Re z, d_n) + i Sum_n aI_n k(Im z, d_n) with the real Gaussian.
cplx split_kaf_forward(cplx z, std::span<const double> alpha_re, std::span<const double> alpha_im,
                       const KernelDictionary& dict, double gamma);
inline cplx split_kaf_forward(cplx z, std::span<const double> alpha_re,
                              std::span<const double> alpha_im, const KernelDictionary& dict) {
    return split_kaf_forward(z, alpha_re, alpha_im, dict, dict.gamma);
}

/// Sum_{n,m} alpha[n*D+m] k(z, d_n + i d_m) over a two-dimensional dictionary.
cplx complex_kaf_forward(cplx z, std::span<const cplx> alpha, const KernelDictionary& dict,
                         KernelKind kind, double gamma);
inline cplx complex_kaf_forward(cplx z, std::span<const cplx> alpha, const KernelDictionary& dict,
                                KernelKind kind) {
    return complex_kaf_forward(z, alpha, dict, kind, dict.gamma);
}

// Layer-level activation -----------------------------------------------------

/// Adaptive parameters of one layer's activation. Only the members relevant
/// to the kind are populated.
struct ActivationParams {
    std::vector<double> modrelu_bias;            // N
    RealTensor alpha_re;                         // N x D   (split KAF)
    RealTensor alpha_im;                         // N x D   (split KAF)
    ComplexTensor alpha;                         // N x D x D (complex KAF)
    double gamma = 0.0;                          // per layer, KAF only
    std::shared_ptr<const KernelDictionary> dict; // shared across the network
    KernelKind kernel = KernelKind::IndependentGaussian;
};

/// Gradients congruent with ActivationParams: real gradients for real
/// parameters, conjugate cogradients for the complex mixing coefficients.
struct ActivationGrads {
    std::vector<double> modrelu_bias;
    RealTensor alpha_re;
    RealTensor alpha_im;
    ComplexTensor alpha;
    double gamma = 0.0;
};

inline constexpr double kGammaFloor = 1e-3;

struct ActivationInit {
    double modrelu_bias = 0.1;
    /// Std of split-KAF coefficients; the complex KAF uses kaf_init_std / D
    /// for both real and imaginary parts.
    double kaf_init_std = 0.3;
};

class Activation {
  public:
    Activation() = default;

    /// Fixed activation (no parameters). Rejects ModReLU and the KAFs.
    static Activation fixed(ActivationKind kind);
    static Activation modrelu(std::size_t neurons, double initial_bias);
    static Activation split_kaf(std::size_t neurons, std::shared_ptr<const KernelDictionary> dict,
                                Rng& rng, double init_std);
    static Activation complex_kaf(std::size_t neurons, std::shared_ptr<const KernelDictionary> dict,
                                  KernelKind kernel, Rng& rng, double init_std);
    /// Dispatching factory used by network construction.
    static Activation make(ActivationKind kind, std::size_t neurons,
                           std::shared_ptr<const KernelDictionary> dict, KernelKind kernel, Rng& rng,
                           const ActivationInit& init);

    ActivationKind kind() const noexcept { return kind_; }
    std::size_t neurons() const noexcept { return neurons_; }
    ActivationParams& params() noexcept { return params_; }
    const ActivationParams& params() const noexcept { return params_; }
    bool has_parameters() const noexcept;

    cplx value(std::size_t neuron, cplx z) const;
    WirtingerPair wirtinger(std::size_t neuron, cplx z) const;

    struct BackwardResult {
        cplx delta_pre;    // dJ/dz* for the activation input
        double gamma_grad; // contribution to dJ/dgamma (KAF only)
    };

    /// Given delta = dJ/d(output*) for `neuron`, returns dJ/dz* and adds this
    /// sample's parameter gradients into the neuron's rows of `grads`
    /// (gamma is returned rather than accumulated so neurons can run in
    /// parallel).
    BackwardResult backward(std::size_t neuron, cplx z, cplx delta, ActivationGrads& grads) const;

    ActivationGrads zero_grads() const;

  private:
    Activation(ActivationKind kind, std::size_t neurons) : kind_(kind), neurons_(neurons) {}

    ActivationKind kind_ = ActivationKind::Identity;
    std::size_t neurons_ = 0;
    ActivationParams params_;
};

/// Wirtinger pair of `act` for `neuron` at z.
inline WirtingerPair activation_wirtinger(const Activation& act, std::size_t neuron, cplx z) {
    return act.wirtinger(neuron, z);
}

/// Parameter gradient increments for a single (neuron, input, upstream delta)
/// triple; every other neuron's entries stay zero.
ActivationGrads activation_param_grads(const Activation& act, std::size_t neuron, cplx z, cplx delta);

} // namespace cvkaf
