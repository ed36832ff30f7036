#include "cvkaf/activations.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvkaf {

namespace {

constexpr std::array<std::pair<ActivationKind, std::string_view>, 13> kNames{{
    {ActivationKind::Identity, "identity"},
    {ActivationKind::SplitTanh, "split_tanh"},
    {ActivationKind::SplitReLU, "split_relu"},
    {ActivationKind::RealTanh, "real_tanh"},
    {ActivationKind::RealReLU, "real_relu"},
    {ActivationKind::AMP, "amp"},
    {ActivationKind::PATanh, "pa_tanh"},
    {ActivationKind::ComplexTanh, "complex_tanh"},
    {ActivationKind::CReLU, "crelu"},
    {ActivationKind::ModReLU, "modrelu"},
    {ActivationKind::Cardioid, "cardioid"},
    {ActivationKind::SplitKAF, "split_kaf"},
    {ActivationKind::ComplexKAF, "complex_kaf"},
}};

double relu(double x) { return x > 0.0 ? x : 0.0; }
double relu_prime(double x) { return x > 0.0 ? 1.0 : 0.0; }
double sech2(double x) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

WirtingerPair split_pair(double ga, double gb) { return {0.5 * (ga + gb), 0.5 * (ga - gb)}; }

// Phase-amplitude maps g(z) = u(|z|) z have d_z = u + u'(r) r / 2 and
// d_z* = u'(r) z^2 / (2 r).
WirtingerPair radial_pair(cplx z, double r, double u, double du) {
    return {u + 0.5 * du * r, du * z * z / (2.0 * r)};
}

WirtingerPair amp_pair(cplx z) {
    const double r = std::abs(z);
    const double u = 1.0 / (1.0 + r);
    if (r == 0.0) return {1.0, 0.0};
    return radial_pair(z, r, u, -u * u);
}

WirtingerPair pa_tanh_pair(cplx z) {
    const double r = std::abs(z);
    if (r == 0.0) return {1.0, 0.0};
    const double t = std::tanh(r);
    const double u = t / r;
    const double du = (1.0 - t * t) / r - t / (r * r);
    return radial_pair(z, r, u, du);
}

WirtingerPair modrelu_pair(cplx z, double b) {
    const double r = std::abs(z);
    if (r == 0.0 || r + b <= 0.0) return {0.0, 0.0};
    return {1.0 + b / (2.0 * r), -b * z * z / (2.0 * r * r * r)};
}

// g = z/2 + (z^2 + z z*) / (4 r).
WirtingerPair cardioid_pair(cplx z) {
    const double r = std::abs(z);
    if (r == 0.0) return {0.5, 0.0};
    const cplx zc = std::conj(z);
    const cplx w = z * z + z * zc;
    const double r3 = r * r * r;
    const cplx dw_dz = (2.0 * z + zc) / r - w * zc / (2.0 * r3);
    const cplx dw_dzc = z / r - w * z / (2.0 * r3);
    return {0.5 + 0.25 * dw_dz, 0.25 * dw_dzc};
}

void check_tanh_domain(cplx z) {
    const double n = std::round(z.imag() / std::numbers::pi - 0.5);
    const cplx pole(0.0, (n + 0.5) * std::numbers::pi);
    if (std::abs(z - pole) < kComplexTanhGuard)
        throw DomainError("complex_tanh: input within 1e-6 of the pole at i*" + std::to_string(pole.imag()));
}

// Split-KAF terms for one neuron. The kernel row and its derivatives are
// recomputed on demand; D is small.
struct SplitKafTerms {
    cplx value{};
    double g_re_prime = 0.0; // d/da of the real branch
    double g_im_prime = 0.0; // d/db of the imaginary branch
    cplx d_gamma{};
};

template <typename OnKernel>
SplitKafTerms split_kaf_terms(cplx z, const double* a_re, const double* a_im, const KernelDictionary& dict,
                              double gamma, OnKernel&& on_kernel) {
    SplitKafTerms t;
    const double a = z.real(), b = z.imag();
    double vr = 0.0, vi = 0.0, gr_gamma = 0.0, gi_gamma = 0.0;
    for (std::size_t n = 0; n < dict.size(); ++n) {
        const double da = a - dict.axis[n];
        const double db = b - dict.axis[n];
        const double ka = std::exp(-gamma * da * da);
        const double kb = std::exp(-gamma * db * db);
        vr += a_re[n] * ka;
        vi += a_im[n] * kb;
        t.g_re_prime += a_re[n] * (-2.0 * gamma * da * ka);
        t.g_im_prime += a_im[n] * (-2.0 * gamma * db * kb);
        gr_gamma += a_re[n] * (-da * da * ka);
        gi_gamma += a_im[n] * (-db * db * kb);
        on_kernel(n, ka, kb);
    }
    t.value = {vr, vi};
    t.d_gamma = {gr_gamma, gi_gamma};
    return t;
}

struct ComplexKafTerms {
    cplx value{};
    cplx df_da{}; // used by the independent kernel (non-holomorphic)
    cplx df_db{};
    WirtingerPair pair{};
    cplx d_gamma{};
};

template <typename OnKernel>
ComplexKafTerms complex_kaf_terms(cplx z, const cplx* alpha, const KernelDictionary& dict, KernelKind kind,
                                  double gamma, OnKernel&& on_kernel) {
    ComplexKafTerms t;
    const std::size_t d = dict.size();
    if (kind == KernelKind::IndependentGaussian) {
        // k(z, d_n + i d_m) = ka[n] + kb[m] + i (ka[m] - kb[n]) with ka, kb the
        // real Gaussian rows of Re z and Im z.
        constexpr std::size_t kMax = 64;
        if (d > kMax) throw std::invalid_argument("complex KAF: dictionary size above 64 not supported");
        double ka[kMax], kb[kMax], dka[kMax], dkb[kMax], gka[kMax], gkb[kMax];
        const double a = z.real(), b = z.imag();
        for (std::size_t n = 0; n < d; ++n) {
            const double ta = a - dict.axis[n], tb = b - dict.axis[n];
            ka[n] = std::exp(-gamma * ta * ta);
            kb[n] = std::exp(-gamma * tb * tb);
            dka[n] = -2.0 * gamma * ta * ka[n];
            dkb[n] = -2.0 * gamma * tb * kb[n];
            gka[n] = -ta * ta * ka[n];
            gkb[n] = -tb * tb * kb[n];
        }
        for (std::size_t n = 0; n < d; ++n) {
            for (std::size_t m = 0; m < d; ++m) {
                const cplx al = alpha[n * d + m];
                const cplx k(ka[n] + kb[m], ka[m] - kb[n]);
                t.value += al * k;
                t.df_da += al * cplx(dka[n], dka[m]);
                t.df_db += al * cplx(dkb[m], -dkb[n]);
                t.d_gamma += al * cplx(gka[n] + gkb[m], gka[m] - gkb[n]);
                on_kernel(n * d + m, k);
            }
        }
        t.pair = wirtinger_from_real_partials(t.df_da, t.df_db);
        return t;
    }
    for (std::size_t n = 0; n < d; ++n) {
        for (std::size_t m = 0; m < d; ++m) {
            const cplx al = alpha[n * d + m];
            const KernelDerivative kd = kernel_derivative(kind, z, dict.element(n, m), gamma);
            t.value += al * kd.value;
            t.pair.d_z += al * kd.wrt_z.d_z;
            t.pair.d_zstar += al * kd.wrt_z.d_zstar;
            t.d_gamma += al * kd.wrt_gamma;
            on_kernel(n * d + m, kd.value);
        }
    }
    return t;
}

constexpr auto kNoKernelSink = [](auto&&...) {};

} // namespace

ActivationKind parse_activation_kind(std::string_view name) {
    for (const auto& [kind, n] : kNames)
        if (n == name) return kind;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string to_string(ActivationKind kind) {
    for (const auto& [k, n] : kNames)
        if (k == kind) return std::string(n);
    return "?";
}

cplx amp(cplx z, double c, double r) { return z / (c + std::abs(z) / r); }

cplx pa_tanh(cplx z, double m) {
    const double r = std::abs(z);
    if (r == 0.0) return 0.0;
    return std::tanh(r / m) * (z / r);
}

cplx complex_tanh(cplx z) {
    check_tanh_domain(z);
    return std::tanh(z);
}

cplx crelu(cplx z) { return (z.real() >= 0.0 && z.imag() >= 0.0) ? z : cplx(0.0); }

cplx modrelu(cplx z, double b) {
    const double r = std::abs(z);
    if (r == 0.0) return 0.0;
    const double mag = relu(r + b);
    return mag == 0.0 ? cplx(0.0) : mag * (z / r);
}

cplx cardioid(cplx z) {
    const double r = std::abs(z);
    if (r == 0.0) return 0.0;
    return 0.5 * (1.0 + z.real() / r) * z;
}

cplx split_kaf_forward(cplx z, std::span<const double> alpha_re, std::span<const double> alpha_im,
                       const KernelDictionary& dict, double gamma) {
    if (dict.two_dimensional) throw std::invalid_argument("split KAF needs a one-dimensional dictionary");
    if (alpha_re.size() != dict.size() || alpha_im.size() != dict.size())
        throw std::invalid_argument("split KAF: coefficient length must equal the dictionary size");
    return split_kaf_terms(z, alpha_re.data(), alpha_im.data(), dict, gamma, kNoKernelSink).value;
}

cplx complex_kaf_forward(cplx z, std::span<const cplx> alpha, const KernelDictionary& dict, KernelKind kind,
                         double gamma) {
    if (!dict.two_dimensional) throw std::invalid_argument("complex KAF needs a two-dimensional dictionary");
    if (alpha.size() != dict.element_count())
        throw std::invalid_argument("complex KAF: coefficient count must be D*D");
    return complex_kaf_terms(z, alpha.data(), dict, kind, gamma, kNoKernelSink).value;
}

// ---------------------------------------------------------------------------
// Activation
// ---------------------------------------------------------------------------

Activation Activation::fixed(ActivationKind kind) {
    if (kind == ActivationKind::ModReLU || kind == ActivationKind::SplitKAF || kind == ActivationKind::ComplexKAF)
        throw std::invalid_argument("Activation::fixed: " + to_string(kind) + " has parameters");
    return Activation(kind, 0);
}

Activation Activation::modrelu(std::size_t neurons, double initial_bias) {
    Activation a(ActivationKind::ModReLU, neurons);
    a.params_.modrelu_bias.assign(neurons, initial_bias);
    return a;
}

Activation Activation::split_kaf(std::size_t neurons, std::shared_ptr<const KernelDictionary> dict, Rng& rng,
                                 double init_std) {
    if (!dict || dict->two_dimensional) throw std::invalid_argument("split KAF needs a one-dimensional dictionary");
    Activation a(ActivationKind::SplitKAF, neurons);
    const std::size_t d = dict->size();
    a.params_.alpha_re = RealTensor({neurons, d});
    a.params_.alpha_im = RealTensor({neurons, d});
    for (auto& v : a.params_.alpha_re.flat()) v = init_std * rng.gaussian();
    for (auto& v : a.params_.alpha_im.flat()) v = init_std * rng.gaussian();
    a.params_.gamma = dict->gamma;
    a.params_.kernel = KernelKind::RealGaussian;
    a.params_.dict = std::move(dict);
    return a;
}

Activation Activation::complex_kaf(std::size_t neurons, std::shared_ptr<const KernelDictionary> dict,
                                   KernelKind kernel, Rng& rng, double init_std) {
    if (!dict || !dict->two_dimensional)
        throw std::invalid_argument("complex KAF needs a two-dimensional dictionary");
    if (kernel == KernelKind::RealGaussian)
        throw std::invalid_argument("complex KAF needs a complex kernel");
    Activation a(ActivationKind::ComplexKAF, neurons);
    const std::size_t d = dict->size();
    const double s = init_std / static_cast<double>(d);
    a.params_.alpha = ComplexTensor({neurons, d, d});
    for (auto& v : a.params_.alpha.flat()) {
        const double re = rng.gaussian();
        v = s * cplx(re, rng.gaussian());
    }
    a.params_.gamma = dict->gamma;
    a.params_.kernel = kernel;
    a.params_.dict = std::move(dict);
    return a;
}

Activation Activation::make(ActivationKind kind, std::size_t neurons, std::shared_ptr<const KernelDictionary> dict,
                            KernelKind kernel, Rng& rng, const ActivationInit& init) {
    switch (kind) {
    case ActivationKind::ModReLU: return modrelu(neurons, init.modrelu_bias);
    case ActivationKind::SplitKAF: return split_kaf(neurons, std::move(dict), rng, init.kaf_init_std);
    case ActivationKind::ComplexKAF: return complex_kaf(neurons, std::move(dict), kernel, rng, init.kaf_init_std);
    default: {
        Activation a = fixed(kind);
        a.neurons_ = neurons;
        return a;
    }
    }
}

bool Activation::has_parameters() const noexcept {
    return kind_ == ActivationKind::ModReLU || kind_ == ActivationKind::SplitKAF ||
           kind_ == ActivationKind::ComplexKAF;
}

cplx Activation::value(std::size_t neuron, cplx z) const {
    switch (kind_) {
    case ActivationKind::Identity: return z;
    case ActivationKind::SplitTanh: return split_apply([](double x) { return std::tanh(x); }, z);
    case ActivationKind::SplitReLU: return split_apply(relu, z);
    case ActivationKind::RealTanh: return std::tanh(z.real());
    case ActivationKind::RealReLU: return relu(z.real());
    case ActivationKind::AMP: return amp(z);
    case ActivationKind::PATanh: return pa_tanh(z);
    case ActivationKind::ComplexTanh: return complex_tanh(z);
    case ActivationKind::CReLU: return crelu(z);
    case ActivationKind::ModReLU: return cvkaf::modrelu(z, params_.modrelu_bias[neuron]);
    case ActivationKind::Cardioid: return cardioid(z);
    case ActivationKind::SplitKAF: {
        const std::size_t d = params_.dict->size();
        return split_kaf_terms(z, params_.alpha_re.data() + neuron * d, params_.alpha_im.data() + neuron * d,
                               *params_.dict, params_.gamma, kNoKernelSink)
            .value;
    }
    case ActivationKind::ComplexKAF: {
        const std::size_t dd = params_.dict->element_count();
        return complex_kaf_terms(z, params_.alpha.data() + neuron * dd, *params_.dict, params_.kernel,
                                 params_.gamma, kNoKernelSink)
            .value;
    }
    }
    throw std::logic_error("Activation::value: bad kind");
}

WirtingerPair Activation::wirtinger(std::size_t neuron, cplx z) const {
    switch (kind_) {
    case ActivationKind::Identity: return {1.0, 0.0};
    case ActivationKind::SplitTanh: return split_pair(sech2(z.real()), sech2(z.imag()));
    case ActivationKind::SplitReLU: return split_pair(relu_prime(z.real()), relu_prime(z.imag()));
    case ActivationKind::RealTanh: {
        const double g = 0.5 * sech2(z.real());
        return {g, g};
    }
    case ActivationKind::RealReLU: {
        const double g = 0.5 * relu_prime(z.real());
        return {g, g};
    }
    case ActivationKind::AMP: return amp_pair(z);
    case ActivationKind::PATanh: return pa_tanh_pair(z);
    case ActivationKind::ComplexTanh: {
        check_tanh_domain(z);
        const cplx t = std::tanh(z);
        return {1.0 - t * t, 0.0};
    }
    case ActivationKind::CReLU:
        return (z.real() > 0.0 && z.imag() > 0.0) ? WirtingerPair{1.0, 0.0} : WirtingerPair{0.0, 0.0};
    case ActivationKind::ModReLU: return modrelu_pair(z, params_.modrelu_bias[neuron]);
    case ActivationKind::Cardioid: return cardioid_pair(z);
    case ActivationKind::SplitKAF: {
        const std::size_t d = params_.dict->size();
        const auto t = split_kaf_terms(z, params_.alpha_re.data() + neuron * d,
                                       params_.alpha_im.data() + neuron * d, *params_.dict, params_.gamma,
                                       kNoKernelSink);
        return split_pair(t.g_re_prime, t.g_im_prime);
    }
    case ActivationKind::ComplexKAF: {
        const std::size_t dd = params_.dict->element_count();
        return complex_kaf_terms(z, params_.alpha.data() + neuron * dd, *params_.dict, params_.kernel,
                                 params_.gamma, kNoKernelSink)
            .pair;
    }
    }
    throw std::logic_error("Activation::wirtinger: bad kind");
}

ActivationGrads Activation::zero_grads() const {
    ActivationGrads g;
    g.modrelu_bias.assign(params_.modrelu_bias.size(), 0.0);
    g.alpha_re = RealTensor(params_.alpha_re.shape());
    g.alpha_im = RealTensor(params_.alpha_im.shape());
    g.alpha = ComplexTensor(params_.alpha.shape());
    return g;
}

Activation::BackwardResult Activation::backward(std::size_t neuron, cplx z, cplx delta,
                                                ActivationGrads& grads) const {
    auto chain = [&](const WirtingerPair& p) { return std::conj(delta) * p.d_zstar + delta * std::conj(p.d_z); };
    // dJ/dp = 2 Re{conj(delta) do/dp} for a real parameter p.
    auto real_param = [&](cplx do_dp) { return 2.0 * (std::conj(delta) * do_dp).real(); };

    switch (kind_) {
    case ActivationKind::ModReLU: {
        const double b = params_.modrelu_bias[neuron];
        const double r = std::abs(z);
        if (r > 0.0 && r + b > 0.0) grads.modrelu_bias[neuron] += real_param(z / r);
        return {chain(modrelu_pair(z, b)), 0.0};
    }
    case ActivationKind::SplitKAF: {
        const std::size_t d = params_.dict->size();
        double* g_re = grads.alpha_re.data() + neuron * d;
        double* g_im = grads.alpha_im.data() + neuron * d;
        const double re_d = 2.0 * delta.real();
        const double im_d = 2.0 * delta.imag();
        const auto t = split_kaf_terms(z, params_.alpha_re.data() + neuron * d,
                                       params_.alpha_im.data() + neuron * d, *params_.dict, params_.gamma,
                                       [&](std::size_t n, double ka, double kb) {
                                           g_re[n] += re_d * ka; // do/daR = k(a, d_n)
                                           g_im[n] += im_d * kb; // do/daI = i k(b, d_n)
                                       });
        return {chain(split_pair(t.g_re_prime, t.g_im_prime)), real_param(t.d_gamma)};
    }
    case ActivationKind::ComplexKAF: {
        const std::size_t dd = params_.dict->element_count();
        cplx* g = grads.alpha.data() + neuron * dd;
        const auto t = complex_kaf_terms(z, params_.alpha.data() + neuron * dd, *params_.dict, params_.kernel,
                                         params_.gamma,
                                         [&](std::size_t idx, cplx k) { g[idx] += delta * std::conj(k); });
        return {chain(t.pair), real_param(t.d_gamma)};
    }
    default: return {chain(wirtinger(neuron, z)), 0.0};
    }
}

ActivationGrads activation_param_grads(const Activation& act, std::size_t neuron, cplx z, cplx delta) {
    ActivationGrads g = act.zero_grads();
    g.gamma = act.backward(neuron, z, delta, g).gamma_grad;
    return g;
}

} // namespace cvkaf
