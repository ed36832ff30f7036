#include "cvkaf/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace cvkaf {

KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "real_gaussian") return KernelKind::RealGaussian;
    if (name == "complex_gaussian") return KernelKind::ComplexGaussian;
    if (name == "independent") return KernelKind::IndependentGaussian;
    if (name == "szego") return KernelKind::Szego;
    throw std::invalid_argument("unknown kernel '" + std::string(name) +
                                "' (expected real_gaussian, complex_gaussian, independent or szego)");
}

std::string to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::RealGaussian: return "real_gaussian";
    case KernelKind::ComplexGaussian: return "complex_gaussian";
    case KernelKind::IndependentGaussian: return "independent";
    case KernelKind::Szego: return "szego";
    }
    return "?";
}

ComplexTensor KernelDictionary::elements() const {
    const std::size_t d = size();
    if (!two_dimensional) {
        ComplexTensor out({d});
        for (std::size_t n = 0; n < d; ++n) out[n] = axis[n];
        return out;
    }
    ComplexTensor out({d * d});
    for (std::size_t n = 0; n < d; ++n)
        for (std::size_t m = 0; m < d; ++m) out[n * d + m] = element(n, m);
    return out;
}

double bandwidth_rule(double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("bandwidth_rule: grid spacing must be positive");
    return 1.0 / (6.0 * delta * delta);
}

KernelDictionary build_dictionary_1d(int size, double lo, double hi) {
    if (size < 2) throw std::invalid_argument("dictionary size must be at least 2, got " + std::to_string(size));
    if (!(lo < hi)) throw std::invalid_argument("dictionary range must satisfy lo < hi");
    KernelDictionary dict;
    dict.spacing = (hi - lo) / static_cast<double>(size - 1);
    dict.axis.resize(static_cast<std::size_t>(size));
    for (int n = 0; n < size; ++n) dict.axis[static_cast<std::size_t>(n)] = lo + n * dict.spacing;
    dict.axis.back() = hi;
    dict.gamma = bandwidth_rule(dict.spacing);
    return dict;
}

KernelDictionary build_dictionary_2d(int size, double lo, double hi) {
    KernelDictionary dict = build_dictionary_1d(size, lo, hi);
    dict.two_dimensional = true;
    return dict;
}

cplx szego_kernel(cplx z, cplx d) {
    if (abs2(z) >= 1.0 || abs2(d) >= 1.0)
        throw DomainError("szego kernel: arguments must lie in the open unit disk");
    const cplx den = 1.0 - z * std::conj(d);
    if (std::abs(den) < 1e-9) throw DomainError("szego kernel: 1 - z conj(d) is numerically zero");
    return 1.0 / (den * den);
}

cplx kernel_value(KernelKind kind, cplx z, cplx d, double gamma) {
    switch (kind) {
    case KernelKind::RealGaussian:
        if (z.imag() != 0.0 || d.imag() != 0.0)
            throw DomainError("real gaussian kernel: arguments must be real");
        return real_gaussian(z.real(), d.real(), gamma);
    case KernelKind::ComplexGaussian: return complex_gaussian(z, d, gamma);
    case KernelKind::IndependentGaussian: return independent_kernel(z, d, gamma);
    case KernelKind::Szego: return szego_kernel(z, d);
    }
    throw std::logic_error("kernel_value: bad kind");
}

KernelDerivative kernel_derivative(KernelKind kind, cplx z, cplx d, double gamma) {
    switch (kind) {
    case KernelKind::RealGaussian: {
        const double t = z.real() - d.real();
        const double k = real_gaussian(z.real(), d.real(), gamma);
        // Depends on Re z only: dk/da = -2 gamma t k, dk/db = 0.
        const double da = -2.0 * gamma * t * k;
        return {k, {0.5 * da, 0.5 * da}, -t * t * k};
    }
    case KernelKind::ComplexGaussian: {
        const cplx t = z - std::conj(d);
        const cplx k = std::exp(-gamma * t * t);
        return {k, {-2.0 * gamma * t * k, 0.0}, -t * t * k};
    }
    case KernelKind::IndependentGaussian: {
        const double zr = z.real(), zi = z.imag(), dr = d.real(), di = d.imag();
        const double k_rr = real_gaussian(zr, dr, gamma), k_ii = real_gaussian(zi, di, gamma);
        const double k_ri = real_gaussian(zr, di, gamma), k_ir = real_gaussian(zi, dr, gamma);
        const cplx df_da(-2.0 * gamma * (zr - dr) * k_rr, -2.0 * gamma * (zr - di) * k_ri);
        const cplx df_db(-2.0 * gamma * (zi - di) * k_ii, 2.0 * gamma * (zi - dr) * k_ir);
        auto sq = [](double x) { return x * x; };
        const cplx dg(-sq(zr - dr) * k_rr - sq(zi - di) * k_ii,
                      -sq(zr - di) * k_ri + sq(zi - dr) * k_ir);
        return {cplx(k_rr + k_ii, k_ri - k_ir), wirtinger_from_real_partials(df_da, df_db), dg};
    }
    case KernelKind::Szego: {
        const cplx k = szego_kernel(z, d);
        const cplx dc = std::conj(d);
        const cplx den = 1.0 - z * dc;
        return {k, {2.0 * dc / (den * den * den), 0.0}, 0.0};
    }
    }
    throw std::logic_error("kernel_derivative: bad kind");
}

ComplexTensor gram_matrix(KernelKind kind, const ComplexTensor& points, double gamma) {
    const std::size_t m = points.size();
    ComplexTensor g({m, m});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) g(r, c) = kernel_value(kind, points[r], points[c], gamma);
    return g;
}

} // namespace cvkaf
