#pragma once

#include "cvkaf/core.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace cvkaf {

enum class KernelKind { RealGaussian, ComplexGaussian, IndependentGaussian, Szego };

/// Config spelling: "real_gaussian", "complex_gaussian", "independent", "szego".
KernelKind parse_kernel_kind(std::string_view name);
std::string to_string(KernelKind kind);

/// Fixed grid of kernel centres. The axis is always stored; a two-dimensional
/// dictionary is the Cartesian square of the axis, element (n, m) being
/// axis[n] + i axis[m] at flat index n * size + m.
struct KernelDictionary {
    std::vector<double> axis;
    double spacing = 0.0;
    double gamma = 0.0;
    bool two_dimensional = false;

    std::size_t size() const noexcept { return axis.size(); }
    /// D entries for a 1-D dictionary, D*D for a 2-D one.
    std::size_t element_count() const noexcept { return two_dimensional ? size() * size() : size(); }
    cplx element(std::size_t n, std::size_t m) const { return {axis.at(n), axis.at(m)}; }
    ComplexTensor elements() const;
};

/// gamma = 1 / (6 delta^2).
double bandwidth_rule(double delta);

KernelDictionary build_dictionary_1d(int size, double lo, double hi);
KernelDictionary build_dictionary_2d(int size, double lo, double hi);

// Kernel evaluations --------------------------------------------------------

inline double real_gaussian(double s, double d, double gamma) {
    const double t = s - d;
    return std::exp(-gamma * t * t);
}

/// exp(-gamma (z - conj(d))^2). Holomorphic in z.
inline cplx complex_gaussian(cplx z, cplx d, double gamma) {
    const cplx t = z - std::conj(d);
    return std::exp(-gamma * t * t);
}

/// k(zr, dr) + k(zi, di) + i (k(zr, di) - k(zi, dr)) with the real Gaussian k.
inline cplx independent_kernel(cplx z, cplx d, double gamma) {
    return {real_gaussian(z.real(), d.real(), gamma) + real_gaussian(z.imag(), d.imag(), gamma),
            real_gaussian(z.real(), d.imag(), gamma) - real_gaussian(z.imag(), d.real(), gamma)};
}

/// 1 / (1 - z conj(d))^2 on the open unit disk. Throws DomainError outside it
/// or when |1 - z conj(d)| < 1e-9.
cplx szego_kernel(cplx z, cplx d);

/// Dispatch on kind. For RealGaussian both arguments must be real.
cplx kernel_value(KernelKind kind, cplx z, cplx d, double gamma);

/// Derivatives of a kernel with respect to its first argument and to gamma.
struct KernelDerivative {
    cplx value;
    WirtingerPair wrt_z;
    cplx wrt_gamma;
};

KernelDerivative kernel_derivative(KernelKind kind, cplx z, cplx d, double gamma);

/// M x M matrix G[n][m] = k(points[n], points[m]).
ComplexTensor gram_matrix(KernelKind kind, const ComplexTensor& points, double gamma);

} // namespace cvkaf
