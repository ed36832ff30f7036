#pragma once

// Batched layer kernels. `parallel` is the OpenMP implementation used in
// training; `serial` is the plain-loop reference kept for testing and
// benchmarking. Both accumulate every output entry in the same index order,
// so results do not depend on the number of threads.
//
// Shapes: X (batch x in), W (out x in), b (out), S/H (batch x out).

#include "cvkaf/activations.hpp"
#include "cvkaf/core.hpp"

namespace cvkaf {

enum class Backend { Serial, Parallel };

namespace compute {

namespace serial {

void dense_forward(const ComplexTensor& W, const ComplexTensor& b, const ComplexTensor& X, ComplexTensor& S);
void activation_forward(const Activation& act, const ComplexTensor& S, ComplexTensor& H);
/// dS = dJ/dS*, parameter gradients are added into `grads`.
void activation_backward(const Activation& act, const ComplexTensor& S, const ComplexTensor& dH,
                         ComplexTensor& dS, ActivationGrads& grads);
/// gW = dS^T conj(X), gb = column sums of dS, dX = dS conj(W) (skipped when null).
void dense_backward(const ComplexTensor& W, const ComplexTensor& X, const ComplexTensor& dS, ComplexTensor& gW,
                    ComplexTensor& gb, ComplexTensor* dX);

} // namespace serial

namespace parallel {

void dense_forward(const ComplexTensor& W, const ComplexTensor& b, const ComplexTensor& X, ComplexTensor& S);
void activation_forward(const Activation& act, const ComplexTensor& S, ComplexTensor& H);
void activation_backward(const Activation& act, const ComplexTensor& S, const ComplexTensor& dH,
                         ComplexTensor& dS, ActivationGrads& grads);
void dense_backward(const ComplexTensor& W, const ComplexTensor& X, const ComplexTensor& dS, ComplexTensor& gW,
                    ComplexTensor& gb, ComplexTensor* dX);

} // namespace parallel

inline void dense_forward(Backend be, const ComplexTensor& W, const ComplexTensor& b, const ComplexTensor& X,
                          ComplexTensor& S) {
    be == Backend::Serial ? serial::dense_forward(W, b, X, S) : parallel::dense_forward(W, b, X, S);
}
inline void activation_forward(Backend be, const Activation& act, const ComplexTensor& S, ComplexTensor& H) {
    be == Backend::Serial ? serial::activation_forward(act, S, H) : parallel::activation_forward(act, S, H);
}
inline void activation_backward(Backend be, const Activation& act, const ComplexTensor& S,
                                const ComplexTensor& dH, ComplexTensor& dS, ActivationGrads& grads) {
    be == Backend::Serial ? serial::activation_backward(act, S, dH, dS, grads)
                          : parallel::activation_backward(act, S, dH, dS, grads);
}
inline void dense_backward(Backend be, const ComplexTensor& W, const ComplexTensor& X, const ComplexTensor& dS,
                           ComplexTensor& gW, ComplexTensor& gb, ComplexTensor* dX) {
    be == Backend::Serial ? serial::dense_backward(W, X, dS, gW, gb, dX)
                          : parallel::dense_backward(W, X, dS, gW, gb, dX);
}

/// Threads the parallel kernels will use (1 without OpenMP).
int max_threads();

} // namespace compute
} // namespace cvkaf
