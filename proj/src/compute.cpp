#include "cvkaf/compute.hpp"

#include <exception>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cvkaf::compute {

namespace {

void check_dense(const ComplexTensor& W, const ComplexTensor& X) {
    if (W.rank() != 2 || X.rank() != 2 || W.extent(1) != X.extent(1))
        throw std::invalid_argument("dense layer: input width " + std::to_string(X.rank() == 2 ? X.extent(1) : 0) +
                                    " does not match weight columns");
}

// Exceptions must not leave an OpenMP region; the first one is kept and
// rethrown after the loop.
class FirstError {
  public:
    void capture() {
#pragma omp critical(cvkaf_first_error)
        if (!error_) error_ = std::current_exception();
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

  private:
    std::exception_ptr error_;
};

void prepare(ComplexTensor& t, std::size_t rows, std::size_t cols) {
    if (t.rank() != 2 || t.extent(0) != rows || t.extent(1) != cols) t = ComplexTensor({rows, cols});
}

} // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void dense_forward(const ComplexTensor& W, const ComplexTensor& b, const ComplexTensor& X, ComplexTensor& S) {
    check_dense(W, X);
    const std::size_t batch = X.extent(0), out = W.extent(0), in = W.extent(1);
    prepare(S, batch, out);
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t j = 0; j < out; ++j) {
            cplx acc = b[j];
            for (std::size_t k = 0; k < in; ++k) acc += W(j, k) * X(s, k);
            S(s, j) = acc;
        }
    }
}

void activation_forward(const Activation& act, const ComplexTensor& S, ComplexTensor& H) {
    const std::size_t batch = S.extent(0), out = S.extent(1);
    prepare(H, batch, out);
    for (std::size_t s = 0; s < batch; ++s)
        for (std::size_t j = 0; j < out; ++j) H(s, j) = act.value(j, S(s, j));
}

void activation_backward(const Activation& act, const ComplexTensor& S, const ComplexTensor& dH,
                         ComplexTensor& dS, ActivationGrads& grads) {
    const std::size_t batch = S.extent(0), out = S.extent(1);
    prepare(dS, batch, out);
    // gamma is summed per neuron first, as in the parallel kernel
    std::vector<double> gamma_part(out, 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t j = 0; j < out; ++j) {
            const auto r = act.backward(j, S(s, j), dH(s, j), grads);
            dS(s, j) = r.delta_pre;
            gamma_part[j] += r.gamma_grad;
        }
    }
    for (double g : gamma_part) grads.gamma += g;
}

void dense_backward(const ComplexTensor& W, const ComplexTensor& X, const ComplexTensor& dS, ComplexTensor& gW,
                    ComplexTensor& gb, ComplexTensor* dX) {
    check_dense(W, X);
    const std::size_t batch = X.extent(0), out = W.extent(0), in = W.extent(1);
    gW = ComplexTensor({out, in});
    gb = ComplexTensor({out});
    if (dX) *dX = ComplexTensor({batch, in});
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t j = 0; j < out; ++j) {
            const cplx d = dS(s, j);
            gb[j] += d;
            for (std::size_t k = 0; k < in; ++k) gW(j, k) += d * std::conj(X(s, k));
            if (dX)
                for (std::size_t k = 0; k < in; ++k) (*dX)(s, k) += std::conj(W(j, k)) * d;
        }
    }
}

} // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
// ---------------------------------------------------------------------------

namespace parallel {

void dense_forward(const ComplexTensor& W, const ComplexTensor& b, const ComplexTensor& X, ComplexTensor& S) {
    check_dense(W, X);
    const std::size_t batch = X.extent(0), out = W.extent(0), in = W.extent(1);
    prepare(S, batch, out);
    const cplx* w = W.data();
    const cplx* x = X.data();
    cplx* s_out = S.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t j = 0; j < out; ++j) {
            const cplx* wr = w + j * in;
            const cplx* xr = x + s * in;
            cplx acc = b[j];
            for (std::size_t k = 0; k < in; ++k) acc += wr[k] * xr[k];
            s_out[s * out + j] = acc;
        }
    }
}

void activation_forward(const Activation& act, const ComplexTensor& S, ComplexTensor& H) {
    const std::size_t batch = S.extent(0), out = S.extent(1);
    prepare(H, batch, out);
    const std::size_t total = batch * out;
    const cplx* s_in = S.data();
    cplx* h = H.data();
    if (act.kind() == ActivationKind::Identity) {
        std::copy(s_in, s_in + total, h);
        return;
    }
    FirstError err;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        try {
            h[i] = act.value(i % out, s_in[i]);
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
}

void activation_backward(const Activation& act, const ComplexTensor& S, const ComplexTensor& dH,
                         ComplexTensor& dS, ActivationGrads& grads) {
    const std::size_t batch = S.extent(0), out = S.extent(1);
    prepare(dS, batch, out);
    if (act.kind() == ActivationKind::Identity) {
        std::copy(dH.data(), dH.data() + batch * out, dS.data());
        return;
    }
    // One neuron per iteration: each neuron's parameter rows are touched by
    // exactly one thread and summed over the batch in order.
    std::vector<double> gamma_part(out, 0.0);
    FirstError err;
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < out; ++j) {
        try {
            double g = 0.0;
            for (std::size_t s = 0; s < batch; ++s) {
                const auto r = act.backward(j, S(s, j), dH(s, j), grads);
                dS(s, j) = r.delta_pre;
                g += r.gamma_grad;
            }
            gamma_part[j] = g;
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    for (double g : gamma_part) grads.gamma += g;
}

void dense_backward(const ComplexTensor& W, const ComplexTensor& X, const ComplexTensor& dS, ComplexTensor& gW,
                    ComplexTensor& gb, ComplexTensor* dX) {
    check_dense(W, X);
    const std::size_t batch = X.extent(0), out = W.extent(0), in = W.extent(1);
    gW = ComplexTensor({out, in});
    gb = ComplexTensor({out});
    const cplx* x = X.data();
    const cplx* ds = dS.data();
    cplx* gw = gW.data();
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < out; ++j) {
        cplx* gr = gw + j * in;
        cplx bsum = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            const cplx d = ds[s * out + j];
            bsum += d;
            const cplx* xr = x + s * in;
            for (std::size_t k = 0; k < in; ++k) gr[k] += d * std::conj(xr[k]);
        }
        gb[j] = bsum;
    }
    if (!dX) return;
    *dX = ComplexTensor({batch, in});
    const cplx* w = W.data();
    cplx* dx = dX->data();
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < batch; ++s) {
        cplx* dr = dx + s * in;
        for (std::size_t j = 0; j < out; ++j) {
            const cplx d = ds[s * out + j];
            const cplx* wr = w + j * in;
            for (std::size_t k = 0; k < in; ++k) dr[k] += std::conj(wr[k]) * d;
        }
    }
}

} // namespace parallel

} // namespace cvkaf::compute
