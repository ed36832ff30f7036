#pragma once

// Complex Adagrad, squared-magnitude regularization, minibatch sampling and
// the training loop.

#include "cvkaf/core.hpp"
#include "cvkaf/network.hpp"

#include <cstdint>
#include <vector>

namespace cvkaf {

struct AdagradConfig {
    double lr = 0.01;
    double eps = 1e-8;
};

/// Per-parameter step mu g / (sqrt(G) + eps) with G the running sum of |g|^2.
/// Complex parameters use their conjugate cogradient, real ones their plain
/// gradient. After every step the KAF bandwidths are clamped to >= 1e-3.
class Adagrad {
  public:
    Adagrad(const Network& net, AdagradConfig cfg = {});

    /// Throws NumericalError if an update would make a parameter non-finite;
    /// the network is left untouched in that case.
    void step(Network& net, const GradientSet& grads);

    const AdagradConfig& config() const noexcept { return cfg_; }
    /// One accumulator block per parameter block, in traversal order.
    const std::vector<std::vector<double>>& accumulators() const noexcept { return acc_; }
    std::size_t steps() const noexcept { return steps_; }

  private:
    AdagradConfig cfg_;
    std::vector<std::vector<double>> acc_;
    std::size_t steps_ = 0;
};

/// sum |w|^2 over the regularized parameters (everything except biases and
/// the modReLU radii).
double regularization_penalty(const Network& net);

inline double regularized_loss(const Network& net, double batch_loss, double lambda) {
    return lambda == 0.0 ? batch_loss : batch_loss + lambda * regularization_penalty(net);
}

/// Adds the gradient of lambda sum |w|^2: lambda w for complex parameters
/// (conjugate cogradient), 2 lambda p for real ones.
void add_regularization_gradient(const Network& net, GradientSet& grads, double lambda);

/// `size` indices drawn uniformly with replacement from [0, n).
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t size);

/// Rows of `data` selected by `idx`.
Batch gather(const Batch& data, std::span<const std::size_t> idx);

inline Batch sample_minibatch(Rng& rng, const Batch& data, std::size_t size = 40) {
    const auto idx = sample_indices(rng, data.inputs.extent(0), size);
    return gather(data, idx);
}

struct TrainConfig {
    std::size_t iterations = 10000;
    std::size_t batch_size = 40;
    double lambda = 1e-4;
    AdagradConfig adagrad;
    Backend backend = Backend::Parallel;
};

struct TrainResult {
    /// Regularized minibatch loss before each step.
    std::vector<double> loss_curve;
};

/// Minibatch Adagrad on `data`. Throws NumericalError naming the iteration
/// if the loss becomes non-finite.
TrainResult train(Network& net, const Batch& data, const TrainConfig& cfg, Rng& rng);

} // namespace cvkaf
