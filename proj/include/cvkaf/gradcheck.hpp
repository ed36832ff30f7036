#pragma once

// Analytic backpropagation against central finite differences on small
// networks, one per activation kind and output head.

#include "cvkaf/core.hpp"
#include "cvkaf/network.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cvkaf {

struct BlockCheck {
    std::string block;
    double max_rel_error = 0.0;
};

/// Compares backward() with finite differences of the mean batch loss for
/// every parameter entry of `net` (restored afterwards). Complex entries are
/// checked against 1/2 (dJ/da + i dJ/db), real ones against dJ/dp. The error
/// of a block is max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, 1e-6).
std::vector<BlockCheck> check_gradients(Network& net, const Batch& batch, double h = kDefaultFdStep,
                                        double corrupt_scale = 1.0);

struct GradcheckOptions {
    std::uint64_t seed = 1;
    int seeds = 10;
    std::size_t batch = 6;
    double h = kDefaultFdStep;
    double tolerance = 1e-4;
    /// Test hook: analytic gradients of this kind are scaled by 1.05.
    std::optional<ActivationKind> corrupt;
};

struct GradcheckRow {
    ActivationKind kind;
    OutputHead head;
    double max_rel_error = 0.0;
    std::string worst_block;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    double tolerance = 1e-4;

    /// Worst error over heads for one kind.
    double max_error(ActivationKind kind) const;
    bool passed() const;
};

/// 3 -> 5 -> 1 regression and 4 -> 5 -> 3 classification networks (both
/// softmax heads) for every activation kind, over `seeds` seeds.
GradcheckReport run_gradcheck(const GradcheckOptions& opt);

} // namespace cvkaf
