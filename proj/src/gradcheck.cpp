#include "cvkaf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace cvkaf {

namespace {

template <typename T>
constexpr bool is_complex_v = std::is_same_v<std::remove_const_t<T>, cplx>;

struct Flat {
    std::string name;
    bool complex = false;
    std::vector<cplx> c;
    std::vector<double> r;
};

std::vector<Flat> flatten(const Network& net, const GradientSet& g) {
    std::vector<Flat> out;
    for_each_gradient(net, g, [&](const std::string& name, auto span, bool) {
        Flat f;
        f.name = name;
        using T = typename decltype(span)::element_type;
        if constexpr (is_complex_v<T>) {
            f.complex = true;
            f.c.assign(span.begin(), span.end());
        } else {
            f.r.assign(span.begin(), span.end());
        }
        out.push_back(std::move(f));
    });
    return out;
}

} // namespace

std::vector<BlockCheck> check_gradients(Network& net, const Batch& batch, double h, double corrupt_scale) {
    const ForwardCache cache = forward(net, batch.inputs, Backend::Serial);
    const LossAndDelta ld = output_loss(net, cache.output, batch);
    const auto analytic = flatten(net, backward(net, cache, ld.delta, Backend::Serial));
    auto loss = [&] { return batch_loss(net, batch, Backend::Serial); };

    std::vector<BlockCheck> result;
    std::size_t b = 0;
    for_each_parameter(net, [&](const std::string& name, auto span, bool) {
        const Flat& a = analytic[b++];
        double diff = 0.0, an = 0.0, nn = 0.0;
        using T = typename decltype(span)::element_type;
        for (std::size_t i = 0; i < span.size(); ++i) {
            const T saved = span[i];
            if constexpr (is_complex_v<T>) {
                span[i] = saved + h;
                const double ap = loss();
                span[i] = saved - h;
                const double am = loss();
                span[i] = saved + kI * h;
                const double bp = loss();
                span[i] = saved - kI * h;
                const double bm = loss();
                span[i] = saved;
                const cplx num = 0.5 * cplx((ap - am) / (2 * h), (bp - bm) / (2 * h));
                const cplx ana = corrupt_scale * a.c[i];
                diff = std::max(diff, std::abs(ana - num));
                an = std::max(an, std::abs(ana));
                nn = std::max(nn, std::abs(num));
            } else {
                span[i] = saved + h;
                const double p = loss();
                span[i] = saved - h;
                const double m = loss();
                span[i] = saved;
                const double num = (p - m) / (2 * h);
                const double ana = corrupt_scale * a.r[i];
                diff = std::max(diff, std::abs(ana - num));
                an = std::max(an, std::abs(ana));
                nn = std::max(nn, std::abs(num));
            }
        }
        result.push_back({name, diff / std::max({an, nn, 1e-6})});
    });
    return result;
}

double GradcheckReport::max_error(ActivationKind kind) const {
    double e = 0.0;
    for (const auto& r : rows)
        if (r.kind == kind) e = std::max(e, r.max_rel_error);
    return e;
}

bool GradcheckReport::passed() const {
    return std::all_of(rows.begin(), rows.end(), [&](const GradcheckRow& r) { return r.max_rel_error <= tolerance; });
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
    GradcheckReport report;
    report.tolerance = opt.tolerance;
    const OutputHead heads[] = {OutputHead::Regression, OutputHead::MagnitudeSoftmax, OutputHead::RealSoftmax};
    for (ActivationKind kind : kAllActivationKinds) {
        for (OutputHead head : heads) {
            GradcheckRow row{kind, head, 0.0, ""};
            for (int s = 0; s < opt.seeds; ++s) {
                Rng rng(Rng::derive(opt.seed + static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(kind) * 8 + static_cast<std::uint64_t>(head)));
                NetworkSpec spec;
                const bool reg = head == OutputHead::Regression;
                spec.input_dim = reg ? 3 : 4;
                spec.hidden = {5};
                spec.output_dim = reg ? 1 : 3;
                spec.head = head;
                spec.hidden_activation = kind;
                if (kind == ActivationKind::ComplexKAF) {
                    spec.dict_size = 8;
                    spec.kernel = s % 2 ? KernelKind::ComplexGaussian : KernelKind::IndependentGaussian;
                }
                Network net = build_network(spec, rng);
                // Random non-zero biases so the zero-bias symmetry does not hide errors.
                for (auto& layer : net.layers)
                    for (auto& b : layer.bias.flat()) b = 0.2 * cplx(rng.gaussian(), rng.gaussian());

                Batch batch;
                batch.inputs = ComplexTensor({opt.batch, spec.input_dim});
                for (auto& x : batch.inputs.flat()) x = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
                if (reg) {
                    batch.targets = ComplexTensor({opt.batch, 1});
                    for (auto& y : batch.targets.flat()) y = cplx(rng.gaussian(), rng.gaussian());
                } else {
                    for (std::size_t i = 0; i < opt.batch; ++i)
                        batch.labels.push_back(static_cast<int>(rng.uniform_index(spec.output_dim)));
                }
                const double scale = opt.corrupt && *opt.corrupt == kind ? 1.05 : 1.0;
                for (const auto& bc : check_gradients(net, batch, opt.h, scale)) {
                    if (bc.max_rel_error >= row.max_rel_error) {
                        row.max_rel_error = bc.max_rel_error;
                        row.worst_block = bc.block;
                    }
                }
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

} // namespace cvkaf
