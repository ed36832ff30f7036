#include "cvkaf/core.hpp"

#include <cmath>
#include <limits>

namespace cvkaf {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    splitmix64(x);
    return splitmix64(x);
}

ComplexTensor finite_difference_cogradient(const std::function<double(const ComplexTensor&)>& loss,
                                           const ComplexTensor& w, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_cogradient: step must be positive");
    ComplexTensor grad(w.shape());
    ComplexTensor probe = w;
    auto eval = [&](std::size_t k) {
        const double v = loss(probe);
        if (std::isnan(v))
            throw NumericalError("finite_difference_cogradient: loss is NaN at probe of entry " +
                                 std::to_string(k));
        return v;
    };
    for (std::size_t k = 0; k < w.size(); ++k) {
        const cplx orig = w[k];
        probe[k] = orig + h;
        const double ap = eval(k);
        probe[k] = orig - h;
        const double am = eval(k);
        probe[k] = orig + cplx(0.0, h);
        const double bp = eval(k);
        probe[k] = orig - cplx(0.0, h);
        const double bm = eval(k);
        probe[k] = orig;
        const double da = (ap - am) / (2.0 * h);
        const double db = (bp - bm) / (2.0 * h);
        grad[k] = 0.5 * cplx(da, db);
    }
    return grad;
}

RealTensor finite_difference_gradient(const std::function<double(const RealTensor&)>& loss,
                                      const RealTensor& w, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
    RealTensor grad(w.shape());
    RealTensor probe = w;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double orig = w[k];
        probe[k] = orig + h;
        const double p = loss(probe);
        probe[k] = orig - h;
        const double m = loss(probe);
        probe[k] = orig;
        if (std::isnan(p) || std::isnan(m))
            throw NumericalError("finite_difference_gradient: loss is NaN at probe of entry " +
                                 std::to_string(k));
        grad[k] = (p - m) / (2.0 * h);
    }
    return grad;
}

} // namespace cvkaf
