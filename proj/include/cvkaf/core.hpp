#pragma once

// Complex scalars and tensors, the seeded generator, Wirtinger derivative
// pairs and the finite-difference cogradient oracle.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cvkaf {

using cplx = std::complex<double>;

inline constexpr cplx kI{0.0, 1.0};

/// Raised when an argument lies outside a function's mathematical domain
/// (Szego kernel outside the unit disk, complex tanh near a pole, ...).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Raised when a computation produces NaN or Inf where finite values are required.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// |z|^2 computed as re^2 + im^2 (std::norm may take a different route).
inline double abs2(cplx z) { return z.real() * z.real() + z.imag() * z.imag(); }

inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

/// Dense row-major tensor. `at()` is bounds-checked, `operator[]` and the
/// two-index `operator()` are not.
template <typename T>
class Tensor {
  public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw std::invalid_argument("Tensor: shape product " + std::to_string(count(shape_)) +
                                        " does not match " + std::to_string(data_.size()) +
                                        " entries");
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    // Rank-2 fast path.
    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept {
        return data_[r * shape_[1] + c];
    }

    template <typename... Idx>
    T& at(Idx... idx) {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }
    template <typename... Idx>
    const T& at(Idx... idx) const {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    /// Row `r` of the tensor viewed as (extent(0), size()/extent(0)).
    std::span<T> row(std::size_t r) {
        const std::size_t w = row_width();
        if (r >= shape_.at(0)) throw std::out_of_range("Tensor::row: index out of range");
        return std::span<T>(data_).subspan(r * w, w);
    }
    std::span<const T> row(std::size_t r) const {
        const std::size_t w = row_width();
        if (r >= shape_.at(0)) throw std::out_of_range("Tensor::row: index out of range");
        return std::span<const T>(data_).subspan(r * w, w);
    }

    void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return s.empty() ? 0 : n;
    }

    std::size_t row_width() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw std::out_of_range("Tensor::at: expected " + std::to_string(shape_.size()) +
                                    " indices, got " + std::to_string(idx.size()));
        std::size_t off = 0;
        std::size_t axis = 0;
        for (auto i : idx) {
            if (i >= shape_[axis])
                throw std::out_of_range("Tensor::at: index " + std::to_string(i) + " out of range for axis " +
                                        std::to_string(axis) + " with extent " +
                                        std::to_string(shape_[axis]));
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using ComplexTensor = Tensor<cplx>;
using RealTensor = Tensor<double>;

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

/// xoshiro256** seeded through splitmix64. The stream depends only on the
/// 64-bit seed, so runs are reproducible across platforms and compilers.
/// Normal variates use the Marsaglia polar method (one spare is cached).
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Standard normal variate.
    double gaussian();

    /// Seed of an independent stream derived from (seed, stream).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Free-function form used by the data generators.
inline double gaussian_sample(Rng& rng) { return rng.gaussian(); }

// ---------------------------------------------------------------------------
// Wirtinger derivatives
// ---------------------------------------------------------------------------

/// (df/dz, df/dz*) of a scalar map at a point.
struct WirtingerPair {
    cplx d_z{};
    cplx d_zstar{};
};

/// Combines the real partials of f = u + iv, df/da = u_a + i v_a and
/// df/db = u_b + i v_b, into the R- and R*-derivatives.
inline WirtingerPair wirtinger_from_real_partials(cplx df_da, cplx df_db) {
    return {0.5 * (df_da - kI * df_db), 0.5 * (df_da + kI * df_db)};
}

inline constexpr double kDefaultFdStep = 1e-5;

/// Central-difference conjugate cogradient of a real loss:
/// entry k is 1/2 (dJ/da_k + i dJ/db_k). Throws NumericalError if the loss
/// is NaN at any probe point.
ComplexTensor finite_difference_cogradient(const std::function<double(const ComplexTensor&)>& loss,
                                           const ComplexTensor& w, double h = kDefaultFdStep);

/// Central-difference gradient of a real loss with respect to real parameters.
RealTensor finite_difference_gradient(const std::function<double(const RealTensor&)>& loss,
                                      const RealTensor& w, double h = kDefaultFdStep);

} // namespace cvkaf
