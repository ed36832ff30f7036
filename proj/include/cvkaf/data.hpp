#pragma once

// Dataset generation and ingestion: the nonlinear channel, wind series
// embedding, FFT features of MNIST digits, min-max preprocessing and CSV
// export.

#include "cvkaf/compute.hpp"
#include "cvkaf/core.hpp"
#include "cvkaf/network.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace cvkaf {

/// Samples plus split index lists (disjoint, each sorted ascending).
struct RegressionDataset {
    ComplexTensor inputs;  // samples x embedding
    ComplexTensor targets; // samples x 1
    std::vector<std::size_t> train, validation, test;

    std::size_t size() const { return inputs.rank() == 2 ? inputs.extent(0) : 0; }
};

/// Rows `idx` of a regression dataset as a training batch.
Batch take(const RegressionDataset& ds, std::span<const std::size_t> idx);

// Channel identification -------------------------------------------------------

struct ChannelConfig {
    double rho = std::numbers::sqrt2 / 2.0;
    std::size_t samples = 2000;
    std::size_t embed = 5;
    double snr_db = 13.0;
    double test_fraction = 0.15;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument naming the violated constraint.
void validate(const ChannelConfig& cfg);

/// s_n = sqrt(1 - rho^2) X_n + i rho Y_n with X, Y standard normal.
std::vector<cplx> channel_source(Rng& rng, double rho, std::size_t n);

/// h(k) = 0.432 (1 + cos(2 pi (k-3)/5) - i (1 + cos(2 pi (k-3)/10))), k = 1..5
/// (stored at index k-1).
std::array<cplx, 5> channel_taps();

/// t_n = sum_k h(k) s_{n-k+1}. Output has the length of the input; samples
/// before the start are taken as zero, so the first four outputs are
/// transients that the dataset builder never uses.
std::vector<cplx> channel_filter(std::span<const cplx> s);

/// r = t + (0.15 - 0.1i) t^2.
std::vector<cplx> channel_nonlinearity(std::span<const cplx> t);

/// Adds circular white noise with variance mean(|r|^2) / 10^(snr/10). An
/// infinite SNR returns r unchanged.
std::vector<cplx> add_awgn(std::span<const cplx> r, double snr_db, Rng& rng);

/// One generation: N - L + 1 pairs (s_{n-L+1..n} oldest first, noisy r_n),
/// round(15%) of them drawn at random as the test split.
RegressionDataset make_channel_dataset(const ChannelConfig& cfg);

// Wind ---------------------------------------------------------------------

/// Two numeric columns (north, east) -> north + i east. A single non-numeric
/// first row is treated as a header. Throws std::runtime_error naming the
/// offending line.
std::vector<cplx> parse_wind_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<cplx> load_wind_csv(const std::string& path);

struct WindConfig {
    std::size_t embed = 10;
    std::size_t horizon = 8;
    std::size_t test_len = 500;
    std::size_t validation_len = 500;
};

/// x_t = (z_{t-embed+1}, ..., z_t), target z_{t+horizon}. The last test_len
/// pairs are the test split, the validation_len before them validation.
RegressionDataset make_wind_dataset(std::span<const cplx> series, const WindConfig& cfg = {});

/// Correlated, non-circular complex AR(2) series with a slowly drifting mean,
/// standing in for measured wind when no file is given.
std::vector<cplx> synthetic_wind_series(std::size_t n, std::uint64_t seed);

/// Sum of three undamped complex exponentials: every sample is an exact
/// linear function of any three consecutive earlier samples.
std::vector<cplx> predictable_series(std::size_t n);

// MNIST ----------------------------------------------------------------------

struct IdxImages {
    std::size_t count = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols
};

/// Big-endian IDX3 (magic 2051) / IDX1 (magic 2049) readers.
IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
IdxImages parse_idx_images(std::istream& in, const std::string& source);
std::vector<std::uint8_t> parse_idx_labels(std::istream& in, const std::string& source);

/// W[u][x] = exp(-2 pi i u x / n).
ComplexTensor dft_matrix(std::size_t n);

/// Unnormalized 2-D DFT W X W^T of a real n x n image (row-major).
ComplexTensor dft2(std::span<const double> image, const ComplexTensor& W);

/// DFT of every image scaled by 1/255, one flattened row per image
/// (count x rows*cols). Parallel over images unless Backend::Serial.
ComplexTensor dft2_images(const IdxImages& images, Backend backend = Backend::Parallel);

struct FeatureSelection {
    std::vector<std::size_t> positions; // flat (u * cols + v), most significant first
    std::vector<double> significance;   // mean |F| per flat position over the fitting set
};

/// Top `keep` positions by mean magnitude over the rows of `spectra`; ties
/// go to the lower flat index.
FeatureSelection select_features(const ComplexTensor& spectra, std::size_t keep);

/// Columns `positions` of `spectra`.
ComplexTensor apply_selection(const ComplexTensor& spectra, std::span<const std::size_t> positions);

struct ClassificationDataset {
    Batch train;
    Batch test;
    FeatureSelection selection;
};

/// DFT features of train and test images, the selection fitted on train only.
ClassificationDataset mnist_fft_pipeline(const IdxImages& train_images, std::span<const std::uint8_t> train_labels,
                                         const IdxImages& test_images, std::span<const std::uint8_t> test_labels,
                                         std::size_t keep = 100, Backend backend = Backend::Parallel);

// Preprocessing -----------------------------------------------------------

/// Per-coordinate affine maps of the real and imaginary parts onto [-1, 1].
struct MinMaxTransform {
    std::vector<double> re_min, re_max, im_min, im_max;

    /// Applies the maps in place; constant coordinates map to 0 and values
    /// outside the fitted range are not clipped.
    void apply(ComplexTensor& x) const;
};

MinMaxTransform fit_minmax(const ComplexTensor& x);
/// Fits on the rows `train_rows` of x only.
MinMaxTransform fit_minmax(const ComplexTensor& x, std::span<const std::size_t> train_rows);

/// Fits on ds.train and applies to every sample. Returns the transform.
MinMaxTransform preprocess_minmax(RegressionDataset& ds);

// Export and fingerprints --------------------------------------------------

/// Columns x<k>_re, x<k>_im per feature, then y_re, y_im (regression) or label.
void write_csv(std::ostream& out, const Batch& data);

/// 64-bit FNV-1a over the raw values and labels, as 16 hex digits.
std::string fingerprint(const Batch& data);
std::string fingerprint(const RegressionDataset& ds);

} // namespace cvkaf
