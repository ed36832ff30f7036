#include "cvkaf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cvkaf {

Batch take(const RegressionDataset& ds, std::span<const std::size_t> idx) {
    const std::size_t in = ds.inputs.extent(1), out = ds.targets.extent(1);
    Batch b;
    b.inputs = ComplexTensor({idx.size(), in});
    b.targets = ComplexTensor({idx.size(), out});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= ds.size()) throw std::out_of_range("take: index out of range");
        std::copy_n(ds.inputs.data() + idx[r] * in, in, b.inputs.data() + r * in);
        std::copy_n(ds.targets.data() + idx[r] * out, out, b.targets.data() + r * out);
    }
    return b;
}

// ---------------------------------------------------------------------------
// channel
// ---------------------------------------------------------------------------

void validate(const ChannelConfig& cfg) {
    if (!(cfg.rho > 0.0 && cfg.rho < 1.0))
        throw std::invalid_argument("rho must satisfy 0 < rho < 1 (got " + std::to_string(cfg.rho) + ")");
    if (cfg.embed == 0) throw std::invalid_argument("embed must be positive");
    if (cfg.samples <= cfg.embed) throw std::invalid_argument("samples must exceed embed");
    if (cfg.samples < 5) throw std::invalid_argument("samples must be at least 5 (filter length)");
    if (std::isnan(cfg.snr_db)) throw std::invalid_argument("snr_db must be a number");
    if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in [0, 1)");
}

std::vector<cplx> channel_source(Rng& rng, double rho, std::size_t n) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("channel_source: need 0 < rho < 1");
    const double a = std::sqrt(1.0 - rho * rho);
    std::vector<cplx> s(n);
    for (auto& v : s) {
        const double x = gaussian_sample(rng);
        const double y = gaussian_sample(rng);
        v = {a * x, rho * y};
    }
    return s;
}

std::array<cplx, 5> channel_taps() {
    std::array<cplx, 5> h;
    for (int k = 1; k <= 5; ++k) {
        const double re = 1.0 + std::cos(2.0 * std::numbers::pi * (k - 3) / 5.0);
        const double im = 1.0 + std::cos(2.0 * std::numbers::pi * (k - 3) / 10.0);
        h[k - 1] = 0.432 * cplx(re, -im);
    }
    return h;
}

std::vector<cplx> channel_filter(std::span<const cplx> s) {
    if (s.size() < 5) throw std::invalid_argument("channel_filter: need at least 5 samples");
    const auto h = channel_taps();
    std::vector<cplx> t(s.size());
    for (std::size_t n = 0; n < s.size(); ++n) {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < 5 && k <= n; ++k) acc += h[k] * s[n - k];
        t[n] = acc;
    }
    return t;
}

std::vector<cplx> channel_nonlinearity(std::span<const cplx> t) {
    const cplx c{0.15, -0.1};
    std::vector<cplx> r(t.size());
    for (std::size_t n = 0; n < t.size(); ++n) r[n] = t[n] + c * t[n] * t[n];
    return r;
}

std::vector<cplx> add_awgn(std::span<const cplx> r, double snr_db, Rng& rng) {
    if (std::isnan(snr_db)) throw std::invalid_argument("add_awgn: snr_db is NaN");
    std::vector<cplx> out(r.begin(), r.end());
    if (std::isinf(snr_db) && snr_db > 0) return out;
    if (r.empty()) return out;
    double power = 0.0;
    for (auto v : r) power += abs2(v);
    power /= static_cast<double>(r.size());
    const double sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);
    for (auto& v : out) {
        const double x = gaussian_sample(rng);
        const double y = gaussian_sample(rng);
        v += sd * cplx(x, y);
    }
    return out;
}

RegressionDataset make_channel_dataset(const ChannelConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    const auto s = channel_source(rng, cfg.rho, cfg.samples);
    const auto r = add_awgn(channel_nonlinearity(channel_filter(s)), cfg.snr_db, rng);

    const std::size_t L = cfg.embed, pairs = cfg.samples - L + 1;
    RegressionDataset ds;
    ds.inputs = ComplexTensor({pairs, L});
    ds.targets = ComplexTensor({pairs, 1});
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t n = p + L - 1;
        for (std::size_t k = 0; k < L; ++k) ds.inputs(p, k) = s[n - L + 1 + k];
        ds.targets(p, 0) = r[n];
    }

    std::vector<std::size_t> perm(pairs);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = pairs; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(pairs)));
    ds.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    ds.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(ds.test.begin(), ds.test.end());
    std::sort(ds.train.begin(), ds.train.end());
    return ds;
}

// ---------------------------------------------------------------------------
// wind
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    return v;
}

bool parse_double(std::string_view cell, double& out) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return false;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return res.ec == std::errc{} && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

} // namespace

std::vector<cplx> parse_wind_csv(std::istream& in, const std::string& source) {
    std::vector<cplx> series;
    std::string line;
    std::size_t lineno = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = trim(line);
        if (lineno == 1 && v.size() >= 3 && static_cast<unsigned char>(v[0]) == 0xEF) v.remove_prefix(3); // BOM
        if (v.empty()) continue;
        const auto cells = split_commas(v);
        const std::string where = source + ":" + std::to_string(lineno);
        if (cells.size() != 2)
            throw std::runtime_error(where + ": expected 2 columns, found " + std::to_string(cells.size()));
        double north = 0.0, east = 0.0;
        const bool ok_n = parse_double(cells[0], north), ok_e = parse_double(cells[1], east);
        if (!ok_n || !ok_e) {
            if (first_content && !ok_n && !ok_e) {
                first_content = false; // header row
                continue;
            }
            throw std::runtime_error(where + ": non-numeric cell '" + std::string(trim(ok_n ? cells[1] : cells[0])) +
                                     "'");
        }
        first_content = false;
        series.emplace_back(north, east);
    }
    return series;
}

std::vector<cplx> load_wind_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open wind file " + path);
    return parse_wind_csv(f, path);
}

RegressionDataset make_wind_dataset(std::span<const cplx> series, const WindConfig& cfg) {
    if (cfg.embed == 0) throw std::invalid_argument("wind: embed must be positive");
    const std::size_t need = cfg.embed + cfg.horizon + cfg.test_len + cfg.validation_len;
    if (series.size() <= need)
        throw std::invalid_argument("wind: series of length " + std::to_string(series.size()) +
                                    " is too short (need more than " + std::to_string(need) + ")");
    const std::size_t pairs = series.size() - cfg.embed - cfg.horizon + 1;
    RegressionDataset ds;
    ds.inputs = ComplexTensor({pairs, cfg.embed});
    ds.targets = ComplexTensor({pairs, 1});
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t t = p + cfg.embed - 1;
        for (std::size_t k = 0; k < cfg.embed; ++k) ds.inputs(p, k) = series[t - cfg.embed + 1 + k];
        ds.targets(p, 0) = series[t + cfg.horizon];
    }
    const std::size_t test_start = pairs - cfg.test_len, val_start = test_start - cfg.validation_len;
    for (std::size_t p = 0; p < pairs; ++p) {
        auto& split = p >= test_start ? ds.test : p >= val_start ? ds.validation : ds.train;
        split.push_back(p);
    }
    return ds;
}

std::vector<cplx> synthetic_wind_series(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cplx> z(n);
    cplx x1 = 0.0, x2 = 0.0;
    const cplx a1{1.55, 0.08}, a2{-0.62, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
        // Gusts are stronger along the north axis than the east axis.
        const cplx e{1.0 * gaussian_sample(rng), 0.6 * gaussian_sample(rng)};
        const cplx x = a1 * x1 + a2 * x2 + 0.25 * e;
        x2 = x1;
        x1 = x;
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / 24.0;
        const cplx drift{2.0 + 0.5 * std::sin(phase), 1.0 + 0.3 * std::cos(phase)};
        z[t] = drift + x;
    }
    return z;
}

std::vector<cplx> predictable_series(std::size_t n) {
    const double w[3] = {0.21, 0.57, 1.31};
    const cplx c[3] = {{0.6, 0.2}, {-0.3, 0.4}, {0.25, -0.15}};
    std::vector<cplx> z(n);
    for (std::size_t t = 0; t < n; ++t) {
        cplx acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += c[k] * std::polar(1.0, w[k] * static_cast<double>(t));
        z[t] = acc;
    }
    return z;
}

// ---------------------------------------------------------------------------
// MNIST
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& source) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(source + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open IDX file " + path);
    return f;
}

} // namespace

IdxImages parse_idx_images(std::istream& in, const std::string& source) {
    const auto magic = read_be32(in, source);
    if (magic != 2051) throw std::runtime_error(source + ": bad IDX3 magic " + std::to_string(magic));
    IdxImages im;
    im.count = read_be32(in, source);
    im.rows = read_be32(in, source);
    im.cols = read_be32(in, source);
    if (im.rows == 0 || im.cols == 0 || im.rows > 4096 || im.cols > 4096)
        throw std::runtime_error(source + ": implausible image size");
    im.pixels.resize(im.count * im.rows * im.cols);
    if (!in.read(reinterpret_cast<char*>(im.pixels.data()), static_cast<std::streamsize>(im.pixels.size())))
        throw std::runtime_error(source + ": truncated pixel data");
    return im;
}

std::vector<std::uint8_t> parse_idx_labels(std::istream& in, const std::string& source) {
    const auto magic = read_be32(in, source);
    if (magic != 2049) throw std::runtime_error(source + ": bad IDX1 magic " + std::to_string(magic));
    std::vector<std::uint8_t> labels(read_be32(in, source));
    if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size())))
        throw std::runtime_error(source + ": truncated label data");
    for (auto l : labels)
        if (l > 9) throw std::runtime_error(source + ": label " + std::to_string(l) + " outside 0-9");
    return labels;
}

IdxImages read_idx_images(const std::string& path) {
    auto f = open_binary(path);
    return parse_idx_images(f, path);
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    auto f = open_binary(path);
    return parse_idx_labels(f, path);
}

ComplexTensor dft_matrix(std::size_t n) {
    ComplexTensor W({n, n});
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t x = 0; x < n; ++x) {
            const std::size_t k = (u * x) % n; // exact angle reduction
            W(u, x) = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
        }
    return W;
}

namespace {

// out = W X W^T for real X; tmp is n x n scratch.
void dft2_into(const double* x, const ComplexTensor& W, std::size_t n, cplx* tmp, cplx* out) {
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t c = 0; c < n; ++c) {
            cplx acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) acc += W(u, r) * x[r * n + c];
            tmp[u * n + c] = acc;
        }
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
            cplx acc = 0.0;
            for (std::size_t c = 0; c < n; ++c) acc += tmp[u * n + c] * W(v, c);
            out[u * n + v] = acc;
        }
}

} // namespace

ComplexTensor dft2(std::span<const double> image, const ComplexTensor& W) {
    const std::size_t n = W.extent(0);
    if (image.size() != n * n)
        throw std::invalid_argument("dft2: image is not " + std::to_string(n) + "x" + std::to_string(n));
    ComplexTensor out({n, n});
    std::vector<cplx> tmp(n * n);
    dft2_into(image.data(), W, n, tmp.data(), out.data());
    return out;
}

ComplexTensor dft2_images(const IdxImages& images, Backend backend) {
    if (images.rows != images.cols) throw std::invalid_argument("dft2_images: images must be square");
    const std::size_t n = images.rows, px = n * n, count = images.count;
    const ComplexTensor W = dft_matrix(n);
    ComplexTensor out({count, px});
    auto one = [&](std::size_t i, std::vector<double>& x, std::vector<cplx>& tmp) {
        for (std::size_t p = 0; p < px; ++p) x[p] = images.pixels[i * px + p] / 255.0;
        dft2_into(x.data(), W, n, tmp.data(), out.data() + i * px);
    };
    if (backend == Backend::Serial) {
        std::vector<double> x(px);
        std::vector<cplx> tmp(px);
        for (std::size_t i = 0; i < count; ++i) one(i, x, tmp);
        return out;
    }
#pragma omp parallel
    {
        std::vector<double> x(px);
        std::vector<cplx> tmp(px);
#pragma omp for schedule(static)
        for (std::size_t i = 0; i < count; ++i) one(i, x, tmp);
    }
    return out;
}

FeatureSelection select_features(const ComplexTensor& spectra, std::size_t keep) {
    const std::size_t rows = spectra.extent(0), cols = spectra.extent(1);
    if (rows == 0) throw std::invalid_argument("select_features: no spectra");
    if (keep == 0 || keep > cols)
        throw std::invalid_argument("select_features: keep must lie in [1, " + std::to_string(cols) + "]");
    FeatureSelection sel;
    sel.significance.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) sel.significance[c] += std::abs(spectra(r, c));
    for (auto& v : sel.significance) v /= static_cast<double>(rows);
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sel.significance[a] > sel.significance[b]; });
    sel.positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    return sel;
}

ComplexTensor apply_selection(const ComplexTensor& spectra, std::span<const std::size_t> positions) {
    const std::size_t rows = spectra.extent(0), cols = spectra.extent(1);
    ComplexTensor out({rows, positions.size()});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < positions.size(); ++k) {
            if (positions[k] >= cols) throw std::out_of_range("apply_selection: position out of range");
            out(r, k) = spectra(r, positions[k]);
        }
    return out;
}

ClassificationDataset mnist_fft_pipeline(const IdxImages& train_images, std::span<const std::uint8_t> train_labels,
                                         const IdxImages& test_images, std::span<const std::uint8_t> test_labels,
                                         std::size_t keep, Backend backend) {
    if (train_images.count != train_labels.size() || test_images.count != test_labels.size())
        throw std::invalid_argument("mnist: image and label counts differ");
    if (train_images.rows != test_images.rows || train_images.cols != test_images.cols)
        throw std::invalid_argument("mnist: train and test image sizes differ");
    const ComplexTensor f_train = dft2_images(train_images, backend);
    const ComplexTensor f_test = dft2_images(test_images, backend);
    ClassificationDataset ds;
    ds.selection = select_features(f_train, keep);
    ds.train.inputs = apply_selection(f_train, ds.selection.positions);
    ds.test.inputs = apply_selection(f_test, ds.selection.positions);
    ds.train.labels.assign(train_labels.begin(), train_labels.end());
    ds.test.labels.assign(test_labels.begin(), test_labels.end());
    return ds;
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

namespace {

double affine(double v, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

} // namespace

void MinMaxTransform::apply(ComplexTensor& x) const {
    const std::size_t rows = x.extent(0), cols = x.extent(1);
    if (cols != re_min.size()) throw std::invalid_argument("MinMaxTransform: column count mismatch");
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const cplx v = x(r, c);
            x(r, c) = {affine(v.real(), re_min[c], re_max[c]), affine(v.imag(), im_min[c], im_max[c])};
        }
}

MinMaxTransform fit_minmax(const ComplexTensor& x, std::span<const std::size_t> train_rows) {
    if (train_rows.empty()) throw std::invalid_argument("fit_minmax: empty training split");
    const std::size_t cols = x.extent(1);
    const double inf = std::numeric_limits<double>::infinity();
    MinMaxTransform t{std::vector<double>(cols, inf), std::vector<double>(cols, -inf),
                      std::vector<double>(cols, inf), std::vector<double>(cols, -inf)};
    for (std::size_t r : train_rows)
        for (std::size_t c = 0; c < cols; ++c) {
            const cplx v = x.at(r, c);
            t.re_min[c] = std::min(t.re_min[c], v.real());
            t.re_max[c] = std::max(t.re_max[c], v.real());
            t.im_min[c] = std::min(t.im_min[c], v.imag());
            t.im_max[c] = std::max(t.im_max[c], v.imag());
        }
    return t;
}

MinMaxTransform fit_minmax(const ComplexTensor& x) {
    std::vector<std::size_t> all(x.extent(0));
    std::iota(all.begin(), all.end(), 0);
    return fit_minmax(x, all);
}

MinMaxTransform preprocess_minmax(RegressionDataset& ds) {
    auto t = fit_minmax(ds.inputs, ds.train);
    t.apply(ds.inputs);
    return t;
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const Batch& data) {
    const std::size_t rows = data.inputs.extent(0), cols = data.inputs.extent(1);
    const bool regression = data.targets.rank() == 2 && data.targets.extent(0) == rows;
    for (std::size_t c = 0; c < cols; ++c) out << (c ? "," : "") << 'x' << c << "_re,x" << c << "_im";
    if (regression) {
        const bool many = data.targets.extent(1) > 1;
        for (std::size_t c = 0; c < data.targets.extent(1); ++c) {
            const std::string y = "y" + (many ? std::to_string(c) : std::string());
            out << ',' << y << "_re," << y << "_im";
        }
    } else if (!data.labels.empty())
        out << ",label";
    out << '\n' << std::setprecision(17);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c)
            out << (c ? "," : "") << data.inputs(r, c).real() << ',' << data.inputs(r, c).imag();
        if (regression)
            for (std::size_t c = 0; c < data.targets.extent(1); ++c)
                out << ',' << data.targets(r, c).real() << ',' << data.targets(r, c).imag();
        else if (!data.labels.empty())
            out << ',' << data.labels[r];
        out << '\n';
    }
}

namespace {

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    }
    void tensor(const ComplexTensor& t) {
        for (auto e : t.shape()) {
            const std::uint64_t v = e;
            bytes(&v, sizeof v);
        }
        for (auto v : t.flat()) {
            const double re = v.real(), im = v.imag();
            bytes(&re, sizeof re);
            bytes(&im, sizeof im);
        }
    }
    std::string hex() const {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        return os.str();
    }
};

} // namespace

std::string fingerprint(const Batch& data) {
    Fnv f;
    f.tensor(data.inputs);
    f.tensor(data.targets);
    for (int l : data.labels) f.bytes(&l, sizeof l);
    return f.hex();
}

std::string fingerprint(const RegressionDataset& ds) {
    Fnv f;
    f.tensor(ds.inputs);
    f.tensor(ds.targets);
    for (const auto* split : {&ds.train, &ds.validation, &ds.test}) {
        const std::uint64_t n = split->size();
        f.bytes(&n, sizeof n);
        for (std::uint64_t i : *split) f.bytes(&i, sizeof i);
    }
    return f.hex();
}

} // namespace cvkaf
