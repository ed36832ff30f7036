#include "cvkaf/experiment.hpp"
#include "cvkaf/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cvkaf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Named {
    const char* name;
    int value;
};

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const Named (&table)[N], const char* what) {
    for (const auto& e : table)
        if (s == e.name) return static_cast<E>(e.value);
    std::string known;
    for (const auto& e : table) known += std::string(known.empty() ? "" : ", ") + e.name;
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of " + known + ")");
}

template <typename E, std::size_t N>
std::string enum_name(E v, const Named (&table)[N]) {
    for (const auto& e : table)
        if (e.value == static_cast<int>(v)) return e.name;
    return "?";
}

constexpr Named kTasks[] = {{"channel", 0}, {"wind", 1}, {"mnist", 2}};
constexpr Named kModels[] = {{"lin", 0},     {"rnn_2r", 1},   {"cvnn_fixed", 2},
                             {"modrelu", 3}, {"kaf_split", 4}, {"kaf_complex", 5}};
constexpr Named kWindSources[] = {{"file", 0}, {"synthetic", 1}, {"predictable", 2}};

} // namespace

std::string to_string(Task t) { return enum_name(t, kTasks); }
std::string to_string(Model m) { return enum_name(m, kModels); }
Task parse_task(std::string_view s) { return parse_enum<Task>(s, kTasks, "task"); }
Model parse_model(std::string_view s) { return parse_enum<Model>(s, kModels, "model"); }

// ---------------------------------------------------------------------------
// resolved defaults
// ---------------------------------------------------------------------------

std::vector<std::size_t> ExperimentConfig::resolved_hidden() const {
    if (model == Model::Lin) return {};
    if (hidden) return *hidden;
    switch (task) {
    case Task::Channel: return {10};
    case Task::Wind: return {hidden_grid.empty() ? 10 : hidden_grid.front(), hidden_grid.empty() ? 10 : hidden_grid.front()};
    case Task::Mnist: return {100, 100, 100};
    }
    return {};
}

ActivationKind ExperimentConfig::resolved_activation() const {
    switch (model) {
    case Model::Lin: return ActivationKind::Identity;
    case Model::Rnn2R: return activation.value_or(ActivationKind::RealTanh);
    case Model::CvnnFixed: return activation.value_or(ActivationKind::SplitTanh);
    case Model::ModReLU: return ActivationKind::ModReLU;
    case Model::KafSplit: return ActivationKind::SplitKAF;
    case Model::KafComplex: return ActivationKind::ComplexKAF;
    }
    return ActivationKind::Identity;
}

int ExperimentConfig::resolved_dict_size() const {
    return dict_size.value_or(model == Model::KafComplex ? 8 : 20);
}

std::size_t ExperimentConfig::resolved_iterations() const {
    return iterations.value_or(task == Task::Mnist ? 20000 : 10000);
}

double ExperimentConfig::resolved_lambda() const {
    if (lambda) return *lambda;
    if (task == Task::Wind && !lambda_grid.empty()) return lambda_grid.back();
    return 1e-4;
}

int ExperimentConfig::resolved_repetitions() const {
    return repetitions.value_or(task == Task::Channel ? 15 : task == Task::Wind ? 5 : 1);
}

// ---------------------------------------------------------------------------
// config text
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string as_string(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    if (v.find_first_of("\"[]") != std::string::npos) throw ConfigError("expected a string, got " + v);
    return v;
}

double as_double(const std::string& v) {
    const std::string s = as_string(v);
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
    if (pos != s.size()) throw ConfigError("expected a number, got '" + v + "'");
    return d;
}

std::uint64_t as_uint(const std::string& v) {
    const std::string s = as_string(v);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("expected a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError("integer out of range: '" + v + "'");
    }
}

std::vector<std::string> as_list(const std::string& v) {
    std::string s = trim(v);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
        // a bare scalar is a one-element list
        if (s.empty()) throw ConfigError("expected a list");
        return {s};
    }
    s = trim(s.substr(1, s.size() - 2));
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty list element in " + v);
        out.push_back(item);
    }
    return out;
}

std::string fmt(double d) {
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << d;
    return os.str();
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s + "]";
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

// Keys picked by the wind grid search stay unset in the resolved text so a
// re-run searches again.
bool grid_searched_hidden(const ExperimentConfig& c) {
    return c.task == Task::Wind && !c.hidden && c.model != Model::Lin && !c.hidden_grid.empty();
}
bool grid_searched_lambda(const ExperimentConfig& c) {
    return c.task == Task::Wind && !c.lambda && !c.lambda_grid.empty();
}

struct KeyHandler {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    // empty: key left out of the resolved text
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<std::pair<std::string, KeyHandler>> table = {
        {"task", {[](C& c, S v) { c.task = parse_task(as_string(v)); }, [](const C& c) { return quote(to_string(c.task)); }}},
        {"model", {[](C& c, S v) { c.model = parse_model(as_string(v)); }, [](const C& c) { return quote(to_string(c.model)); }}},
        {"hidden",
         {[](C& c, S v) {
              std::vector<std::size_t> h;
              for (const auto& e : as_list(v)) h.push_back(static_cast<std::size_t>(as_uint(e)));
              c.hidden = h;
          },
          [](const C& c) { return grid_searched_hidden(c) ? std::string() : fmt_list(c.resolved_hidden()); }}},
        {"activation",
         {[](C& c, S v) {
              try {
                  c.activation = parse_activation_kind(as_string(v));
              } catch (const std::invalid_argument& e) {
                  throw ConfigError(e.what());
              }
          },
          [](const C& c) { return quote(to_string(c.resolved_activation())); }}},
        {"kernel",
         {[](C& c, S v) {
              try {
                  c.kernel = parse_kernel_kind(as_string(v));
              } catch (const std::invalid_argument& e) {
                  throw ConfigError(e.what());
              }
          },
          [](const C& c) { return quote(to_string(c.kernel)); }}},
        {"dict_size", {[](C& c, S v) { c.dict_size = static_cast<int>(as_uint(v)); }, [](const C& c) { return std::to_string(c.resolved_dict_size()); }}},
        {"dict_range",
         {[](C& c, S v) {
              const auto l = as_list(v);
              if (l.size() != 2) throw ConfigError("dict_range needs two values [lo, hi]");
              c.dict_lo = as_double(l[0]);
              c.dict_hi = as_double(l[1]);
          },
          [](const C& c) { return "[" + fmt(c.dict_lo) + ", " + fmt(c.dict_hi) + "]"; }}},
        {"kaf_init_std", {[](C& c, S v) { c.kaf_init_std = as_double(v); }, [](const C& c) { return fmt(c.kaf_init_std); }}},
        {"modrelu_bias", {[](C& c, S v) { c.modrelu_bias = as_double(v); }, [](const C& c) { return fmt(c.modrelu_bias); }}},
        {"lr", {[](C& c, S v) { c.lr = as_double(v); }, [](const C& c) { return fmt(c.lr); }}},
        {"epsilon", {[](C& c, S v) { c.epsilon = as_double(v); }, [](const C& c) { return fmt(c.epsilon); }}},
        {"iterations", {[](C& c, S v) { c.iterations = as_uint(v); }, [](const C& c) { return std::to_string(c.resolved_iterations()); }}},
        {"batch_size", {[](C& c, S v) { c.batch_size = as_uint(v); }, [](const C& c) { return std::to_string(c.batch_size); }}},
        {"lambda", {[](C& c, S v) { c.lambda = as_double(v); }, [](const C& c) { return grid_searched_lambda(c) ? std::string() : fmt(c.resolved_lambda()); }}},
        {"seed", {[](C& c, S v) { c.seed = as_uint(v); }, [](const C& c) { return std::to_string(c.seed); }}},
        {"repetitions", {[](C& c, S v) { c.repetitions = static_cast<int>(as_uint(v)); }, [](const C& c) { return std::to_string(c.resolved_repetitions()); }}},
        {"workers", {[](C& c, S v) { c.workers = static_cast<int>(as_uint(v)); }, [](const C& c) { return std::to_string(c.workers); }}},
        {"curve_stride", {[](C& c, S v) { c.curve_stride = as_uint(v); }, [](const C& c) { return std::to_string(c.curve_stride); }}},
        {"rho", {[](C& c, S v) { c.rho = as_double(v); }, [](const C& c) { return fmt(c.rho); }}},
        {"samples", {[](C& c, S v) { c.samples = as_uint(v); }, [](const C& c) { return std::to_string(c.samples); }}},
        {"embed", {[](C& c, S v) { c.embed = as_uint(v); }, [](const C& c) { return std::to_string(c.embed); }}},
        {"snr_db", {[](C& c, S v) { c.snr_db = as_double(v); }, [](const C& c) { return fmt(c.snr_db); }}},
        {"test_fraction", {[](C& c, S v) { c.test_fraction = as_double(v); }, [](const C& c) { return fmt(c.test_fraction); }}},
        {"wind_source",
         {[](C& c, S v) { c.wind_source = parse_enum<WindSource>(as_string(v), kWindSources, "wind_source"); },
          [](const C& c) { return quote(enum_name(c.wind_source, kWindSources)); }}},
        {"wind_file", {[](C& c, S v) { c.wind_file = as_string(v); }, [](const C& c) { return quote(c.wind_file); }}},
        {"wind_length", {[](C& c, S v) { c.wind_length = as_uint(v); }, [](const C& c) { return std::to_string(c.wind_length); }}},
        {"wind_embed", {[](C& c, S v) { c.wind_embed = as_uint(v); }, [](const C& c) { return std::to_string(c.wind_embed); }}},
        {"horizon", {[](C& c, S v) { c.horizon = as_uint(v); }, [](const C& c) { return std::to_string(c.horizon); }}},
        {"test_len", {[](C& c, S v) { c.test_len = as_uint(v); }, [](const C& c) { return std::to_string(c.test_len); }}},
        {"validation_len", {[](C& c, S v) { c.validation_len = as_uint(v); }, [](const C& c) { return std::to_string(c.validation_len); }}},
        {"hidden_grid",
         {[](C& c, S v) {
              c.hidden_grid.clear();
              for (const auto& e : as_list(v)) c.hidden_grid.push_back(static_cast<std::size_t>(as_uint(e)));
          },
          [](const C& c) { return fmt_list(c.hidden_grid); }}},
        {"lambda_grid",
         {[](C& c, S v) {
              c.lambda_grid.clear();
              for (const auto& e : as_list(v)) c.lambda_grid.push_back(as_double(e));
          },
          [](const C& c) { return fmt_list(c.lambda_grid); }}},
        {"mnist_dir", {[](C& c, S v) { c.mnist_dir = as_string(v); }, [](const C& c) { return quote(c.mnist_dir); }}},
        {"keep", {[](C& c, S v) { c.keep = as_uint(v); }, [](const C& c) { return std::to_string(c.keep); }}},
        {"train_limit", {[](C& c, S v) { c.train_limit = as_uint(v); }, [](const C& c) { return std::to_string(c.train_limit); }}},
        {"test_limit", {[](C& c, S v) { c.test_limit = as_uint(v); }, [](const C& c) { return std::to_string(c.test_limit); }}},
        {"out_dir", {[](C& c, S v) { c.out_dir = as_string(v); }, [](const C& c) { return quote(c.out_dir); }}},
    };
    return table;
}

} // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, h] : key_table())
        if (name == key) {
            h.set(cfg, trim(value));
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        if (auto it = seen.find(key); it != seen.end())
            throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
        seen[key] = lineno;
        try {
            set_config_value(cfg, key, s.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    return parse_config(f, path);
}

std::string to_config_text(const ExperimentConfig& cfg) {
    std::string s;
    for (const auto& [name, h] : key_table()) {
        const std::string v = h.get(cfg);
        if (!v.empty()) s += name + " = " + v + "\n";
    }
    return s;
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (c.task == Task::Channel && !(c.rho > 0.0 && c.rho < 1.0))
        fail("rho must satisfy 0 < rho < 1 (got " + fmt(c.rho) + ")");
    if (!(c.lr > 0.0)) fail("lr must be positive");
    if (!(c.epsilon >= 0.0)) fail("epsilon must be >= 0");
    if (c.batch_size == 0) fail("batch_size must be positive");
    if (c.resolved_repetitions() < 1) fail("repetitions must be at least 1");
    if (c.lambda && !(*c.lambda >= 0.0)) fail("lambda must be >= 0");
    if (c.curve_stride == 0) fail("curve_stride must be positive");
    for (auto h : c.resolved_hidden())
        if (h == 0) fail("hidden layer widths must be positive");
    if (!(c.dict_lo < c.dict_hi)) fail("dict_range needs lo < hi");
    if (c.resolved_dict_size() < 2) fail("dict_size must be at least 2");
    if (!(c.kaf_init_std >= 0.0)) fail("kaf_init_std must be >= 0");
    const ActivationKind act = c.resolved_activation();
    if (c.model == Model::Rnn2R && act != ActivationKind::RealTanh && act != ActivationKind::RealReLU &&
        act != ActivationKind::Identity)
        fail("rnn_2r needs a real activation (real_tanh, real_relu or identity), got " + to_string(act));
    if (c.model == Model::CvnnFixed &&
        (act == ActivationKind::ModReLU || act == ActivationKind::SplitKAF || act == ActivationKind::ComplexKAF))
        fail("cvnn_fixed needs a fixed activation, got " + to_string(act) + " (use the matching model instead)");
    if (c.model == Model::KafComplex && c.kernel != KernelKind::ComplexGaussian &&
        c.kernel != KernelKind::IndependentGaussian)
        fail("kaf_complex supports kernel = complex_gaussian or independent");
    switch (c.task) {
    case Task::Channel:
        if (c.samples <= c.embed || c.embed == 0) fail("channel needs 0 < embed < samples");
        if (c.samples < 5) fail("channel needs at least 5 samples");
        if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) fail("test_fraction must lie in (0, 1)");
        if (std::isnan(c.snr_db)) fail("snr_db must be a number");
        break;
    case Task::Wind:
        if (c.wind_source == WindSource::File && c.wind_file.empty()) fail("wind task needs wind_file (or wind_source = \"synthetic\")");
        if (c.wind_embed == 0 || c.test_len == 0) fail("wind needs positive wind_embed and test_len");
        if (!c.hidden && c.hidden_grid.empty()) fail("hidden_grid must not be empty");
        if (!c.lambda && c.lambda_grid.empty()) fail("lambda_grid must not be empty");
        for (double l : c.lambda_grid)
            if (!(l >= 0.0)) fail("lambda_grid entries must be >= 0");
        for (auto h : c.hidden_grid)
            if (h == 0) fail("hidden_grid entries must be positive");
        if (c.validation_len == 0 && (!c.hidden || !c.lambda)) fail("grid search needs validation_len > 0");
        break;
    case Task::Mnist:
        if (c.mnist_dir.empty()) fail("mnist task needs mnist_dir");
        if (c.keep == 0) fail("keep must be positive");
        break;
    }
}

// ---------------------------------------------------------------------------
// runs
// ---------------------------------------------------------------------------

Aggregate aggregate(std::span<const double> v) {
    Aggregate a;
    if (v.empty()) return {kNaN, kNaN};
    for (double x : v) a.mean += x;
    a.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return a;
}

namespace {

template <typename F>
Aggregate aggregate_of(const std::vector<MetricsRecord>& runs, F field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(field(r));
    return aggregate(v);
}

} // namespace

Aggregate RunManifest::mse_db() const { return aggregate_of(runs, [](const MetricsRecord& r) { return r.mse_db; }); }
Aggregate RunManifest::r2() const { return aggregate_of(runs, [](const MetricsRecord& r) { return r.r2; }); }
Aggregate RunManifest::accuracy() const { return aggregate_of(runs, [](const MetricsRecord& r) { return r.accuracy; }); }

Network make_model(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t output_dim, OutputHead head,
                   const std::vector<std::size_t>& hidden, Rng& rng) {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    spec.hidden = cfg.model == Model::Lin ? std::vector<std::size_t>{} : hidden;
    spec.hidden_activation = cfg.resolved_activation();
    spec.head = head;
    spec.real_valued = cfg.model == Model::Rnn2R;
    spec.kernel = cfg.kernel;
    spec.dict_size = cfg.resolved_dict_size();
    spec.dict_lo = cfg.dict_lo;
    spec.dict_hi = cfg.dict_hi;
    spec.init.kaf_init_std = cfg.kaf_init_std;
    spec.init.modrelu_bias = cfg.modrelu_bias;
    return build_network(spec, rng);
}

namespace {

// [Re x | Im x] as a complex tensor with zero imaginary parts.
ComplexTensor split_real(const ComplexTensor& x) {
    const std::size_t rows = x.extent(0), cols = x.extent(1);
    ComplexTensor out({rows, 2 * cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = x(r, c).real();
            out(r, cols + c) = x(r, c).imag();
        }
    return out;
}

ComplexTensor merge_real(const ComplexTensor& y) {
    const std::size_t rows = y.extent(0), cols = y.extent(1) / 2;
    ComplexTensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = {y(r, c).real(), y(r, cols + c).real()};
    return out;
}

// Adapts a batch to the model's input representation.
Batch model_view(const ExperimentConfig& cfg, const Batch& b) {
    if (cfg.model != Model::Rnn2R) return b;
    Batch out;
    out.inputs = split_real(b.inputs);
    if (b.targets.rank() == 2) out.targets = split_real(b.targets);
    out.labels = b.labels;
    return out;
}

ComplexTensor predict_chunked(const Network& net, const ComplexTensor& X, std::size_t chunk = 1000) {
    const std::size_t rows = X.extent(0), cols = X.extent(1), outs = net.output_dim();
    ComplexTensor out({rows, outs});
    for (std::size_t start = 0; start < rows; start += chunk) {
        const std::size_t n = std::min(chunk, rows - start);
        ComplexTensor part({n, cols});
        std::copy_n(X.data() + start * cols, n * cols, part.data());
        const ComplexTensor y = predict(net, part);
        std::copy_n(y.data(), n * outs, out.data() + start * outs);
    }
    return out;
}

struct RegressionScores {
    double mse_db, r2;
};

RegressionScores score_regression(const ExperimentConfig& cfg, const Network& net, const Batch& test) {
    const Batch view = model_view(cfg, test);
    ComplexTensor yhat = predict_chunked(net, view.inputs);
    if (cfg.model == Model::Rnn2R) yhat = merge_real(yhat);
    const std::size_t n = test.targets.extent(0);
    std::vector<double> sq(n);
    std::vector<cplx> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = test.targets(i, 0);
        p[i] = yhat(i, 0);
        sq[i] = squared_loss(y[i], p[i]);
    }
    return {mse_db(sq), r_squared(y, p)};
}

TrainConfig train_config(const ExperimentConfig& cfg, double lambda) {
    TrainConfig tc;
    tc.iterations = cfg.resolved_iterations();
    tc.batch_size = cfg.batch_size;
    tc.lambda = lambda;
    tc.adagrad = {cfg.lr, cfg.epsilon};
    tc.backend = Backend::Parallel;
    return tc;
}

std::vector<double> strided(const std::vector<double>& curve, std::size_t stride) {
    std::vector<double> out;
    for (std::size_t i = 0; i < curve.size(); i += stride) out.push_back(curve[i]);
    return out;
}

// Trains a regression model on `train` and scores it on `eval`.
MetricsRecord fit_regression(const ExperimentConfig& cfg, const Batch& train_set, const Batch& eval,
                             const std::vector<std::size_t>& hidden, double lambda, std::uint64_t seed,
                             Network* trained = nullptr) {
    const bool real = cfg.model == Model::Rnn2R;
    const std::size_t in = train_set.inputs.extent(1), out = train_set.targets.extent(1);
    Rng init(Rng::derive(seed, 1));
    Network net = make_model(cfg, real ? 2 * in : in, real ? 2 * out : out, OutputHead::Regression, hidden, init);
    Rng sampler(Rng::derive(seed, 2));
    const Batch view = model_view(cfg, train_set);
    const TrainResult tr = train(net, view, train_config(cfg, lambda), sampler);
    MetricsRecord m;
    const auto s = score_regression(cfg, net, eval);
    m.mse_db = s.mse_db;
    m.r2 = s.r2;
    m.accuracy = kNaN;
    m.final_loss = tr.loss_curve.empty() ? kNaN : tr.loss_curve.back();
    m.loss_curve = strided(tr.loss_curve, cfg.curve_stride);
    if (trained) *trained = std::move(net);
    return m;
}

// Runs body(rep) for every repetition, in parallel when allowed. Results are
// stored by repetition index; the first failure is rethrown as RunError.
template <typename Body>
void for_each_repetition(const ExperimentConfig& cfg, int reps, Body body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
#ifdef _OPENMP
    const int threads = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (reps > 1 && threads > 1)
#endif
    for (int r = 0; r < reps; ++r) {
        try {
            body(r);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (int r = 0; r < reps; ++r) {
        if (!errors[static_cast<std::size_t>(r)]) continue;
        try {
            std::rethrow_exception(errors[static_cast<std::size_t>(r)]);
        } catch (const std::exception& e) {
            throw RunError(r, e.what());
        }
    }
}

RunManifest start_manifest(const ExperimentConfig& cfg) {
    validate(cfg);
    RunManifest m;
    m.config = cfg;
    const int reps = cfg.resolved_repetitions();
    for (int r = 0; r < reps; ++r) m.seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
    m.runs.resize(static_cast<std::size_t>(reps));
    m.models.resize(static_cast<std::size_t>(reps));
    m.dataset_fingerprints.resize(static_cast<std::size_t>(reps));
    return m;
}

} // namespace

RunManifest run_channel(const ExperimentConfig& cfg) {
    if (cfg.task != Task::Channel) throw ConfigError("run_channel: task is not channel");
    RunManifest m = start_manifest(cfg);
    const auto hidden = cfg.resolved_hidden();
    const double lambda = cfg.resolved_lambda();
    for_each_repetition(cfg, static_cast<int>(m.seeds.size()), [&](int r) {
        const std::uint64_t seed = m.seeds[static_cast<std::size_t>(r)];
        ChannelConfig cc{cfg.rho, cfg.samples, cfg.embed, cfg.snr_db, cfg.test_fraction, seed};
        RegressionDataset ds = make_channel_dataset(cc);
        preprocess_minmax(ds);
        m.dataset_fingerprints[static_cast<std::size_t>(r)] = fingerprint(ds);
        m.runs[static_cast<std::size_t>(r)] = fit_regression(cfg, take(ds, ds.train), take(ds, ds.test), hidden, lambda, seed,
                                                            &m.models[static_cast<std::size_t>(r)]);
        if (r == 0) {
            m.train_size = ds.train.size();
            m.test_size = ds.test.size();
        }
    });
    m.selected_lambda = lambda;
    m.selected_hidden = hidden.empty() ? 0 : hidden.front();
    return m;
}

RunManifest run_wind(const ExperimentConfig& cfg) {
    if (cfg.task != Task::Wind) throw ConfigError("run_wind: task is not wind");
    RunManifest m = start_manifest(cfg);
    std::vector<cplx> series;
    switch (cfg.wind_source) {
    case WindSource::File: series = load_wind_csv(cfg.wind_file); break;
    case WindSource::Synthetic: series = synthetic_wind_series(cfg.wind_length, cfg.seed); break;
    case WindSource::Predictable: series = predictable_series(cfg.wind_length); break;
    }
    RegressionDataset ds = make_wind_dataset(series, {cfg.wind_embed, cfg.horizon, cfg.test_len, cfg.validation_len});
    preprocess_minmax(ds);
    const Batch train_set = take(ds, ds.train), val = take(ds, ds.validation), test = take(ds, ds.test);
    m.train_size = ds.train.size();
    m.validation_size = ds.validation.size();
    m.test_size = ds.test.size();
    const std::string fp = fingerprint(ds);

    // Grid search on the validation slice with the first seed.
    std::vector<std::vector<std::size_t>> hidden_opts;
    if (cfg.hidden || cfg.model == Model::Lin)
        hidden_opts.push_back(cfg.resolved_hidden());
    else
        for (auto h : cfg.hidden_grid) hidden_opts.push_back({h, h});
    const std::vector<double> lambda_opts = cfg.lambda ? std::vector<double>{*cfg.lambda} : cfg.lambda_grid;
    std::vector<std::size_t> best_hidden = hidden_opts.front();
    double best_lambda = lambda_opts.front();
    if (hidden_opts.size() * lambda_opts.size() > 1) {
        const std::size_t cells = hidden_opts.size() * lambda_opts.size();
        std::vector<double> score(cells, -std::numeric_limits<double>::infinity());
        ExperimentConfig grid_cfg = cfg;
        grid_cfg.repetitions = static_cast<int>(cells);
        for_each_repetition(grid_cfg, static_cast<int>(cells), [&](int i) {
            const auto& h = hidden_opts[static_cast<std::size_t>(i) / lambda_opts.size()];
            const double l = lambda_opts[static_cast<std::size_t>(i) % lambda_opts.size()];
            score[static_cast<std::size_t>(i)] = fit_regression(cfg, train_set, val, h, l, cfg.seed).r2;
        });
        std::size_t best = 0;
        for (std::size_t i = 0; i < cells; ++i) {
            const auto& h = hidden_opts[i / lambda_opts.size()];
            m.grid_scores.emplace_back("hidden=" + fmt_list(h) + " lambda=" + fmt(lambda_opts[i % lambda_opts.size()]), score[i]);
            if (score[i] > score[best]) best = i;
        }
        best_hidden = hidden_opts[best / lambda_opts.size()];
        best_lambda = lambda_opts[best % lambda_opts.size()];
    }
    m.selected_hidden = best_hidden.empty() ? 0 : best_hidden.front();
    m.selected_lambda = best_lambda;

    for_each_repetition(cfg, static_cast<int>(m.seeds.size()), [&](int r) {
        m.dataset_fingerprints[static_cast<std::size_t>(r)] = fp;
        m.runs[static_cast<std::size_t>(r)] =
            fit_regression(cfg, train_set, test, best_hidden, best_lambda, m.seeds[static_cast<std::size_t>(r)],
                           &m.models[static_cast<std::size_t>(r)]);
    });
    return m;
}

namespace {

IdxImages first_images(IdxImages im, std::size_t limit) {
    if (limit == 0 || limit >= im.count) return im;
    im.count = limit;
    im.pixels.resize(limit * im.rows * im.cols);
    return im;
}

std::vector<std::uint8_t> first_labels(std::vector<std::uint8_t> l, std::size_t limit) {
    if (limit != 0 && limit < l.size()) l.resize(limit);
    return l;
}

} // namespace

RunManifest run_mnist(const ExperimentConfig& cfg) {
    if (cfg.task != Task::Mnist) throw ConfigError("run_mnist: task is not mnist");
    RunManifest m = start_manifest(cfg);
    const std::filesystem::path dir(cfg.mnist_dir);
    const auto train_images = first_images(read_idx_images((dir / "train-images-idx3-ubyte").string()), cfg.train_limit);
    const auto train_labels = first_labels(read_idx_labels((dir / "train-labels-idx1-ubyte").string()), cfg.train_limit);
    const auto test_images = first_images(read_idx_images((dir / "t10k-images-idx3-ubyte").string()), cfg.test_limit);
    const auto test_labels = first_labels(read_idx_labels((dir / "t10k-labels-idx1-ubyte").string()), cfg.test_limit);
    ClassificationDataset ds = mnist_fft_pipeline(train_images, train_labels, test_images, test_labels, cfg.keep);
    const MinMaxTransform t = fit_minmax(ds.train.inputs);
    t.apply(ds.train.inputs);
    t.apply(ds.test.inputs);
    m.train_size = ds.train.labels.size();
    m.test_size = ds.test.labels.size();
    const std::string fp = fingerprint(ds.train) + ":" + fingerprint(ds.test);

    const bool real = cfg.model == Model::Rnn2R;
    const OutputHead head = real ? OutputHead::RealSoftmax : OutputHead::MagnitudeSoftmax;
    const Batch train_view = model_view(cfg, ds.train), test_view = model_view(cfg, ds.test);
    const auto hidden = cfg.resolved_hidden();
    const double lambda = cfg.resolved_lambda();
    for_each_repetition(cfg, static_cast<int>(m.seeds.size()), [&](int r) {
        const std::uint64_t seed = m.seeds[static_cast<std::size_t>(r)];
        Rng init(Rng::derive(seed, 1));
        Network net = make_model(cfg, train_view.inputs.extent(1), 10, head, hidden, init);
        Rng sampler(Rng::derive(seed, 2));
        const TrainResult tr = train(net, train_view, train_config(cfg, lambda), sampler);
        MetricsRecord rec;
        rec.mse_db = kNaN;
        rec.r2 = kNaN;
        rec.accuracy = accuracy(net, predict_chunked(net, test_view.inputs), test_view.labels);
        rec.final_loss = tr.loss_curve.empty() ? kNaN : tr.loss_curve.back();
        rec.loss_curve = strided(tr.loss_curve, cfg.curve_stride);
        m.runs[static_cast<std::size_t>(r)] = std::move(rec);
        m.models[static_cast<std::size_t>(r)] = std::move(net);
        m.dataset_fingerprints[static_cast<std::size_t>(r)] = fp;
    });
    m.selected_lambda = lambda;
    m.selected_hidden = hidden.empty() ? 0 : hidden.front();
    return m;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.task) {
    case Task::Channel: return run_channel(cfg);
    case Task::Wind: return run_wind(cfg);
    case Task::Mnist: return run_mnist(cfg);
    }
    throw ConfigError("unknown task");
}

// ---------------------------------------------------------------------------
// output
// ---------------------------------------------------------------------------

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json agg(const Aggregate& a) { return {{"mean", num(a.mean)}, {"std", num(a.stddev)}}; }

} // namespace

std::string manifest_json(const RunManifest& m) {
    nlohmann::json j;
    j["version"] = m.version;
    j["task"] = to_string(m.config.task);
    j["model"] = to_string(m.config.model);
    j["config"] = to_config_text(m.config);
    j["seeds"] = m.seeds;
    j["dataset_fingerprints"] = m.dataset_fingerprints;
    j["split_sizes"] = {{"train", m.train_size}, {"validation", m.validation_size}, {"test", m.test_size}};
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
        const auto& rec = m.runs[r];
        runs.push_back({{"repetition", r},
                        {"seed", m.seeds[r]},
                        {"mse_db", num(rec.mse_db)},
                        {"r2", num(rec.r2)},
                        {"accuracy", num(rec.accuracy)},
                        {"final_loss", num(rec.final_loss)}});
    }
    j["runs"] = runs;
    j["aggregate"] = {{"mse_db", agg(m.mse_db())}, {"r2", agg(m.r2())}, {"accuracy", agg(m.accuracy())}};
    if (!m.grid_scores.empty()) {
        nlohmann::json g = nlohmann::json::array();
        for (const auto& [cell, score] : m.grid_scores) g.push_back({{"cell", cell}, {"validation_r2", num(score)}});
        j["grid_search"] = {{"cells", g}, {"selected_hidden", m.selected_hidden}, {"selected_lambda", m.selected_lambda}};
    }
    return j.dump(2);
}

void write_outputs(const RunManifest& m, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(fs::path(dir) / name);
        if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        f << std::setprecision(17);
        return f;
    };
    open("manifest.json") << manifest_json(m) << '\n';
    open("config.toml") << to_config_text(m.config);
    {
        auto f = open("metrics.csv");
        f << "repetition,seed,mse_db,r2,accuracy,final_loss\n";
        for (std::size_t r = 0; r < m.runs.size(); ++r) {
            const auto& rec = m.runs[r];
            f << r << ',' << m.seeds[r] << ',' << rec.mse_db << ',' << rec.r2 << ',' << rec.accuracy << ','
              << rec.final_loss << '\n';
        }
    }
    {
        auto f = open("loss_curve.csv");
        f << "repetition,iteration,loss\n";
        for (std::size_t r = 0; r < m.runs.size(); ++r)
            for (std::size_t i = 0; i < m.runs[r].loss_curve.size(); ++i)
                f << r << ',' << i * m.config.curve_stride << ',' << m.runs[r].loss_curve[i] << '\n';
    }
    for (std::size_t r = 0; r < m.models.size(); ++r)
        if (!m.models[r].layers.empty())
            save_network((fs::path(dir) / ("model_" + std::to_string(r) + ".txt")).string(), m.models[r]);
}

} // namespace cvkaf
