// Acceptance run: one PASS/FAIL line per criterion.
//
//   cvkaf_acceptance            all criteria
//   cvkaf_acceptance 1 2 8      a subset
//
// CVKAF_MNIST_DIR (default /root/data/mnist) and CVKAF_WIND_FILE select the
// external datasets.

#include "cvkaf/activations.hpp"
#include "cvkaf/data.hpp"
#include "cvkaf/experiment.hpp"
#include "cvkaf/gradcheck.hpp"
#include "cvkaf/kernels.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cvkaf;

namespace {

struct Outcome {
    enum Status { Pass, Fail, Skip } status;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

cplx random_point(Rng& r, double scale) { return scale * cplx(2 * r.uniform() - 1, 2 * r.uniform() - 1); }

cplx random_disk_point(Rng& r, double radius) {
    return std::polar(radius * std::sqrt(r.uniform()), 2 * std::numbers::pi * r.uniform());
}

// 1 -------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckOptions opt;
    opt.seeds = 10;
    opt.tolerance = 1e-4;
    const auto report = run_gradcheck(opt);
    const double secs = seconds_since(t0);
    std::set<std::pair<ActivationKind, OutputHead>> covered;
    double worst = 0;
    std::string worst_name;
    for (const auto& row : report.rows) {
        covered.insert({row.kind, row.head});
        if (row.max_rel_error >= worst) {
            worst = row.max_rel_error;
            worst_name = to_string(row.kind) + "/" + to_string(row.head);
        }
    }
    std::set<ActivationKind> kinds;
    for (const auto& c : covered) kinds.insert(c.first);
    const bool ok = report.passed() && kinds.size() == 13 && covered.size() >= 2 * 13 && secs < 60;
    return verdict(ok, std::to_string(kinds.size()) + " kinds, " + std::to_string(covered.size()) +
                           " kind/head pairs, worst " + fmt("%.2e", worst) + " (" + worst_name + "), " +
                           fmt("%.1f s", secs));
}

// 2 -------------------------------------------------------------------------

Outcome kernel_properties() {
    const auto t0 = std::chrono::steady_clock::now();
    const int m = 50;
    double worst_psd = 0, worst_herm = 0;
    bool ok = true;
    for (auto kind : {KernelKind::RealGaussian, KernelKind::ComplexGaussian, KernelKind::IndependentGaussian,
                      KernelKind::Szego}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng r(seed);
            ComplexTensor pts({std::size_t(m)});
            for (std::size_t i = 0; i < pts.size(); ++i)
                pts[i] = kind == KernelKind::RealGaussian ? cplx(4 * r.uniform() - 2)
                         : kind == KernelKind::Szego      ? random_disk_point(r, 0.9)
                                                          : random_point(r, 1.0);
            const auto g = gram_matrix(kind, pts, 1.0);
            std::vector<cplx> a(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) a[i] = g[i];
            double trace = 0;
            for (int i = 0; i < m; ++i) trace += a[std::size_t(i * m + i)].real();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    const cplx x = a[std::size_t(i * m + j)], y = a[std::size_t(j * m + i)];
                    const double e = std::abs(x - std::conj(y)) / std::max(1.0, std::abs(x));
                    worst_herm = std::max(worst_herm, e);
                }
            const double lmin = oracle::min_eigenvalue(a, m);
            worst_psd = std::min(worst_psd, lmin / trace);
            ok = ok && lmin >= -1e-8 * trace;
        }
    }
    ok = ok && worst_herm <= 1e-12;
    double worst_identity = 0;
    Rng r(99);
    for (int i = 0; i < 1000; ++i) {
        const cplx z = random_point(r, 2), d = random_point(r, 2);
        const cplx b = oracle::complex_gaussian_expanded(z, d, 0.5);
        worst_identity = std::max(worst_identity, std::abs(complex_gaussian(z, d, 0.5) - b) / std::max(1.0, std::abs(b)));
    }
    ok = ok && worst_identity <= 1e-12;
    const double secs = seconds_since(t0);
    ok = ok && secs < 60;
    return verdict(ok, "min eig/trace " + fmt("%.2e", worst_psd) + ", hermitian " + fmt("%.1e", worst_herm) +
                           ", expanded identity " + fmt("%.1e", worst_identity) + ", " + fmt("%.1f s", secs));
}

// 3 -------------------------------------------------------------------------

struct Entry {
    std::string name;
    Model model;
    ActivationKind activation = ActivationKind::Identity;
    bool fixed_baseline = false;
    bool info_only = false;
};

Outcome channel_ordering() {
    std::vector<Entry> entries{
        {"lin", Model::Lin},
        {"kaf_split", Model::KafSplit},
        {"kaf_complex", Model::KafComplex},
        {"modrelu", Model::ModReLU, ActivationKind::ModReLU, true},
        {"rnn_2r", Model::Rnn2R, ActivationKind::RealTanh, false, true},
    };
    for (auto k : {ActivationKind::SplitTanh, ActivationKind::SplitReLU, ActivationKind::AMP, ActivationKind::PATanh,
                   ActivationKind::ComplexTanh, ActivationKind::CReLU, ActivationKind::Cardioid})
        entries.push_back({"cvnn_fixed/" + to_string(k), Model::CvnnFixed, k, true});

    bool ok = true;
    std::ostringstream detail;
    for (double rho : {std::numbers::sqrt2 / 2, 0.95}) {
        std::map<std::string, double> mean;
        for (const auto& e : entries) {
            ExperimentConfig cfg;
            cfg.task = Task::Channel;
            cfg.rho = rho;
            cfg.model = e.model;
            if (e.model == Model::CvnnFixed || e.model == Model::Rnn2R) cfg.activation = e.activation;
            cfg.kernel = KernelKind::IndependentGaussian;
            validate(cfg);
            const auto t0 = std::chrono::steady_clock::now();
            const RunManifest m = run_channel(cfg);
            const auto a = m.mse_db();
            mean[e.name] = a.mean;
            std::printf("  rho=%.4f %-22s %8.3f +- %.3f dB  (%zu reps, %.0f s)%s\n", rho, e.name.c_str(), a.mean,
                        a.stddev, m.runs.size(), seconds_since(t0), e.info_only ? "  [info]" : "");
            std::fflush(stdout);
            ok = ok && m.runs.size() == 15 && std::isfinite(a.mean);
        }
        for (const char* kaf : {"kaf_split", "kaf_complex"}) {
            const double v = mean[kaf];
            const bool beats_lin = v <= mean["lin"] - 2.0;
            bool beats_fixed = true;
            std::string loser;
            for (const auto& e : entries)
                if (e.fixed_baseline && !(v < mean[e.name])) {
                    beats_fixed = false;
                    loser = e.name;
                }
            if (!beats_lin || !beats_fixed) {
                ok = false;
                detail << kaf << " at rho=" << fmt("%.3f", rho)
                       << (beats_lin ? "" : " within 2 dB of lin") << (beats_fixed ? "" : " not below " + loser) << "; ";
            }
        }
        double best_fixed = 1e300;
        for (const auto& e : entries)
            if (e.fixed_baseline) best_fixed = std::min(best_fixed, mean[e.name]);
        detail << "rho=" << fmt("%.3f", rho) << ": lin " << fmt("%.2f", mean["lin"]) << ", kaf_split "
               << fmt("%.2f", mean["kaf_split"]) << ", kaf_complex " << fmt("%.2f", mean["kaf_complex"])
               << ", best baseline " << fmt("%.2f", best_fixed) << " dB; ";
    }
    return verdict(ok, detail.str());
}

// 4 -------------------------------------------------------------------------

Outcome channel_statistics() {
    bool ok = true;
    std::ostringstream detail;
    const std::size_t n = 100000;
    for (double rho : {std::numbers::sqrt2 / 2, 0.95}) {
        Rng r(2024);
        const auto s = channel_source(r, rho, n);
        double power = 0;
        cplx pseudo = 0;
        for (cplx v : s) {
            power += std::norm(v);
            pseudo += v * v;
        }
        power /= double(n);
        pseudo /= double(n);
        const double target = 1 - 2 * rho * rho;
        ok = ok && std::abs(power - 1) <= 0.05 && std::abs(pseudo - target) <= 0.05;
        detail << "rho=" << fmt("%.3f", rho) << " E|s|^2=" << fmt("%.4f", power) << " E[s^2]=" << fmt("%.4f", pseudo.real())
               << fmt("%+.4fi", pseudo.imag()) << " (want " << fmt("%.4f", target) << "); ";

        ChannelConfig cc;
        cc.rho = rho;
        cc.samples = n;
        Rng g(cc.seed);
        const auto src = channel_source(g, cc.rho, cc.samples);
        const auto clean = channel_nonlinearity(channel_filter(src));
        const auto noisy = add_awgn(clean, cc.snr_db, g);
        double ps = 0, pn = 0;
        for (std::size_t i = 4; i < clean.size(); ++i) {
            ps += std::norm(clean[i]);
            pn += std::norm(noisy[i] - clean[i]);
        }
        const double snr = 10 * std::log10(ps / pn);
        ok = ok && std::abs(snr - 13.0) <= 0.5;
        detail << "SNR " << fmt("%.3f", snr) << " dB; ";
    }
    return verdict(ok, detail.str());
}

// 5 -------------------------------------------------------------------------

Outcome mnist() {
    const char* env = std::getenv("CVKAF_MNIST_DIR");
    const std::string dir = env ? env : "/root/data/mnist";
    if (!std::filesystem::exists(std::filesystem::path(dir) / "train-images-idx3-ubyte"))
        return fail("MNIST files not found in " + dir + " (set CVKAF_MNIST_DIR)");
    std::map<Model, double> acc;
    for (Model model : {Model::KafSplit, Model::ModReLU}) {
        ExperimentConfig cfg;
        cfg.task = Task::Mnist;
        cfg.mnist_dir = dir;
        cfg.model = model;
        validate(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        const RunManifest m = run_mnist(cfg);
        acc[model] = m.runs.at(0).accuracy;
        std::printf("  mnist %-10s accuracy %.4f  (%.0f s)\n", to_string(model).c_str(), acc[model], seconds_since(t0));
        std::fflush(stdout);
    }
    const bool ok = acc[Model::KafSplit] >= 0.95 && acc[Model::KafSplit] > acc[Model::ModReLU];
    return verdict(ok, "kaf_split " + fmt("%.4f", acc[Model::KafSplit]) + ", modrelu " +
                           fmt("%.4f", acc[Model::ModReLU]));
}

// 6 -------------------------------------------------------------------------

Outcome wind() {
    ExperimentConfig cfg;
    cfg.task = Task::Wind;
    cfg.model = Model::KafSplit;
    if (const char* file = std::getenv("CVKAF_WIND_FILE")) {
        cfg.wind_file = file;
        validate(cfg);
        const RunManifest m = run_wind(cfg);
        const auto a = m.r2();
        return verdict(a.mean >= 0.40, "wind file " + cfg.wind_file + ": R2 " + fmt("%.4f", a.mean) + " +- " +
                                           fmt("%.4f", a.stddev) + " (hidden " + std::to_string(m.selected_hidden) +
                                           ", lambda " + fmt("%g", m.selected_lambda) + ")");
    }
    cfg.wind_source = WindSource::Predictable;
    validate(cfg);
    const RunManifest m = run_wind(cfg);
    const auto a = m.r2();
    double worst = 1;
    for (const auto& r : m.runs) worst = std::min(worst, r.r2);
    return verdict(worst >= 0.98, "no wind file (CVKAF_WIND_FILE unset); predictable series R2 " +
                                      fmt("%.4f", a.mean) + ", worst of " + std::to_string(m.runs.size()) +
                                      " repetitions " + fmt("%.4f", worst) + " (hidden " +
                                      std::to_string(m.selected_hidden) + ", lambda " + fmt("%g", m.selected_lambda) + ")");
}

// 7 -------------------------------------------------------------------------

Outcome determinism() {
    bool ok = true;
    std::ostringstream detail;
    std::vector<ExperimentConfig> configs;
    for (Model model : {Model::KafComplex, Model::CvnnFixed, Model::Rnn2R}) {
        ExperimentConfig c;
        c.model = model;
        c.iterations = 1500;
        c.repetitions = 3;
        c.seed = 77;
        configs.push_back(c);
    }
    {
        ExperimentConfig c;
        c.task = Task::Wind;
        c.wind_source = WindSource::Synthetic;
        c.wind_length = 1500;
        c.model = Model::ModReLU;
        c.hidden_grid = {2, 4};
        c.lambda_grid = {1e-3};
        c.iterations = 500;
        c.repetitions = 2;
        configs.push_back(c);
    }
    for (const auto& cfg : configs) {
        validate(cfg);
        const RunManifest a = run_experiment(cfg);
        std::istringstream text(to_config_text(a.config));
        const ExperimentConfig again = parse_config(text);
        const RunManifest b = run_experiment(again);
        const bool same = manifest_json(a) == manifest_json(b);
        // a single worker must give the same bits
        ExperimentConfig one = again;
        one.workers = 1;
        const RunManifest c = run_experiment(one);
        bool bitwise = a.runs.size() == c.runs.size();
        for (std::size_t i = 0; bitwise && i < a.runs.size(); ++i)
            bitwise = std::memcmp(&a.runs[i].mse_db, &c.runs[i].mse_db, sizeof(double)) == 0 &&
                      std::memcmp(&a.runs[i].r2, &c.runs[i].r2, sizeof(double)) == 0 &&
                      a.runs[i].loss_curve == c.runs[i].loss_curve;
        ok = ok && same && bitwise;
        detail << to_string(cfg.task) << "/" << to_string(cfg.model) << (same ? " identical" : " manifest differs")
               << (bitwise ? "" : ", single worker differs")
               << "; ";
    }
    return verdict(ok, detail.str());
}

// 8 -------------------------------------------------------------------------

Outcome analytic_values() {
    std::vector<std::string> bad;
    auto near = [&](const std::string& what, cplx got, cplx want) {
        if (!(std::abs(got - want) <= 1e-12)) bad.push_back(what);
    };
    near("h(3)", channel_taps()[2], cplx(0.864, -0.864));
    near("gamma(4/19)", bandwidth_rule(4.0 / 19.0), 361.0 / 96.0);

    near("modrelu(1,-0.5)", modrelu(1.0, -0.5), 0.5);
    near("modrelu(0.3,-0.5)", modrelu(0.3, -0.5), 0.0);
    near("modrelu(2.5,0)", modrelu(2.5, 0.0), 2.5);
    near("modrelu(2i,1)", modrelu(cplx(0, 2), 1.0), cplx(0, 3));
    near("modrelu(3+4i,-1)", modrelu(cplx(3, 4), -1.0), cplx(2.4, 3.2));
    near("modrelu(0,0.7)", modrelu(0.0, 0.7), 0.0);

    near("cardioid(2)", cardioid(2.0), 2.0);
    near("cardioid(-2)", cardioid(-2.0), 0.0);
    near("cardioid(i)", cardioid(cplx(0, 1)), cplx(0, 0.5));
    near("cardioid(1+i)", cardioid(cplx(1, 1)), 0.5 * (1 + std::numbers::sqrt2 / 2) * cplx(1, 1));

    near("crelu(1+2i)", crelu(cplx(1, 2)), cplx(1, 2));
    near("crelu(-1+2i)", crelu(cplx(-1, 2)), 0.0);
    near("crelu(1-0.5i)", crelu(cplx(1, -0.5)), 0.0);
    near("crelu(-1-i)", crelu(cplx(-1, -1)), 0.0);

    std::string detail = "h(3) = " + fmt("%.3f", channel_taps()[2].real()) + fmt("%+.3fi", channel_taps()[2].imag()) +
                         ", gamma(4/19) = " + fmt("%.6f", bandwidth_rule(4.0 / 19.0)) + ", case tables";
    for (const auto& b : bad) detail += "; wrong: " + b;
    return verdict(bad.empty(), detail);
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient fidelity", gradient_fidelity},   {"kernel properties", kernel_properties},
        {"channel identification", channel_ordering}, {"channel statistics", channel_statistics},
        {"mnist", mnist},                           {"wind", wind},
        {"determinism", determinism},               {"analytic values", analytic_values},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        if (o.status == Outcome::Fail) ++failures;
        std::printf("criterion %d %s: %s  %s\n", id, criteria[i].first.c_str(),
                    o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Fail ? "FAIL" : "SKIP",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
