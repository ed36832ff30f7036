// cvkaf: run experiments, check gradients, export datasets.

#include "cvkaf/data.hpp"
#include "cvkaf/experiment.hpp"
#include "cvkaf/gradcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace cvkaf;

namespace {

constexpr int kOk = 0, kValidation = 1, kRuntime = 2;

void print_summary(const RunManifest& m) {
    std::printf("task=%s model=%s repetitions=%zu train=%zu test=%zu\n", to_string(m.config.task).c_str(),
                to_string(m.config.model).c_str(), m.runs.size(), m.train_size, m.test_size);
    if (!m.grid_scores.empty())
        std::printf("grid search: hidden=%zu lambda=%g\n", m.selected_hidden, m.selected_lambda);
    switch (m.config.task) {
    case Task::Channel: {
        const auto a = m.mse_db();
        std::printf("test MSE: %.3f +- %.3f dB\n", a.mean, a.stddev);
        break;
    }
    case Task::Wind: {
        const auto a = m.r2();
        std::printf("test R2: %.4f +- %.4f\n", a.mean, a.stddev);
        break;
    }
    case Task::Mnist: {
        const auto a = m.accuracy();
        std::printf("test accuracy: %.4f +- %.4f\n", a.mean, a.stddev);
        break;
    }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complex-valued networks with kernel activation functions"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Train and evaluate one experiment");
    std::string config_path, task, model, out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    run->add_option("--config", config_path, "Config file (key = value lines)")->required();
    run->add_option("--task", task, "channel | wind | mnist");
    run->add_option("--model", model, "lin | rnn_2r | cvnn_fixed | modrelu | kaf_split | kaf_complex");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--out", out, "Output directory");
    run->add_option("--set", sets, "Override a config key, key=value (repeatable)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    GradcheckOptions gopt;
    std::string corrupt;
    gc->add_option("--seeds", gopt.seeds, "Number of seeds")->capture_default_str();
    gc->add_option("--seed", gopt.seed, "First seed")->capture_default_str();
    gc->add_option("--tolerance", gopt.tolerance, "Maximum relative error")->capture_default_str();
    gc->add_option("--corrupt", corrupt, "Scale the analytic gradient of this activation (negative control)")
        ->group("");

    // dataset export
    auto* ds = app.add_subcommand("dataset", "Dataset utilities");
    ds->require_subcommand(1);
    auto* ex = ds->add_subcommand("export", "Write a generated dataset as CSV");
    std::string ex_config, ex_out, ex_split = "all";
    ex->add_option("--config", ex_config, "Config file")->required();
    ex->add_option("--out", ex_out, "CSV path (stdout when omitted)");
    ex->add_option("--split", ex_split, "all | train | validation | test")->check(CLI::IsMember({"all", "train", "validation", "test"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kValidation;
    }

    try {
        if (*run) {
            ExperimentConfig cfg = load_config(config_path);
            if (!task.empty()) cfg.task = parse_task(task);
            if (!model.empty()) cfg.model = parse_model(model);
            if (seed) cfg.seed = *seed;
            if (!out.empty()) cfg.out_dir = out;
            for (const auto& s : sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
                set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
            }
            validate(cfg);
            const RunManifest m = run_experiment(cfg);
            print_summary(m);
            if (!cfg.out_dir.empty()) {
                write_outputs(m, cfg.out_dir);
                std::printf("wrote %s\n", cfg.out_dir.c_str());
            }
            return kOk;
        }
        if (*gc) {
            if (!corrupt.empty()) gopt.corrupt = parse_activation_kind(corrupt);
            const auto report = run_gradcheck(gopt);
            for (ActivationKind k : kAllActivationKinds) {
                const double e = report.max_error(k);
                std::printf("%-14s max relative error %.3e  %s\n", to_string(k).c_str(), e,
                            e <= report.tolerance ? "ok" : "FAILED");
            }
            if (!report.passed()) {
                for (const auto& row : report.rows)
                    if (row.max_rel_error > report.tolerance)
                        std::fprintf(stderr, "gradient mismatch: %s (%s head, %s)\n", to_string(row.kind).c_str(),
                                     to_string(row.head).c_str(), row.worst_block.c_str());
                return kRuntime;
            }
            return kOk;
        }
        if (*ex) {
            ExperimentConfig cfg = load_config(ex_config);
            validate(cfg);
            RegressionDataset d;
            if (cfg.task == Task::Channel) {
                d = make_channel_dataset({cfg.rho, cfg.samples, cfg.embed, cfg.snr_db, cfg.test_fraction, cfg.seed});
            } else if (cfg.task == Task::Wind) {
                std::vector<cplx> series = cfg.wind_source == WindSource::File ? load_wind_csv(cfg.wind_file)
                                           : cfg.wind_source == WindSource::Synthetic
                                               ? synthetic_wind_series(cfg.wind_length, cfg.seed)
                                               : predictable_series(cfg.wind_length);
                d = make_wind_dataset(series, {cfg.wind_embed, cfg.horizon, cfg.test_len, cfg.validation_len});
            } else {
                throw ConfigError("dataset export supports the channel and wind tasks");
            }
            std::vector<std::size_t> idx;
            if (ex_split == "all")
                for (std::size_t i = 0; i < d.size(); ++i) idx.push_back(i);
            else
                idx = ex_split == "train" ? d.train : ex_split == "validation" ? d.validation : d.test;
            const Batch b = take(d, idx);
            if (ex_out.empty()) {
                write_csv(std::cout, b);
            } else {
                std::ofstream f(ex_out);
                if (!f) throw std::runtime_error("cannot write " + ex_out);
                write_csv(f, b);
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kOk;
}
