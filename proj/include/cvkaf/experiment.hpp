#pragma once

// Declarative experiment description, the three benchmark runners and the
// run manifest.

#include "cvkaf/data.hpp"
#include "cvkaf/network.hpp"
#include "cvkaf/optim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvkaf {

inline constexpr const char* kVersion = "0.1.0";

/// Bad configuration (unknown key, malformed value, violated constraint).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class Task { Channel, Wind, Mnist };
enum class Model { Lin, Rnn2R, CvnnFixed, ModReLU, KafSplit, KafComplex };

std::string to_string(Task t);
std::string to_string(Model m);
Task parse_task(std::string_view s);
Model parse_model(std::string_view s);

enum class WindSource { File, Synthetic, Predictable };

struct ExperimentConfig {
    Task task = Task::Channel;
    Model model = Model::KafSplit;

    // architecture; empty optionals take the task default
    std::optional<std::vector<std::size_t>> hidden;
    /// Fixed activation for cvnn_fixed (default split_tanh) and rnn_2r
    /// (default real_tanh).
    std::optional<ActivationKind> activation;
    KernelKind kernel = KernelKind::IndependentGaussian;
    std::optional<int> dict_size; // 20 for kaf_split, 8 for kaf_complex
    double dict_lo = -2.0, dict_hi = 2.0;
    double kaf_init_std = 0.3;
    double modrelu_bias = 0.1;

    // optimisation
    double lr = 0.01;
    double epsilon = 1e-8;
    std::optional<std::size_t> iterations; // 10000, or 20000 for mnist
    std::size_t batch_size = 40;
    std::optional<double> lambda;          // 1e-4 (channel, mnist); wind uses the grid
    std::uint64_t seed = 1;
    std::optional<int> repetitions;        // 15 channel, 5 wind, 1 mnist
    int workers = 0;                       // 0: all available threads
    std::size_t curve_stride = 1;

    // channel
    double rho = std::numbers::sqrt2 / 2.0;
    std::size_t samples = 2000;
    std::size_t embed = 5;
    double snr_db = 13.0;
    double test_fraction = 0.15;

    // wind
    WindSource wind_source = WindSource::File;
    std::string wind_file;
    std::size_t wind_length = 5000; // synthetic / predictable series
    std::size_t wind_embed = 10, horizon = 8, test_len = 500, validation_len = 500;
    std::vector<std::size_t> hidden_grid{10, 20, 30};
    std::vector<double> lambda_grid{1e-2, 1e-3, 1e-4};

    // mnist
    std::string mnist_dir;
    std::size_t keep = 100;
    std::size_t train_limit = 0; // 0: all
    std::size_t test_limit = 0;

    std::string out_dir;

    // resolved values
    std::vector<std::size_t> resolved_hidden() const;
    ActivationKind resolved_activation() const;
    int resolved_dict_size() const;
    std::size_t resolved_iterations() const;
    double resolved_lambda() const;
    int resolved_repetitions() const;
};

/// Parses `key = value` lines (TOML subset: '#' comments, quoted strings,
/// [a, b] arrays, booleans and numbers). Unknown keys and malformed values
/// throw ConfigError with the line number.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
/// Sets one key from its textual value (also used for CLI overrides).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Task/model compatibility and numeric ranges. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// Every key with its resolved value, in the parse_config format.
std::string to_config_text(const ExperimentConfig& cfg);

// Results -------------------------------------------------------------------

struct MetricsRecord {
    double mse_db = 0.0;
    double r2 = 0.0;
    double accuracy = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_curve;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation (0 for one value)
};

Aggregate aggregate(std::span<const double> values);

struct RunManifest {
    ExperimentConfig config;
    std::string version = kVersion;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> dataset_fingerprints;
    std::vector<MetricsRecord> runs;
    /// Wind grid search: chosen hidden width and lambda, with the validation R2 of each grid cell.
    std::size_t selected_hidden = 0;
    double selected_lambda = 0.0;
    std::vector<std::pair<std::string, double>> grid_scores;
    std::size_t train_size = 0, test_size = 0, validation_size = 0;
    /// Trained network of every repetition (not part of manifest.json).
    std::vector<Network> models;

    Aggregate mse_db() const;
    Aggregate r2() const;
    Aggregate accuracy() const;
};

/// Builds the network of `cfg.model` for the task.
Network make_model(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t output_dim, OutputHead head,
                   const std::vector<std::size_t>& hidden, Rng& rng);

RunManifest run_channel(const ExperimentConfig& cfg);
RunManifest run_wind(const ExperimentConfig& cfg);
RunManifest run_mnist(const ExperimentConfig& cfg);
/// Dispatch on cfg.task.
RunManifest run_experiment(const ExperimentConfig& cfg);

/// Raised when a repetition fails; carries the repetition index.
class RunError : public std::runtime_error {
  public:
    RunError(int repetition, const std::string& what)
        : std::runtime_error("repetition " + std::to_string(repetition) + ": " + what), repetition_(repetition) {}
    int repetition() const noexcept { return repetition_; }

  private:
    int repetition_;
};

std::string manifest_json(const RunManifest& m);
/// manifest.json, metrics.csv, loss_curve.csv, config.toml and one model_<r>.txt
/// checkpoint per repetition under `dir`.
void write_outputs(const RunManifest& m, const std::string& dir);

} // namespace cvkaf
