#pragma once

// Reproducible experiments: generate a bundle, fit or solve it, evaluate the
// results. Every command is a pure function of its config and inputs, down to
// the bytes it writes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catpose/fitter.hpp"
#include "catpose/gradcheck.hpp"
#include "catpose/io.hpp"
#include "catpose/metrics.hpp"
#include "catpose/synthgen.hpp"

namespace catpose {

struct GenerationConfig {
  std::vector<std::string> categories{"can", "bowl", "box", "laptop", "camera"};
  int count = 10;  // instances per category
  InstanceOptions instance;
  int prior_population = 16;
  int prior_points = 128;
};

/// Optional overrides applied on top of the preset.
struct FitOverrides {
  std::optional<int> max_steps;
  std::optional<std::string> init_scheme;
  std::optional<int> fit_points;
  std::optional<double> step_size;
  std::optional<LossWeights> weights;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  GenerationConfig generation;
  std::string preset = "D";
  FitOverrides fit;
  RansacConfig solve{200, 0.02, 4, 0};
  /// "fail" stops at the first diverged instance, "skip" records it.
  std::string on_divergence = "fail";
  int jobs = 1;
};

/// Throws ValidationError naming the offending key.
void validate_experiment(const ExperimentConfig& cfg);

/// Reads a JSON config; absent keys keep their defaults, unknown keys are
/// rejected. Throws IoError / ValidationError.
ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig parse_experiment(const std::string& json_text);
/// Fully resolved config as pretty JSON text.
std::string experiment_json(const ExperimentConfig& cfg);

/// Preset with the overrides applied; the fit seed is set per instance.
FitConfig resolved_fit_config(const ExperimentConfig& cfg);

/// Builds the bundle in memory; instance ids are "<category>-<k>" with k
/// zero-padded to four digits.
Bundle generate_bundle(const ExperimentConfig& cfg);

/// Writes the bundle plus config.json into `out`.
void cmd_gen(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct CommandSummary {
  int instances = 0;
  int failed = 0;
  double median_rotation_error = 0.0;     // degrees, over successful fits
  double median_translation_error = 0.0;  // meters
};

/// Fits every instance of the bundle and writes the results JSON to `out`.
CommandSummary cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& bundle,
                       const std::filesystem::path& out);
/// Two-stage baseline on the stored ground-truth coordinates.
CommandSummary cmd_solve(const ExperimentConfig& cfg, const std::filesystem::path& bundle,
                         const std::filesystem::path& out);

/// Writes metrics.json and metrics.csv into `out`. Results are matched to the
/// bundle by instance id; a missing, extra or duplicate id is a
/// ValidationError.
MetricsReport cmd_eval(const std::filesystem::path& results, const std::filesystem::path& bundle,
                       const std::filesystem::path& out);

/// Prints the table to stdout and, when `out` is non-empty, writes it as JSON.
/// Returns true when every term passes.
bool cmd_gradcheck(const GradcheckOptions& opt, const std::filesystem::path& out);

}  // namespace catpose
