#pragma once

#include "latentreg/dataio.hpp"
#include "latentreg/serialize.hpp"
#include "latentreg/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace latentreg {

inline constexpr const char* kVersion = "0.1.0";

struct DataSource {
  std::optional<std::filesystem::path> csv;
  std::string outcome_column = "y";
  std::optional<SynthConfig> synthetic;
};

struct PreprocessOptions {
  bool enabled = true;
  double variance_threshold = 0.2;
  double outlier_multiplier = 4.0;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 1;
};

struct DiagnosticsOptions {
  double ci_level = 0.95;
  std::size_t min_size = 5;
  int n_clusters = 21;
  std::size_t top_k = 10;
  /// Predictors with the largest |mean Z| among members enter the interaction check.
  std::size_t interaction_predictors = 5;
};

struct BenchmarkOptions {
  bool enabled = false;
  bool pca = true;
  bool plain_ae = true;
  bool stepwise = true;
  std::vector<double> screening_p{0.05, 0.10, 0.157};
  double backward_threshold = 1.0;
  double forward_threshold = 2.0;
};

struct RunConfig {
  DataSource data;
  PreprocessOptions preprocess;
  TrainConfig train;
  DiagnosticsOptions diagnostics;
  BenchmarkOptions benchmarks;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "run";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);

/// Writes <out_dir>/synthetic.csv and <out_dir>/synthetic_truth.json; returns the written paths.
std::vector<std::filesystem::path> cmd_synth(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Full pipeline. Writes every report plus manifest.json under config.output_dir.
/// On a stage failure the manifest records the stage and the error is rethrown.
void cmd_run(const RunConfig& config);

/// Consolidated summary of a completed run directory.
Json cmd_report(const std::filesystem::path& run_dir);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace latentreg
