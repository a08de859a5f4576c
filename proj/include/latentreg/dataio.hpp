#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace latentreg {

/// Tabular data as loaded, before standardization. `values` holds every
/// column including the outcome.
struct RawTable {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;
  std::string outcome_column;
  /// Rows removed so far (by the loader or a filter).
  std::size_t dropped_rows = 0;
  /// Per-row subgroup id (0 = none) for synthetic cohorts; empty otherwise.
  std::vector<int> truth_labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index outcome_index() const;
  std::vector<Eigen::Index> predictor_indices() const;
};

/// Per-column affine standardization, x_std = (x - mean) / sd.
struct Standardization {
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  Standardization standardization;
  std::vector<int> truth_labels;
  /// Row index of each subject in the table handed to split_standardize.
  std::vector<Eigen::Index> source_rows;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct PlantedSubgroup {
  Eigen::Index size = 0;
  Eigen::Index affected_factor = 0;
  double slope_delta = 0.0;
};

struct SynthConfig {
  Eigen::Index n = 200;
  Eigen::Index p = 60;
  Eigen::Index d_true = 4;
  double noise_sd = 0.5;
  std::vector<PlantedSubgroup> subgroups;
  std::uint64_t seed = 1;
  /// Loading scale per factor; empty means 1 for every factor.
  std::vector<double> factor_strength;
  /// Outcome coefficients on the factors; empty means seeded draws.
  std::vector<double> outcome_coefficients;
  /// Outcome noise; negative means "use noise_sd".
  double outcome_noise_sd = -1.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Synthetic cohort plus the ground truth that generated it.
struct SynthData {
  RawTable table;
  Eigen::MatrixXd factors;   // n x d_true
  Eigen::MatrixXd loadings;  // d_true x p
  Eigen::VectorXd outcome_coefficients;
  /// Factor index each predictor column loads on.
  std::vector<Eigen::Index> block_of_predictor;
};

RawTable load_csv(const std::filesystem::path& path, const std::string& outcome_column);
void write_csv(const RawTable& table, const std::filesystem::path& path);

RawTable variance_filter(const RawTable& table, double threshold = 0.2);
RawTable outlier_filter(const RawTable& table, double multiplier = 4.0);

/// Runs variance_filter then outlier_filter, the order the pipeline requires.
RawTable preprocess(const RawTable& table, double variance_threshold = 0.2,
                    double iqr_multiplier = 4.0);

/// Shuffled split; means and population sds are estimated on the train rows only.
std::pair<Dataset, Dataset> split_standardize(const RawTable& table, const SplitSpec& spec);

/// Applies an existing standardization to predictor/outcome columns.
Dataset apply_standardization(const RawTable& table, const std::vector<Eigen::Index>& rows,
                              const Standardization& standardization);

SynthData generate_synthetic(const SynthConfig& cfg);

/// Quantile with linear interpolation between order statistics (R type 7).
double quantile_linear(std::vector<double> values, double prob);

/// Shortest round-trip decimal form.
std::string format_number(double v);

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace latentreg
