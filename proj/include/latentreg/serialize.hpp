#pragma once

#include "latentreg/benchmarks.hpp"
#include "latentreg/dataio.hpp"
#include "latentreg/diagnostics.hpp"
#include "latentreg/localreg.hpp"
#include "latentreg/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace latentreg {

using Json = nlohmann::json;

Json to_json(const KernelConfig& k);
Json to_json(const TrainConfig& c);
Json to_json(const SynthConfig& c);
/// Strict readers: unknown keys raise ConfigError naming the key; missing keys keep defaults.
KernelConfig kernel_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);
SynthConfig synth_config_from_json(const Json& j);

Json params_to_json(const MlpParams& params);
MlpParams params_from_json(const Json& j);

/// Architecture, row-major weights, biases, seed and training configuration.
Json model_to_json(const Autoencoder& model, const TrainConfig& config);
void save_model(const Autoencoder& model, const TrainConfig& config, const std::filesystem::path& path);
Autoencoder load_model(const std::filesystem::path& path, TrainConfig* config = nullptr);

void write_text(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

/// epoch,rec,pred,reg,total
void write_loss_history(const std::vector<LossComponents>& history, const std::filesystem::path& path);

/// One row per patient: latent coordinates, local coefficients, bandwidth, llr.
void write_bundle(const LocalFitBundle& bundle, const std::filesystem::path& path);

/// Synthetic table as CSV plus a sidecar with seed, configuration and truth labels.
void write_synthetic(const SynthData& data, const SynthConfig& config, const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path);

/// Term, coefficient, standard error, t, p and CI bounds; a leading comment carries R^2.
void write_global_model(const GlobalLatentModel& global, const std::filesystem::path& path);

/// patient,dim,delta,flagged,direction (dims are 1-based)
void write_deviations(const std::vector<DeviationRecord>& records, const std::filesystem::path& path);

/// Per-dim scatter data: latent value, outcome, delta, flagged.
void write_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                     const std::vector<DeviationRecord>& records, Eigen::Index dim, const std::filesystem::path& path);

/// dim,rank,variable,t,label
void write_latent_names(const std::vector<std::vector<NamedVariable>>& named, const std::filesystem::path& path);

/// variable,cluster
void write_clusters(const ClusterAssignment& clusters, const std::vector<std::string>& names,
                    const std::filesystem::path& path);

/// patient,rank_sd_dim1..; then one mean row. Alignments go to a second file.
void write_stability(const StabilityTable& table, const std::vector<std::uint64_t>& seeds,
                     const std::filesystem::path& path, const std::filesystem::path& alignment_path);

void write_stepwise_report(const StepwiseModel& model, const std::filesystem::path& path);

Json subgroup_to_json(const SubgroupReport& s);

}  // namespace latentreg
