#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/baselines.hpp"
#include "fedsim/data_partition.hpp"
#include "fedsim/model.hpp"
#include "fedsim/scoring.hpp"

namespace fedsim {

struct DatasetSpec {
  enum class Source { kSynthetic, kCsv };
  Source source = Source::kSynthetic;
  SyntheticSpec synthetic;
  std::string csv_path;
};

using SelectorChoice = std::variant<SelectorConfig, BaselineConfig>;

struct ExperimentConfig {
  std::string label = "experiment";
  DatasetSpec dataset;
  int n_clients = 12;
  double dirichlet_alpha = 0.1;
  int rounds = 80;
  int subset_size = 6;
  SelectorChoice selector = SelectorConfig{};
  TrainConfig train;
  double test_fraction = 0.2;
  std::uint64_t master_seed = 1;
  int threads = 1;
  // Sample-count weighted FedAvg instead of the plain 1/m mean.
  bool weighted_aggregation = false;
  AverageWeighting p_avg_weighting = AverageWeighting::kClientUniform;
  // Per-round full-batch client gradients for the heterogeneity diagnostics.
  bool track_heterogeneity = false;

  bool is_hetero_select() const { return std::holds_alternative<SelectorConfig>(selector); }
  // Selector config with subset_size synced to this experiment's m.
  SelectorConfig hetero_config() const;
  std::string selector_name() const;
  void validate() const;  // throws ConfigError
};

// Data side of one experiment, fully determined by the config and seed.
struct Federation {
  Dataset train;
  Dataset test;
  std::vector<ClientShard> shards;
  std::vector<LabelDistribution> distributions;
  LabelDistribution p_avg;
};

Federation prepare_federation(const ExperimentConfig& cfg);

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  // Selector internals, present for HeteRo-Select only.
  std::vector<ScoreComponents> components;
  std::vector<double> scores;
  std::vector<double> non_staleness;
  std::optional<double> temperature;
  std::vector<double> probabilities;
  std::vector<int> staleness;  // t - l_k at selection time, per client
  std::vector<double> scouting_losses;
  double accuracy = 0.0;
  double mean_drift = 0.0;  // mean ||w_k - w_global||^2 over selected
  double aggregation_seconds = 0.0;
  std::optional<double> heterogeneity_selected;
  std::optional<double> heterogeneity_all;
  std::optional<double> max_grad_norm_sq;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  ModelParams initial_params;
  ModelParams final_params;
  ModelParams best_params;  // highest test accuracy seen
  std::vector<ClientMetadata> metadata;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Federation& fed);

// Appends every client's scouting loss, then bumps h_k, l_k and the update
// norm for the selected clients. update_norms_sq is aligned with selected.
void update_metadata(std::vector<ClientMetadata>& metadata, int round,
                     std::span<const int> selected, std::span<const double> update_norms_sq,
                     std::span<const double> scouting_losses);

// Unweighted element-wise mean.
ModelParams fedavg_aggregate(std::span<const ModelParams> local_params);
ModelParams fedavg_aggregate(std::span<const ModelParams> local_params,
                             std::span<const double> weights);

}  // namespace fedsim
