#pragma once

#include <span>
#include <vector>

#include "fedsim/data_partition.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/scoring.hpp"

namespace fedsim {

struct ExperimentSummary {
  double peak_accuracy = 0.0;
  double final_accuracy = 0.0;
  double stable_accuracy = 0.0;  // mean of the trailing min(10, T) rounds
  double stability_drop = 0.0;   // peak - final
  double selection_count_std = 0.0;
  std::vector<int> selection_counts;
  double mean_drift = 0.0;
  std::vector<double> heterogeneity_selected;  // per round, when tracked
  std::vector<double> heterogeneity_all;
};

inline constexpr int kStableWindow = 10;

ExperimentSummary summarize(std::span<const RoundRecord> records, int n_clients);

std::vector<int> selection_counts(std::span<const RoundRecord> records, int n_clients);

// Population standard deviation of per-client selection counts.
double selection_concentration(std::span<const int> counts);

// Population std / mean.
double coefficient_of_variation(std::span<const double> values);

// B^2_sel = (1/m) sum_{k in selected} ||grad f_k - grad f||^2 where f_k is
// client k's mean loss and f the mean loss over the union of all shards.
double effective_heterogeneity(const Dataset& data, std::span<const ClientShard> shards,
                               const ModelParams& params, std::span<const int> selected);

// Same quantity from precomputed full-batch client gradients; the union
// gradient is their shard-size weighted mean.
double heterogeneity_from_gradients(std::span<const ModelParams> client_grads,
                                    std::span<const std::size_t> shard_sizes,
                                    std::span<const int> selected);

// mu* = E * lr * (G^2 + B_sel^2) / ||w_0 - w*||^2.
double optimal_mu_estimate(int local_epochs, double local_lr, double grad_sq, double hetero_sq,
                           double dist_sq);

struct MuDiagnostic {
  double grad_sq = 0.0;    // max observed squared client gradient norm
  double hetero_sq = 0.0;  // mean selected-subset heterogeneity
  double dist_sq = 0.0;    // ||w_0 - w_best||^2
  double mu_star = 0.0;
};

// Requires a run with track_heterogeneity enabled.
MuDiagnostic optimal_mu_diagnostic(const ExperimentResult& result, const TrainConfig& train);

struct CvComparison {
  double fraction_mult_ge_add = 0.0;
  double mean_cv_mult = 0.0;
  double mean_cv_add = 0.0;
};

// Monte-Carlo comparison of softmax concentration under the two score
// compositions, with six iid Uniform[0,1] components per client, unit
// weights and tau = 1.
CvComparison cv_comparison_experiment(int n_clients, int n_trials, Rng& rng);

// CV of softmax(scores) at tau = 1 for both compositions of the given
// components.
std::pair<double, double> cv_pair(std::span<const ScoreComponents> components);

// Mean ||w_k - w_t||^2 over all local updates of a run, one run per mu
// with everything else (including the seed) fixed.
std::vector<double> drift_probe(const ExperimentConfig& base, std::span<const double> mus);

struct BoundCheck {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double min_ratio = 0.0;  // min over pairs of p_k / bound
};

// Compares every realized selection probability of an additive HeteRo-Select
// run against the starvation lower bound evaluated with that round's S_min,
// S_max, temperature and candidate count - 1.
BoundCheck check_exploration_bound(std::span<const RoundRecord> records,
                                   const SelectorConfig& cfg);

}  // namespace fedsim
