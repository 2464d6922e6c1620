#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedsim/data_partition.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Server-side bookkeeping for one client.
struct ClientMetadata {
  int client_id = 0;
  std::vector<std::pair<int, double>> loss_history;  // (round, scouting loss)
  int participation_count = 0;
  std::optional<int> last_selected_round;   // nullopt = never selected
  std::optional<double> last_update_norm_sq;  // ||w_k - w_global||^2 of last update
};

// The six per-client score components for one round.
struct ScoreComponents {
  double info_value = 0.0;    // V' in [0, 1]
  double diversity = 0.0;     // D in [0, 2 ln 2]
  double momentum = 0.5;      // M in [-0.5, 1.5]
  double fairness = 1.0;      // F in (0, 1]
  double staleness = 1.0;     // St >= 1
  double norm_penalty = 1.0;  // N in [1 - alpha, 1]
};

enum class Composition { kAdditive, kMultiplicative };
enum class LogBase { kNatural, kBinary };

struct SelectorConfig {
  double w_value = 1.0;
  double w_diversity = 1.0;
  double w_momentum = 1.0;
  double w_fairness = 1.0;
  double w_staleness = 1.0;
  double w_norm = 1.0;
  double fairness_eta = 0.3;
  double staleness_gamma = 0.7;
  double norm_alpha = 0.5;
  double base_temperature = 2.0;
  int staleness_cap = 20;
  double epsilon = 1e-8;
  Composition composition = Composition::kAdditive;
  int subset_size = 6;
  // Rounds over which the diversity multiplier and temperature decay.
  double schedule_horizon = 100.0;
  LogBase log_base = LogBase::kNatural;

  void validate() const;  // throws ConfigError
};

double log_in(LogBase base, double x);

// (l_k - min) / (max - min + eps) for every client.
std::vector<double> normalized_info_values(std::span<const double> losses, double epsilon);

// Jensen-Shannon divergence in nats, 0 log 0 := 0.
double js_divergence(std::span<const double> p, std::span<const double> q);

// 2 * (1 - 0.5 * min(t / horizon, 1)): decays from 2 to 1.
double diversity_multiplier(int t, double horizon = 100.0);
double diversity_score(std::span<const double> p_k, std::span<const double> p_avg, int t,
                       double horizon = 100.0);

// 2 / (1 + exp(-5 m)) - 0.5 with m the relative loss drop prev2 -> prev1.
double momentum_factor(double loss_prev2, double loss_prev1);
// Neutral 0.5 when fewer than two losses are available.
double momentum_factor(std::optional<double> loss_prev2, double loss_prev1);

// (1 + eta * h_k / h_max)^-2, or 1 when nobody has participated yet.
double fairness_factor(int h_k, int h_max, double eta);

// Rounds since last selection; never-selected clients count from round -1.
int staleness_rounds(int t, std::optional<int> last_selected);

// 1 + gamma * log(1 + min(t - l_k, T_max)).
double staleness_factor(int t, std::optional<int> last_selected, double gamma, int t_max,
                        LogBase base = LogBase::kNatural);

// 1 - alpha * (2 / (1 + exp(-3 r)) - 1), r = update_norm_sq / avg_norm_sq
// (r = 0 when avg_norm_sq is 0).
double norm_penalty(double update_norm_sq, double avg_norm_sq, double alpha);

double compose_score(const ScoreComponents& c, const SelectorConfig& cfg);

// The part of an additive score contributed by staleness, w_st * (St - 1).
double staleness_bonus(const ScoreComponents& c, const SelectorConfig& cfg);

// tau0 * (1 - 0.5 * min(t / horizon, 1)).
double dynamic_temperature(int t, double tau0, double horizon = 100.0);

// softmax(scores / tau) with max subtraction.
std::vector<double> selection_probabilities(std::span<const double> scores, double tau);

// m distinct ids drawn without replacement by Gumbel-top-k over log-probs.
// Zero-probability entries are only taken once every positive entry is.
std::vector<int> sample_subset(std::span<const double> probabilities, int m, Rng& rng);

// Starvation lower bound on a client's single-draw selection probability:
//   e^{a/tau} / (e^{a/tau} + n_other * e^{b/tau})
// with a = S_min + gamma log(1 + min(staleness, T_max)) and
//      b = S_max + gamma log(1 + T_max).
double exploration_lower_bound(double s_min, double s_max, double gamma, int staleness, double tau,
                               int n_other, int t_max, LogBase base = LogBase::kNatural);

// Everything the selector computed for one round.
struct RoundScores {
  std::vector<ScoreComponents> components;
  std::vector<double> scores;
  // S_k minus its staleness bonus (additive mode only; empty otherwise).
  std::vector<double> non_staleness;
  double temperature = 0.0;
  std::vector<double> probabilities;
};

// Builds all six components for every client from a metadata snapshot and
// this round's scouting losses, then composes and softmaxes them.
RoundScores score_round(std::span<const ClientMetadata> metadata,
                        std::span<const double> current_losses,
                        std::span<const LabelDistribution> distributions,
                        std::span<const double> p_avg, int t, const SelectorConfig& cfg);

// Mean of last_update_norm_sq over clients that have one (0 if none do).
double average_update_norm_sq(std::span<const ClientMetadata> metadata);

}  // namespace fedsim
