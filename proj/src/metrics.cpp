#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

std::vector<int> selection_counts(std::span<const RoundRecord> records, int n_clients) {
  std::vector<int> counts(static_cast<std::size_t>(n_clients), 0);
  for (const auto& r : records)
    for (int id : r.selected) {
      if (id < 0 || id >= n_clients) throw DomainError("selected id out of range");
      ++counts[static_cast<std::size_t>(id)];
    }
  return counts;
}

double selection_concentration(std::span<const int> counts) {
  if (counts.empty()) return 0.0;
  const double n = static_cast<double>(counts.size());
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
  double var = 0.0;
  for (int c : counts) var += (c - mean) * (c - mean);
  return std::sqrt(var / n);
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw DomainError("CV of no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  if (mean == 0.0) throw DomainError("CV undefined for zero mean");
  return std::sqrt(var / n) / mean;
}

ExperimentSummary summarize(std::span<const RoundRecord> records, int n_clients) {
  if (records.empty()) throw DomainError("cannot summarize an empty run");
  ExperimentSummary s;
  s.peak_accuracy = records.front().accuracy;
  double drift = 0.0;
  for (const auto& r : records) {
    s.peak_accuracy = std::max(s.peak_accuracy, r.accuracy);
    drift += r.mean_drift;
    if (r.heterogeneity_selected) s.heterogeneity_selected.push_back(*r.heterogeneity_selected);
    if (r.heterogeneity_all) s.heterogeneity_all.push_back(*r.heterogeneity_all);
  }
  s.final_accuracy = records.back().accuracy;
  s.stability_drop = s.peak_accuracy - s.final_accuracy;
  const std::size_t window = std::min<std::size_t>(kStableWindow, records.size());
  double tail = 0.0;
  for (std::size_t i = records.size() - window; i < records.size(); ++i) tail += records[i].accuracy;
  s.stable_accuracy = tail / static_cast<double>(window);
  s.mean_drift = drift / static_cast<double>(records.size());
  s.selection_counts = selection_counts(records, n_clients);
  s.selection_count_std = selection_concentration(s.selection_counts);
  return s;
}

double heterogeneity_from_gradients(std::span<const ModelParams> client_grads,
                                    std::span<const std::size_t> shard_sizes,
                                    std::span<const int> selected) {
  if (selected.empty()) throw DomainError("effective heterogeneity of an empty selection");
  if (client_grads.empty() || client_grads.size() != shard_sizes.size())
    throw DomainError("one gradient and one shard size per client required");
  std::vector<double> w(shard_sizes.begin(), shard_sizes.end());
  ModelParams global(client_grads.front().n_classes, client_grads.front().n_features);
  double total = 0.0;
  for (std::size_t k = 0; k < client_grads.size(); ++k) {
    global.axpy(w[k], client_grads[k]);
    total += w[k];
  }
  global.scale(1.0 / total);
  double acc = 0.0;
  for (int id : selected) {
    if (id < 0 || static_cast<std::size_t>(id) >= client_grads.size())
      throw DomainError("selected id out of range");
    acc += squared_distance(client_grads[static_cast<std::size_t>(id)], global);
  }
  return acc / static_cast<double>(selected.size());
}

double effective_heterogeneity(const Dataset& data, std::span<const ClientShard> shards,
                               const ModelParams& params, std::span<const int> selected) {
  if (selected.empty()) throw DomainError("effective heterogeneity of an empty selection");
  std::vector<ModelParams> grads;
  std::vector<std::size_t> sizes;
  for (const auto& s : shards) {
    grads.push_back(gradient(params, data, s.sample_indices));
    sizes.push_back(s.sample_indices.size());
  }
  return heterogeneity_from_gradients(grads, sizes, selected);
}

double optimal_mu_estimate(int local_epochs, double local_lr, double grad_sq, double hetero_sq,
                           double dist_sq) {
  if (local_epochs <= 0 || !(local_lr > 0.0) || !(grad_sq > 0.0) || !(hetero_sq > 0.0) ||
      !(dist_sq > 0.0))
    throw DomainError("optimal mu needs strictly positive inputs");
  return static_cast<double>(local_epochs) * local_lr * (grad_sq + hetero_sq) / dist_sq;
}

MuDiagnostic optimal_mu_diagnostic(const ExperimentResult& result, const TrainConfig& train) {
  MuDiagnostic d;
  double hetero = 0.0;
  std::size_t n = 0;
  for (const auto& r : result.records) {
    if (!r.max_grad_norm_sq || !r.heterogeneity_selected)
      throw DomainError("mu diagnostic needs a run with track_heterogeneity");
    d.grad_sq = std::max(d.grad_sq, *r.max_grad_norm_sq);
    hetero += *r.heterogeneity_selected;
    ++n;
  }
  if (n == 0) throw DomainError("mu diagnostic of an empty run");
  d.hetero_sq = hetero / static_cast<double>(n);
  d.dist_sq = squared_distance(result.initial_params, result.best_params);
  d.mu_star = optimal_mu_estimate(train.local_epochs, train.learning_rate, d.grad_sq, d.hetero_sq,
                                  d.dist_sq);
  return d;
}

std::pair<double, double> cv_pair(std::span<const ScoreComponents> components) {
  SelectorConfig add;
  add.composition = Composition::kAdditive;
  SelectorConfig mult;
  mult.composition = Composition::kMultiplicative;
  std::vector<double> s_add, s_mult;
  for (const auto& c : components) {
    s_add.push_back(compose_score(c, add));
    s_mult.push_back(compose_score(c, mult));
  }
  const auto p_mult = selection_probabilities(s_mult, 1.0);
  const auto p_add = selection_probabilities(s_add, 1.0);
  return {coefficient_of_variation(p_mult), coefficient_of_variation(p_add)};
}

CvComparison cv_comparison_experiment(int n_clients, int n_trials, Rng& rng) {
  if (n_clients < 2) throw DomainError("cv comparison needs at least two clients");
  if (n_trials < 1) throw DomainError("cv comparison needs at least one trial");
  CvComparison out;
  int mult_ge_add = 0;
  std::vector<ScoreComponents> comps(static_cast<std::size_t>(n_clients));
  for (int trial = 0; trial < n_trials; ++trial) {
    for (auto& c : comps) {
      c.info_value = uniform_open01(rng);
      c.diversity = uniform_open01(rng);
      c.momentum = uniform_open01(rng);
      c.fairness = uniform_open01(rng);
      c.staleness = uniform_open01(rng);
      c.norm_penalty = uniform_open01(rng);
    }
    const auto [cv_mult, cv_add] = cv_pair(comps);
    if (cv_mult >= cv_add) ++mult_ge_add;
    out.mean_cv_mult += cv_mult;
    out.mean_cv_add += cv_add;
  }
  out.fraction_mult_ge_add = static_cast<double>(mult_ge_add) / n_trials;
  out.mean_cv_mult /= n_trials;
  out.mean_cv_add /= n_trials;
  return out;
}

std::vector<double> drift_probe(const ExperimentConfig& base, std::span<const double> mus) {
  if (mus.empty()) throw DomainError("drift probe needs at least one mu");
  base.validate();
  const auto fed = prepare_federation(base);
  std::vector<double> out;
  for (double mu : mus) {
    auto cfg = base;
    cfg.train.proximal_mu = mu;
    const auto result = run_experiment(cfg, fed);
    double total = 0.0;
    for (const auto& r : result.records) total += r.mean_drift;
    out.push_back(total / static_cast<double>(result.records.size()));
  }
  return out;
}

BoundCheck check_exploration_bound(std::span<const RoundRecord> records,
                                   const SelectorConfig& cfg) {
  if (cfg.composition != Composition::kAdditive)
    throw DomainError("the exploration bound applies to additive scoring");
  BoundCheck out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  const double gamma = cfg.w_staleness * cfg.staleness_gamma;
  for (const auto& r : records) {
    if (r.probabilities.empty() || r.non_staleness.empty() || !r.temperature) continue;
    const auto [lo, hi] = std::minmax_element(r.non_staleness.begin(), r.non_staleness.end());
    const int n_other = static_cast<int>(r.probabilities.size()) - 1;
    for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
      const double bound = exploration_lower_bound(*lo, *hi, gamma, r.staleness[i], *r.temperature,
                                                   n_other, cfg.staleness_cap, cfg.log_base);
      const double p = r.probabilities[i];
      ++out.pairs;
      // Relative slack for the rounding of two independently evaluated
      // exponentials.
      if (p < bound * (1.0 - 1e-12)) ++out.violations;
      out.min_ratio = std::min(out.min_ratio, p / bound);
    }
  }
  return out;
}

}  // namespace fedsim
