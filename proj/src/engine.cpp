#include "fedsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

SelectorConfig ExperimentConfig::hetero_config() const {
  auto cfg = std::get<SelectorConfig>(selector);
  cfg.subset_size = subset_size;
  return cfg;
}

std::string ExperimentConfig::selector_name() const {
  if (const auto* h = std::get_if<SelectorConfig>(&selector))
    return h->composition == Composition::kAdditive ? "hetero_select_additive"
                                                     : "hetero_select_multiplicative";
  switch (std::get<BaselineConfig>(selector).kind) {
    case BaselineKind::kRandom:
      return "random";
    case BaselineKind::kPowerOfChoice:
      return "power_of_choice";
    case BaselineKind::kOortLike:
      return "oort_like";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (n_clients < 2) throw ConfigError("K must be >= 2");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (subset_size < 1 || subset_size > n_clients) throw ConfigError("m must satisfy 1 <= m <= K");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("dirichlet_alpha must be > 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  train.validate();
  if (is_hetero_select())
    hetero_config().validate();
  else
    std::get<BaselineConfig>(selector).validate(n_clients, subset_size);
  if (dataset.source == DatasetSpec::Source::kCsv && dataset.csv_path.empty())
    throw ConfigError("dataset.path is required for csv datasets");
}

Federation prepare_federation(const ExperimentConfig& cfg) {
  const auto seed = cfg.master_seed;
  Dataset full = cfg.dataset.source == DatasetSpec::Source::kCsv
                     ? load_csv(cfg.dataset.csv_path)
                     : generate_synthetic(derive_seed(seed, {stream::kData}), cfg.dataset.synthetic);
  Federation fed;
  std::tie(fed.train, fed.test) =
      stratified_split(full, cfg.test_fraction, derive_seed(seed, {stream::kSplit}));
  fed.shards = dirichlet_partition(fed.train, cfg.n_clients, cfg.dirichlet_alpha,
                                   derive_seed(seed, {stream::kPartition}));
  std::vector<double> sizes;
  for (const auto& s : fed.shards) {
    fed.distributions.push_back(label_distribution(fed.train, s, fed.train.n_classes));
    sizes.push_back(static_cast<double>(s.sample_indices.size()));
  }
  fed.p_avg = cfg.p_avg_weighting == AverageWeighting::kClientUniform
                  ? average_distribution(fed.distributions)
                  : weighted_average_distribution(fed.distributions, sizes);
  return fed;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, prepare_federation(cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Federation& fed) {
  cfg.validate();
  const int k_clients = cfg.n_clients;
  const auto k = static_cast<std::size_t>(k_clients);
  if (fed.shards.size() != k) throw DomainError("federation does not match K");
  const auto seed = cfg.master_seed;
  const bool hetero = cfg.is_hetero_select();
  const SelectorConfig hetero_cfg = hetero ? cfg.hetero_config() : SelectorConfig{};

  ExperimentResult result;
  result.initial_params =
      init_params(fed.train.n_features, fed.train.n_classes, derive_seed(seed, {stream::kInit}));
  ModelParams global = result.initial_params;
  result.best_params = global;
  double best_acc = -1.0;

  result.metadata.resize(k);
  for (std::size_t i = 0; i < k; ++i) result.metadata[i].client_id = static_cast<int>(i);

  std::vector<int> all_ids(k);
  for (std::size_t i = 0; i < k; ++i) all_ids[i] = static_cast<int>(i);
  std::vector<std::size_t> shard_sizes(k);
  for (std::size_t i = 0; i < k; ++i) shard_sizes[i] = fed.shards[i].sample_indices.size();
  const auto test_idx = all_indices(fed.test);

  for (int t = 0; t < cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;

    // Scouting: every client evaluates the current global model.
    rec.scouting_losses.assign(k, 0.0);
    std::vector<ModelParams> client_grads(cfg.track_heterogeneity ? k : 0);
    parallel_for(k, cfg.threads, [&](std::size_t i) {
      const auto& idx = fed.shards[i].sample_indices;
      rec.scouting_losses[i] = cfg.track_heterogeneity
                                   ? loss_and_gradient(global, fed.train, idx, client_grads[i])
                                   : loss(global, fed.train, idx);
    });
    for (std::size_t i = 0; i < k; ++i)
      if (!std::isfinite(rec.scouting_losses[i]))
        throw NumericError("round " + std::to_string(t) + ": non-finite scouting loss on client " +
                               std::to_string(i),
                           static_cast<int>(i), t);

    // Selection.
    Rng select_rng = make_stream(seed, {stream::kSelect, static_cast<std::uint64_t>(t)});
    if (hetero) {
      auto rs = score_round(result.metadata, rec.scouting_losses, fed.distributions, fed.p_avg, t,
                            hetero_cfg);
      rec.selected = sample_subset(rs.probabilities, cfg.subset_size, select_rng);
      rec.components = std::move(rs.components);
      rec.scores = std::move(rs.scores);
      rec.non_staleness = std::move(rs.non_staleness);
      rec.temperature = rs.temperature;
      rec.probabilities = std::move(rs.probabilities);
      rec.staleness.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        rec.staleness[i] = staleness_rounds(t, result.metadata[i].last_selected_round);
    } else {
      const auto& b = std::get<BaselineConfig>(cfg.selector);
      switch (b.kind) {
        case BaselineKind::kRandom:
          rec.selected = random_select(all_ids, cfg.subset_size, select_rng);
          break;
        case BaselineKind::kPowerOfChoice: {
          const int d = b.candidate_count > 0 ? b.candidate_count
                                              : std::min(k_clients, 2 * cfg.subset_size);
          rec.selected = power_of_choice_select(rec.scouting_losses, cfg.subset_size, d, select_rng);
          break;
        }
        case BaselineKind::kOortLike:
          rec.selected = oort_like_select(result.metadata, cfg.subset_size, t,
                                          b.exploration_fraction, select_rng);
          break;
      }
    }

    if (cfg.track_heterogeneity) {
      rec.heterogeneity_selected = heterogeneity_from_gradients(client_grads, shard_sizes, rec.selected);
      rec.heterogeneity_all = heterogeneity_from_gradients(client_grads, shard_sizes, all_ids);
      double mx = 0.0;
      for (const auto& g : client_grads) mx = std::max(mx, squared_norm(g));
      rec.max_grad_norm_sq = mx;
    }

    // Local training from the same global snapshot. Each client owns an rng
    // stream keyed by (seed, client, round) and a result slot.
    const std::size_t m = rec.selected.size();
    std::vector<ModelParams> local(m);
    parallel_for(m, cfg.threads, [&](std::size_t j) {
      const int client = rec.selected[j];
      Rng rng = make_stream(seed, {stream::kTrain, static_cast<std::uint64_t>(client),
                                   static_cast<std::uint64_t>(t)});
      try {
        local[j] = local_train_fedprox(global, fed.train, fed.shards[static_cast<std::size_t>(client)],
                                       cfg.train, rng);
      } catch (const NumericError& e) {
        throw NumericError("round " + std::to_string(t) + ": " + e.what(), client, t);
      }
    });

    std::vector<double> norms(m);
    for (std::size_t j = 0; j < m; ++j) norms[j] = squared_distance(local[j], global);
    double drift = 0.0;
    for (double v : norms) drift += v;
    rec.mean_drift = drift / static_cast<double>(m);

    const auto agg_start = std::chrono::steady_clock::now();
    if (cfg.weighted_aggregation) {
      std::vector<double> w(m);
      for (std::size_t j = 0; j < m; ++j)
        w[j] = static_cast<double>(shard_sizes[static_cast<std::size_t>(rec.selected[j])]);
      global = fedavg_aggregate(local, w);
    } else {
      global = fedavg_aggregate(local);
    }
    rec.aggregation_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - agg_start).count();
    if (!global.all_finite())
      throw NumericError("round " + std::to_string(t) + ": aggregated model is non-finite", -1, t);

    update_metadata(result.metadata, t, rec.selected, norms, rec.scouting_losses);

    rec.accuracy = accuracy(global, fed.test, test_idx);
    if (rec.accuracy > best_acc) {
      best_acc = rec.accuracy;
      result.best_params = global;
    }
    result.records.push_back(std::move(rec));
  }
  result.final_params = std::move(global);
  return result;
}

void update_metadata(std::vector<ClientMetadata>& metadata, int round,
                     std::span<const int> selected, std::span<const double> update_norms_sq,
                     std::span<const double> scouting_losses) {
  if (scouting_losses.size() != metadata.size())
    throw DomainError("one scouting loss per client required");
  if (update_norms_sq.size() != selected.size())
    throw DomainError("one update norm per selected client required");
  for (int id : selected)
    if (id < 0 || static_cast<std::size_t>(id) >= metadata.size())
      throw DomainError("unknown client id " + std::to_string(id));
  for (std::size_t i = 0; i < metadata.size(); ++i)
    metadata[i].loss_history.emplace_back(round, scouting_losses[i]);
  for (std::size_t j = 0; j < selected.size(); ++j) {
    auto& md = metadata[static_cast<std::size_t>(selected[j])];
    ++md.participation_count;
    md.last_selected_round = round;
    md.last_update_norm_sq = update_norms_sq[j];
  }
}

ModelParams fedavg_aggregate(std::span<const ModelParams> local_params) {
  if (local_params.empty()) throw DomainError("nothing to aggregate");
  const std::vector<double> ones(local_params.size(), 1.0);
  return fedavg_aggregate(local_params, ones);
}

ModelParams fedavg_aggregate(std::span<const ModelParams> local_params,
                             std::span<const double> weights) {
  if (local_params.empty()) throw DomainError("nothing to aggregate");
  if (weights.size() != local_params.size()) throw DomainError("one weight per model required");
  const auto& first = local_params.front();
  ModelParams out(first.n_classes, first.n_features);
  double total = 0.0;
  for (std::size_t i = 0; i < local_params.size(); ++i) {
    if (!local_params[i].same_shape(first)) throw DomainError("parameter shape mismatch");
    out.axpy(weights[i], local_params[i]);
    total += weights[i];
  }
  if (!(total > 0.0)) throw DomainError("aggregation weights sum to zero");
  for (auto& w : out.weights) w /= total;
  for (auto& b : out.bias) b /= total;
  return out;
}

}  // namespace fedsim
