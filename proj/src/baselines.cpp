#include "fedsim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void require_subset_size(int m, std::size_t n) {
  if (m < 1) throw ConfigError("subset size must be >= 1");
  if (static_cast<std::size_t>(m) > n)
    throw ConfigError("subset size " + std::to_string(m) + " exceeds " + std::to_string(n) +
                      " candidates");
}

}  // namespace

void BaselineConfig::validate(int n_clients, int m) const {
  if (kind == BaselineKind::kPowerOfChoice && candidate_count != 0 &&
      (candidate_count < m || candidate_count > n_clients))
    throw ConfigError("selector.candidates must satisfy m <= d <= K");
  if (kind == BaselineKind::kOortLike && !(exploration_fraction >= 0.0 && exploration_fraction <= 1.0))
    throw ConfigError("selector.exploration_fraction must lie in [0, 1]");
}

std::vector<int> random_select(std::span<const int> client_ids, int m, Rng& rng) {
  require_subset_size(m, client_ids.size());
  std::vector<int> pool(client_ids.begin(), client_ids.end());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<int> power_of_choice_select(std::span<const double> losses, int m, int d, Rng& rng) {
  const auto n = static_cast<int>(losses.size());
  require_subset_size(m, losses.size());
  if (d < m || d > n) throw ConfigError("power-of-choice needs m <= d <= K");
  std::vector<int> ids(losses.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto candidates = random_select(ids, d, rng);
  // candidates is sorted, so stable_sort keeps lower ids first among ties.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return losses[a] > losses[b]; });
  candidates.resize(static_cast<std::size_t>(m));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

std::vector<int> oort_like_select(std::span<const ClientMetadata> metadata, int m, int round,
                                  double exploration_fraction, Rng& rng) {
  require_subset_size(m, metadata.size());
  if (!(exploration_fraction >= 0.0 && exploration_fraction <= 1.0))
    throw ConfigError("exploration_fraction must lie in [0, 1]");
  if (round < 0) throw DomainError("round must be >= 0");

  const std::size_t n = metadata.size();
  std::vector<double> tie_break(n);
  for (auto& v : tie_break) v = uniform_open01(rng);

  const auto n_exploit = static_cast<int>(std::floor((1.0 - exploration_fraction) * m + 1e-9));
  std::vector<std::size_t> with_history;
  for (std::size_t i = 0; i < n; ++i)
    if (!metadata[i].loss_history.empty()) with_history.push_back(i);
  std::stable_sort(with_history.begin(), with_history.end(), [&](std::size_t a, std::size_t b) {
    return metadata[a].loss_history.back().second > metadata[b].loss_history.back().second;
  });

  std::vector<bool> taken(n, false);
  std::vector<int> chosen;
  for (std::size_t i = 0; i < with_history.size() && static_cast<int>(chosen.size()) < n_exploit; ++i) {
    taken[with_history[i]] = true;
    chosen.push_back(metadata[with_history[i]].client_id);
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) rest.push_back(i);
  std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    const int la = metadata[a].last_selected_round.value_or(-1);
    const int lb = metadata[b].last_selected_round.value_or(-1);
    return std::tie(la, tie_break[a], a) < std::tie(lb, tie_break[b], b);
  });
  for (std::size_t i = 0; static_cast<int>(chosen.size()) < m; ++i)
    chosen.push_back(metadata[rest[i]].client_id);

  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace fedsim
