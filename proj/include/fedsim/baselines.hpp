#pragma once

#include <span>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/scoring.hpp"

namespace fedsim {

enum class BaselineKind { kRandom, kPowerOfChoice, kOortLike };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kRandom;
  int candidate_count = 0;  // power-of-choice d; 0 means min(K, 2m)
  double exploration_fraction = 0.2;  // oort-like only

  void validate(int n_clients, int m) const;  // throws ConfigError
};

// Uniform sample of m ids without replacement. Result is sorted.
std::vector<int> random_select(std::span<const int> client_ids, int m, Rng& rng);

// Power-of-Choice: d uniform candidates, keep the m with the highest loss
// (ties to the lower id). Result is sorted.
std::vector<int> power_of_choice_select(std::span<const double> losses, int m, int d, Rng& rng);

// Greedy top-(1 - f) m by last recorded loss, remainder filled with the
// least recently selected clients (never-selected first, random among ties).
// Clients without loss history are never exploited. Result is sorted.
std::vector<int> oort_like_select(std::span<const ClientMetadata> metadata, int m, int round,
                                  double exploration_fraction, Rng& rng);

}  // namespace fedsim
