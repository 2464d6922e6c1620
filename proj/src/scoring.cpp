#include "fedsim/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

void SelectorConfig::validate() const {
  for (double w : {w_value, w_diversity, w_momentum, w_fairness, w_staleness, w_norm})
    if (!std::isfinite(w)) throw ConfigError("selector weights must be finite");
  if (!(fairness_eta >= 0.0)) throw ConfigError("selector.eta must be >= 0");
  if (!(staleness_gamma >= 0.0)) throw ConfigError("selector.gamma must be >= 0");
  if (!(norm_alpha >= 0.0 && norm_alpha <= 1.0))
    throw ConfigError("selector.norm_alpha must lie in [0, 1]");
  if (!(base_temperature > 0.0) || !std::isfinite(base_temperature))
    throw ConfigError("selector.tau0 must be > 0");
  if (staleness_cap < 0) throw ConfigError("selector.staleness_cap must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("selector.epsilon must be > 0");
  if (subset_size < 1) throw ConfigError("m must be >= 1");
  if (!(schedule_horizon > 0.0)) throw ConfigError("selector.schedule_horizon must be > 0");
}

double log_in(LogBase base, double x) {
  return base == LogBase::kBinary ? std::log2(x) : std::log(x);
}

std::vector<double> normalized_info_values(std::span<const double> losses, double epsilon) {
  if (losses.empty()) throw DomainError("no losses to normalize");
  for (double l : losses)
    if (!std::isfinite(l)) throw DomainError("non-finite loss in information value");
  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  const double min = *lo;
  const double denom = *hi - min + epsilon;
  std::vector<double> out(losses.size());
  for (std::size_t k = 0; k < losses.size(); ++k) out[k] = (losses[k] - min) / denom;
  return out;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("JS divergence of unequal-length distributions");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
  }
  return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

double diversity_multiplier(int t, double horizon) {
  if (t < 0) throw DomainError("round must be >= 0");
  return 2.0 * (1.0 - 0.5 * std::min(static_cast<double>(t) / horizon, 1.0));
}

double diversity_score(std::span<const double> p_k, std::span<const double> p_avg, int t,
                       double horizon) {
  return js_divergence(p_k, p_avg) * diversity_multiplier(t, horizon);
}

double momentum_factor(double loss_prev2, double loss_prev1) {
  if (!(loss_prev2 > 0.0)) throw DomainError("momentum needs a positive earlier loss");
  const double m = (loss_prev2 - loss_prev1) / loss_prev2;
  return 2.0 / (1.0 + std::exp(-5.0 * m)) - 0.5;
}

double momentum_factor(std::optional<double> loss_prev2, double loss_prev1) {
  if (!loss_prev2) return 0.5;
  return momentum_factor(*loss_prev2, loss_prev1);
}

double fairness_factor(int h_k, int h_max, double eta) {
  if (h_k < 0 || h_max < 0) throw DomainError("participation counts must be >= 0");
  if (h_k > h_max) throw DomainError("participation count exceeds the maximum");
  if (h_max == 0) return 1.0;
  const double base = 1.0 + eta * static_cast<double>(h_k) / static_cast<double>(h_max);
  return 1.0 / (base * base);
}

int staleness_rounds(int t, std::optional<int> last_selected) {
  if (t < 0) throw DomainError("round must be >= 0");
  const int l = last_selected.value_or(-1);
  if (t < l) throw DomainError("round precedes the client's last selection");
  return t - l;
}

double staleness_factor(int t, std::optional<int> last_selected, double gamma, int t_max,
                        LogBase base) {
  const int delta = std::min(staleness_rounds(t, last_selected), t_max);
  return 1.0 + gamma * log_in(base, 1.0 + delta);
}

double norm_penalty(double update_norm_sq, double avg_norm_sq, double alpha) {
  if (update_norm_sq < 0.0 || avg_norm_sq < 0.0) throw DomainError("norms must be >= 0");
  const double r = avg_norm_sq > 0.0 ? update_norm_sq / avg_norm_sq : 0.0;
  return 1.0 - alpha * (2.0 / (1.0 + std::exp(-3.0 * r)) - 1.0);
}

double compose_score(const ScoreComponents& c, const SelectorConfig& cfg) {
  if (cfg.composition == Composition::kMultiplicative)
    return c.info_value * c.diversity * c.momentum * c.fairness * c.staleness * c.norm_penalty;
  return cfg.w_value * c.info_value + cfg.w_diversity * c.diversity +
         cfg.w_momentum * c.momentum + cfg.w_fairness * (c.fairness - 1.0) +
         cfg.w_staleness * (c.staleness - 1.0) + cfg.w_norm * (c.norm_penalty - 1.0);
}

double staleness_bonus(const ScoreComponents& c, const SelectorConfig& cfg) {
  return cfg.w_staleness * (c.staleness - 1.0);
}

double dynamic_temperature(int t, double tau0, double horizon) {
  if (t < 0) throw DomainError("round must be >= 0");
  if (!(tau0 > 0.0)) throw DomainError("base temperature must be > 0");
  return tau0 * (1.0 - 0.5 * std::min(static_cast<double>(t) / horizon, 1.0));
}

std::vector<double> selection_probabilities(std::span<const double> scores, double tau) {
  if (scores.empty()) throw DomainError("no scores");
  if (!(tau > 0.0)) throw DomainError("temperature must be > 0");
  for (double s : scores)
    if (!std::isfinite(s)) throw DomainError("non-finite selection score");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((scores[i] - mx) / tau);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<int> sample_subset(std::span<const double> probabilities, int m, Rng& rng) {
  const auto n = static_cast<int>(probabilities.size());
  if (m < 1) throw ConfigError("subset size must be >= 1");
  if (m > n)
    throw ConfigError("subset size " + std::to_string(m) + " exceeds " + std::to_string(n) +
                      " candidates");
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("invalid selection probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw DomainError("selection probabilities must sum to 1");

  // Gumbel noise is drawn for every entry so the stream advances by a fixed
  // amount regardless of the probabilities.
  std::vector<double> key(probabilities.size());
  for (std::size_t i = 0; i < key.size(); ++i) {
    const double g = -std::log(-std::log(uniform_open01(rng)));
    key[i] = probabilities[i] > 0.0 ? std::log(probabilities[i]) + g
                                    : -std::numeric_limits<double>::infinity();
  }
  std::vector<int> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] > key[b]; });
  std::vector<int> chosen(order.begin(), order.begin() + m);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

double exploration_lower_bound(double s_min, double s_max, double gamma, int staleness, double tau,
                               int n_other, int t_max, LogBase base) {
  if (s_min > s_max) throw DomainError("S_min exceeds S_max");
  if (!(tau > 0.0)) throw DomainError("temperature must be > 0");
  if (staleness < 0) throw DomainError("staleness must be >= 0");
  if (n_other < 1) throw DomainError("need at least one competitor");
  const double own = s_min + gamma * log_in(base, 1.0 + std::min(staleness, t_max));
  const double rival = s_max + gamma * log_in(base, 1.0 + t_max);
  // e^a / (e^a + n e^b) = 1 / (1 + n e^{(b - a)/tau})
  return 1.0 / (1.0 + static_cast<double>(n_other) * std::exp((rival - own) / tau));
}

double average_update_norm_sq(std::span<const ClientMetadata> metadata) {
  double total = 0.0;
  int count = 0;
  for (const auto& md : metadata) {
    if (md.last_update_norm_sq) {
      total += *md.last_update_norm_sq;
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

RoundScores score_round(std::span<const ClientMetadata> metadata,
                        std::span<const double> current_losses,
                        std::span<const LabelDistribution> distributions,
                        std::span<const double> p_avg, int t, const SelectorConfig& cfg) {
  const std::size_t k = metadata.size();
  if (k == 0) throw DomainError("no clients to score");
  if (current_losses.size() != k || distributions.size() != k)
    throw DomainError("one loss and one label distribution per client required");

  const auto info = normalized_info_values(current_losses, cfg.epsilon);
  int h_max = 0;
  for (const auto& md : metadata) h_max = std::max(h_max, md.participation_count);
  const double avg_norm = average_update_norm_sq(metadata);

  RoundScores out;
  out.components.resize(k);
  out.scores.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& md = metadata[i];
    auto& c = out.components[i];
    c.info_value = info[i];
    c.diversity = diversity_score(distributions[i], p_avg, t, cfg.schedule_horizon);
    // A recorded loss of exactly zero has no defined relative change; it is
    // treated like missing history.
    std::optional<double> prev;
    if (!md.loss_history.empty() && md.loss_history.back().second > 0.0)
      prev = md.loss_history.back().second;
    c.momentum = momentum_factor(prev, current_losses[i]);
    c.fairness = fairness_factor(md.participation_count, h_max, cfg.fairness_eta);
    c.staleness = staleness_factor(t, md.last_selected_round, cfg.staleness_gamma,
                                   cfg.staleness_cap, cfg.log_base);
    c.norm_penalty = norm_penalty(md.last_update_norm_sq.value_or(0.0), avg_norm, cfg.norm_alpha);
    out.scores[i] = compose_score(c, cfg);
  }
  if (cfg.composition == Composition::kAdditive) {
    out.non_staleness.resize(k);
    for (std::size_t i = 0; i < k; ++i)
      out.non_staleness[i] = out.scores[i] - staleness_bonus(out.components[i], cfg);
  }
  out.temperature = dynamic_temperature(t, cfg.base_temperature, cfg.schedule_horizon);
  out.probabilities = selection_probabilities(out.scores, out.temperature);
  return out;
}

}  // namespace fedsim
