#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/scoring.hpp"

using namespace fedsim;
using doctest::Approx;

// Reference values computed independently with 30-digit arithmetic.
namespace oracle {
constexpr double kMomentumAt02 = 0.962117157;  // 2 / (1 + e^-1) - 0.5
constexpr double kFairnessFull = 0.591715976;  // 1.3^-2
constexpr double kStaleness5 = 2.254231628;    // 1 + 0.7 ln 6
constexpr double kNormAtOne = 0.547425873;     // 1 - 0.5 (2 / (1 + e^-3) - 1)
constexpr double kLn2 = 0.693147180560;
constexpr double kBoundExample = 0.0208254466579;
}  // namespace oracle

TEST_CASE("min-max normalization of losses") {
  const std::vector<double> l{1.0, 2.0, 3.0};
  const auto v = normalized_info_values(l, 1e-8);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == Approx(0.5).epsilon(1e-6));
  CHECK(v[2] == Approx(1.0).epsilon(1e-6));
  CHECK(v[2] < 1.0);

  const std::vector<double> same{0.7, 0.7, 0.7};
  for (double x : normalized_info_values(same, 1e-8)) CHECK(x == 0.0);

  const std::vector<double> bad{1.0, NAN};
  CHECK_THROWS_AS(normalized_info_values(bad, 1e-8), DomainError);
  CHECK_THROWS_AS(normalized_info_values(std::vector<double>{}, 1e-8), DomainError);
}

TEST_CASE("normalized values stay in [0, 1) for arbitrary losses") {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(12);
    for (auto& x : l) x = u(rng);
    for (double x : normalized_info_values(l, 1e-8)) {
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
    }
  }
}

TEST_CASE("Jensen-Shannon divergence") {
  const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
  CHECK(js_divergence(p, q) == Approx(oracle::kLn2).epsilon(1e-12));
  CHECK(js_divergence(p, p) == 0.0);
  const std::vector<double> a{0.2, 0.3, 0.5}, b{0.6, 0.1, 0.3};
  CHECK(js_divergence(a, b) == Approx(js_divergence(b, a)).epsilon(1e-15));
  CHECK_THROWS_AS(js_divergence(a, p), DomainError);

  Rng rng(3);
  std::gamma_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(10), y(10);
    for (auto& v : x) v = g(rng) + 1e-12;
    for (auto& v : y) v = g(rng) + 1e-12;
    const double sx = std::accumulate(x.begin(), x.end(), 0.0);
    const double sy = std::accumulate(y.begin(), y.end(), 0.0);
    for (auto& v : x) v /= sx;
    for (auto& v : y) v /= sy;
    const double d = js_divergence(x, y);
    CHECK(d >= 0.0);
    CHECK(d <= std::log(2.0) + 1e-12);
  }
}

TEST_CASE("diversity multiplier decays from 2 to 1") {
  CHECK(diversity_multiplier(0) == 2.0);
  CHECK(diversity_multiplier(50) == Approx(1.5));
  CHECK(diversity_multiplier(100) == 1.0);
  CHECK(diversity_multiplier(250) == 1.0);
  const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0};
  CHECK(diversity_score(p, q, 0) == Approx(2.0 * oracle::kLn2));
  CHECK_THROWS_AS(diversity_multiplier(-1), DomainError);
}

TEST_CASE("momentum factor") {
  CHECK(momentum_factor(std::optional<double>{}, 1.3) == 0.5);
  CHECK(momentum_factor(2.0, 2.0) == 0.5);
  CHECK(momentum_factor(1.0, 0.8) == Approx(oracle::kMomentumAt02).epsilon(1e-9));
  CHECK(momentum_factor(1.0, 0.5) > momentum_factor(1.0, 0.9));
  CHECK(momentum_factor(1.0, 5.0) > -0.5);
  CHECK(momentum_factor(1.0, 0.0) < 1.5);
  CHECK_THROWS_AS(momentum_factor(0.0, 1.0), DomainError);
}

TEST_CASE("fairness factor") {
  CHECK(fairness_factor(10, 10, 0.3) == Approx(oracle::kFairnessFull).epsilon(1e-9));
  CHECK(fairness_factor(0, 10, 0.3) == 1.0);
  CHECK(fairness_factor(0, 0, 0.3) == 1.0);
  for (int h = 1; h <= 10; ++h) CHECK(fairness_factor(h, 10, 0.3) < fairness_factor(h - 1, 10, 0.3));
  CHECK_THROWS_AS(fairness_factor(11, 10, 0.3), DomainError);
}

TEST_CASE("staleness factor") {
  CHECK(staleness_factor(5, 0, 0.7, 20) == Approx(oracle::kStaleness5).epsilon(1e-9));
  CHECK(staleness_rounds(0, std::nullopt) == 1);
  CHECK(staleness_rounds(7, 7) == 0);
  CHECK(staleness_factor(7, 7, 0.7, 20) == 1.0);
  CHECK(staleness_factor(100, 0, 0.7, 20) == staleness_factor(40, 0, 0.7, 20));
  CHECK(staleness_factor(5, 0, 0.7, 20, LogBase::kBinary) ==
        Approx(1.0 + 0.7 * std::log2(6.0)).epsilon(1e-12));
  CHECK_THROWS_AS(staleness_rounds(3, 5), DomainError);
}

TEST_CASE("norm penalty") {
  CHECK(norm_penalty(2.0, 2.0, 0.5) == Approx(oracle::kNormAtOne).epsilon(1e-9));
  CHECK(norm_penalty(0.0, 2.0, 0.5) == 1.0);
  CHECK(norm_penalty(3.0, 0.0, 0.5) == 1.0);
  CHECK(norm_penalty(1e9, 1.0, 0.5) >= 0.5);
  CHECK_THROWS_AS(norm_penalty(-1.0, 1.0, 0.5), DomainError);
}

TEST_CASE("additive and multiplicative composition") {
  ScoreComponents c{0.4, 0.2, 0.9, 0.8, 1.5, 0.7};
  SelectorConfig add;
  CHECK(compose_score(c, add) == Approx(0.4 + 0.2 + 0.9 + (0.8 - 1) + (1.5 - 1) + (0.7 - 1)));
  SelectorConfig mult;
  mult.composition = Composition::kMultiplicative;
  CHECK(compose_score(c, mult) == Approx(0.4 * 0.2 * 0.9 * 0.8 * 1.5 * 0.7));
  c.info_value = 0.0;
  CHECK(compose_score(c, mult) == 0.0);
  CHECK(compose_score(c, add) > 0.0);
  ScoreComponents neutral;
  neutral.momentum = 0.0;
  CHECK(compose_score(neutral, add) == 0.0);
}

TEST_CASE("temperature schedule") {
  CHECK(dynamic_temperature(0, 2.0) == 2.0);
  CHECK(dynamic_temperature(50, 2.0) == Approx(1.5));
  CHECK(dynamic_temperature(100, 2.0) == 1.0);
  CHECK(dynamic_temperature(1000, 2.0) == 1.0);
  for (int t = 1; t < 120; ++t) CHECK(dynamic_temperature(t, 2.0) <= dynamic_temperature(t - 1, 2.0));
}

TEST_CASE("softmax probabilities") {
  const std::vector<double> s{0.0, 1.0, 2.0};
  const auto p = selection_probabilities(s, 1.0);
  const double z = 1 + std::exp(1.0) + std::exp(2.0);
  CHECK(p[0] == Approx(1 / z));
  CHECK(p[2] == Approx(std::exp(2.0) / z));
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == Approx(1.0).epsilon(1e-12));
  const std::vector<double> big{1000.0, 1001.0};
  const auto q = selection_probabilities(big, 0.5);
  CHECK(std::isfinite(q[0]));
  CHECK(q[1] > q[0]);
  CHECK_THROWS_AS(selection_probabilities(s, 0.0), DomainError);
}

TEST_CASE("subset sampling without replacement") {
  std::vector<double> p(12, 1.0 / 12);
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = sample_subset(p, 6, rng);
    REQUIRE(s.size() == 6);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
  const auto all = sample_subset(p, 12, rng);
  CHECK(all.size() == 12);
  CHECK_THROWS_AS(sample_subset(p, 13, rng), ConfigError);
  std::vector<double> bad(12, 0.1);
  CHECK_THROWS_AS(sample_subset(bad, 3, rng), DomainError);

  // Zero-probability entries are never chosen.
  std::vector<double> skewed(5, 0.0);
  skewed[1] = 0.5;
  skewed[3] = 0.5;
  CHECK(sample_subset(skewed, 2, rng) == std::vector<int>{1, 3});
}

TEST_CASE("single-draw inclusion frequency follows the probabilities") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  std::vector<int> hits(4, 0);
  Rng rng(5);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(sample_subset(p, 1, rng)[0])];
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(static_cast<double>(hits[i]) / n == Approx(p[i]).epsilon(0.05));
}

TEST_CASE("exploration lower bound") {
  CHECK(exploration_lower_bound(0.0, 1.0, 0.7, 10, 1.0, 11, 20) ==
        Approx(oracle::kBoundExample).epsilon(1e-10));
  CHECK(exploration_lower_bound(0.0, 1.0, 0.7, 20, 1.0, 11, 20) >
        exploration_lower_bound(0.0, 1.0, 0.7, 10, 1.0, 11, 20));
  CHECK_THROWS_AS(exploration_lower_bound(1.0, 0.0, 0.7, 1, 1.0, 11, 20), DomainError);
}

TEST_CASE("bound holds for random additive score vectors") {
  Rng rng(99);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  std::uniform_int_distribution<int> stale(0, 40);
  const double gamma = 0.7;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 12;
    std::vector<double> base(k), scores(k);
    std::vector<int> delta(k);
    for (int i = 0; i < k; ++i) {
      base[static_cast<std::size_t>(i)] = u(rng);
      delta[static_cast<std::size_t>(i)] = stale(rng);
      scores[static_cast<std::size_t>(i)] =
          base[static_cast<std::size_t>(i)] +
          gamma * std::log(1.0 + std::min(delta[static_cast<std::size_t>(i)], 20));
    }
    const double tau = 0.5 + u(rng) * 0.3 + 0.3;
    const auto p = selection_probabilities(scores, tau);
    const auto [lo, hi] = std::minmax_element(base.begin(), base.end());
    for (int i = 0; i < k; ++i)
      CHECK(p[static_cast<std::size_t>(i)] >=
            exploration_lower_bound(*lo, *hi, gamma, delta[static_cast<std::size_t>(i)], tau,
                                    k - 1, 20) *
                (1 - 1e-12));
  }
}

TEST_CASE("score_round on a small federation") {
  std::vector<ClientMetadata> md(3);
  for (int i = 0; i < 3; ++i) md[static_cast<std::size_t>(i)].client_id = i;
  md[0].loss_history = {{0, 2.0}};
  md[0].participation_count = 1;
  md[0].last_selected_round = 0;
  md[0].last_update_norm_sq = 4.0;
  md[1].loss_history = {{0, 1.0}};
  md[2].loss_history = {{0, 0.0}};
  const std::vector<double> losses{1.0, 1.5, 0.5};
  const std::vector<LabelDistribution> dist{{1.0, 0.0}, {0.5, 0.5}, {0.0, 1.0}};
  const std::vector<double> p_avg{0.5, 0.5};
  SelectorConfig cfg;
  cfg.subset_size = 2;
  const auto rs = score_round(md, losses, dist, p_avg, 1, cfg);
  CHECK(rs.temperature == Approx(1.99));
  CHECK(rs.components[0].fairness == Approx(1 / 1.69));
  CHECK(rs.components[1].fairness == 1.0);
  CHECK(rs.components[0].staleness == Approx(1 + 0.7 * std::log(2.0)));
  CHECK(rs.components[1].staleness == Approx(1 + 0.7 * std::log(3.0)));
  CHECK(rs.components[0].momentum == Approx(2 / (1 + std::exp(-2.5)) - 0.5));
  CHECK(rs.components[2].momentum == 0.5);  // zero earlier loss: neutral
  CHECK(rs.components[0].norm_penalty == Approx(oracle::kNormAtOne));
  CHECK(rs.components[1].norm_penalty == 1.0);
  CHECK(rs.components[1].diversity == 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(rs.non_staleness[i] ==
          Approx(rs.scores[i] - (rs.components[i].staleness - 1.0)).epsilon(1e-12));
  CHECK(std::accumulate(rs.probabilities.begin(), rs.probabilities.end(), 0.0) ==
        Approx(1.0).epsilon(1e-12));
}

TEST_CASE("selector config validation") {
  SelectorConfig c;
  CHECK_NOTHROW(c.validate());
  c.base_temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.norm_alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
