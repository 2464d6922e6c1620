#include <doctest.h>

#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"

using namespace fedsim;
using doctest::Approx;

namespace {
RoundRecord rec(double acc, std::vector<int> sel) {
  RoundRecord r;
  r.accuracy = acc;
  r.selected = std::move(sel);
  return r;
}
}  // namespace

TEST_CASE("summary statistics") {
  std::vector<RoundRecord> rs;
  for (int t = 0; t < 12; ++t) rs.push_back(rec(0.1 * (t % 7), {0, 1}));
  const auto s = summarize(rs, 3);
  CHECK(s.peak_accuracy == Approx(0.6));
  CHECK(s.final_accuracy == Approx(0.4));
  CHECK(s.stability_drop == Approx(0.2));
  // Trailing ten rounds: t = 2..11 -> 2,3,4,5,6,0,1,2,3,4 tenths.
  CHECK(s.stable_accuracy == Approx(0.30));
  CHECK(s.selection_counts == std::vector<int>{12, 12, 0});
  CHECK(s.selection_count_std == Approx(std::sqrt(32.0)));
  std::vector<RoundRecord> short_run{rec(0.5, {0}), rec(0.7, {1})};
  CHECK(summarize(short_run, 2).stable_accuracy == Approx(0.6));
  CHECK_THROWS_AS(summarize(std::vector<RoundRecord>{}, 2), DomainError);
}

TEST_CASE("coefficient of variation") {
  const std::vector<double> v{1.0, 3.0};
  CHECK(coefficient_of_variation(v) == Approx(0.5));
  const std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK(coefficient_of_variation(flat) == 0.0);
}

TEST_CASE("effective heterogeneity from gradients") {
  ModelParams g0(2, 1), g1(2, 1);
  g0.weights = {1.0, 0.0};
  g1.weights = {-1.0, 0.0};
  const std::vector<ModelParams> g{g0, g1};
  const std::vector<std::size_t> equal{10, 10};
  const std::vector<int> both{0, 1}, first{0};
  CHECK(heterogeneity_from_gradients(g, equal, both) == Approx(1.0));
  const std::vector<std::size_t> skew{30, 10};
  // Global gradient 0.5: distances 0.25 and 2.25.
  CHECK(heterogeneity_from_gradients(g, skew, first) == Approx(0.25));
  CHECK(heterogeneity_from_gradients(g, skew, both) == Approx(1.25));
  CHECK_THROWS_AS(heterogeneity_from_gradients(g, skew, std::vector<int>{}), DomainError);
}

TEST_CASE("optimal proximal coefficient estimate") {
  CHECK(optimal_mu_estimate(1, 1.0, 1.0, 1.0, 2.0) == Approx(1.0));
  CHECK(optimal_mu_estimate(1, 1.0, 1.0, 1.0, 4.0) == Approx(0.5));
  CHECK_THROWS_AS(optimal_mu_estimate(1, 1.0, 1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("CV comparison basics") {
  std::vector<ScoreComponents> same(2, ScoreComponents{0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const auto [m, a] = cv_pair(same);
  CHECK(m == Approx(0.0));
  CHECK(a == Approx(0.0));
  Rng rng(1);
  const auto r = cv_comparison_experiment(12, 50, rng);
  CHECK(r.fraction_mult_ge_add >= 0.0);
  CHECK(r.fraction_mult_ge_add <= 1.0);
  CHECK_THROWS_AS(cv_comparison_experiment(1, 5, rng), DomainError);
}

TEST_CASE("exploration bound check counts violations") {
  SelectorConfig cfg;
  RoundRecord r;
  r.probabilities = {0.5, 0.5};
  r.non_staleness = {0.0, 0.0};
  r.staleness = {1, 1};
  r.temperature = 1.0;
  auto ok = check_exploration_bound(std::vector<RoundRecord>{r}, cfg);
  CHECK(ok.pairs == 2);
  CHECK(ok.violations == 0);
  r.probabilities = {1e-9, 1.0 - 1e-9};
  const auto bad = check_exploration_bound(std::vector<RoundRecord>{r}, cfg);
  CHECK(bad.violations == 1);
  cfg.composition = Composition::kMultiplicative;
  CHECK_THROWS_AS(check_exploration_bound(std::vector<RoundRecord>{r}, cfg), DomainError);
}

TEST_CASE("drift probe reports one value per coefficient") {
  ExperimentConfig cfg;
  cfg.n_clients = 4;
  cfg.subset_size = 2;
  cfg.rounds = 3;
  cfg.dataset.synthetic.n_per_class = 20;
  cfg.train.local_epochs = 1;
  const std::vector<double> mus{0.0, 10.0};
  const auto d = drift_probe(cfg, mus);
  REQUIRE(d.size() == 2);
  CHECK(d[1] < d[0]);
}

TEST_CASE("mu diagnostic needs tracked runs") {
  ExperimentConfig cfg;
  cfg.n_clients = 4;
  cfg.subset_size = 2;
  cfg.rounds = 3;
  cfg.dataset.synthetic.n_per_class = 20;
  CHECK_THROWS_AS(optimal_mu_diagnostic(run_experiment(cfg), cfg.train), DomainError);
  cfg.track_heterogeneity = true;
  const auto d = optimal_mu_diagnostic(run_experiment(cfg), cfg.train);
  CHECK(d.mu_star > 0.0);
  CHECK(std::isfinite(d.mu_star));
}
