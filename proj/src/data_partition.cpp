#include "fedsim/data_partition.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Dirichlet(alpha * 1_k) draw. Gamma variates are generated in log space
// (Gamma(a) = Gamma(a + 1) * U^(1/a)) so tiny alphas cannot underflow to an
// all-zero vector.
std::vector<double> sample_dirichlet(int k, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::vector<double> log_g(static_cast<std::size_t>(k));
  for (auto& lg : log_g) {
    const double g = gamma(rng);
    lg = std::log(g) + std::log(uniform_open01(rng)) / alpha;
  }
  const double mx = *std::max_element(log_g.begin(), log_g.end());
  std::vector<double> p(log_g.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_g[i] - mx);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

// Largest-remainder apportionment of `n` items by proportions `p`.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& p) {
  std::vector<std::size_t> counts(p.size());
  std::vector<double> frac(p.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double exact = p[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Floating error can leave assigned slightly above or below n.
  for (std::size_t i = 0; assigned < n; i = (i + 1) % order.size(), ++assigned) ++counts[order[i]];
  while (assigned > n) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  return counts;
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw DomainError("dataset has no samples");
  if (n_classes < 2) throw DomainError("dataset needs at least two classes");
  if (n_features == 0 || features.size() != labels.size() * n_features)
    throw DomainError("feature matrix shape does not match label count");
  for (int y : labels)
    if (y < 0 || y >= n_classes) throw DomainError("label out of range: " + std::to_string(y));
  for (double v : features)
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
}

Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec) {
  if (spec.n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (spec.n_features < 2) throw ConfigError("n_features must be >= 2");
  if (spec.n_per_class < 10) throw ConfigError("n_per_class must be >= 10");
  if (!(spec.class_separation > 0.0)) throw ConfigError("class_separation must be > 0");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = spec.n_features;

  std::vector<double> centroids(static_cast<std::size_t>(spec.n_classes) * d);
  for (int c = 0; c < spec.n_classes; ++c) {
    double norm_sq = 0.0;
    auto* mu = centroids.data() + static_cast<std::size_t>(c) * d;
    do {
      norm_sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        mu[j] = normal(rng);
        norm_sq += mu[j] * mu[j];
      }
    } while (norm_sq == 0.0);
    const double scale = spec.class_separation / std::sqrt(norm_sq);
    for (std::size_t j = 0; j < d; ++j) mu[j] *= scale;
  }

  Dataset ds;
  ds.n_features = d;
  ds.n_classes = spec.n_classes;
  const std::size_t n = spec.n_per_class * static_cast<std::size_t>(spec.n_classes);
  ds.features.reserve(n * d);
  ds.labels.reserve(n);
  for (int c = 0; c < spec.n_classes; ++c) {
    const auto* mu = centroids.data() + static_cast<std::size_t>(c) * d;
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      for (std::size_t j = 0; j < d; ++j) ds.features.push_back(mu[j] + normal(rng));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, int n_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset " + path.string() + " is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw ConfigError("dataset header must be f0,...,f{d-1},label");
  const std::size_t d = header.size() - 1;

  Dataset ds;
  ds.n_features = d;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + 1)
      throw ConfigError("dataset line " + std::to_string(line_no) + ": expected " +
                        std::to_string(d + 1) + " columns");
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      const auto& s = cells[j];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("dataset line " + std::to_string(line_no) + ": bad feature '" + s + "'");
      ds.features.push_back(v);
    }
    int y = 0;
    const auto& s = cells[d];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), y, 10);
    if (ec != std::errc{} || ptr != s.data() + s.size() || y < 0)
      throw ConfigError("dataset line " + std::to_string(line_no) + ": bad label '" + s + "'");
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  ds.n_classes = n_classes > 0 ? n_classes : max_label + 1;
  try {
    ds.validate();
  } catch (const DomainError& e) {
    throw ConfigError("dataset " + path.string() + ": " + e.what());
  }
  return ds;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.n_features = dataset.n_features;
  out.n_classes = dataset.n_classes;
  out.features.reserve(indices.size() * dataset.n_features);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= dataset.size()) throw DomainError("subset index out of range");
    const auto r = dataset.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(dataset.labels[i]);
  }
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.n_classes));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    n_test = std::min(n_test, members.size());
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<long>(n_test));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<long>(n_test), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (train_idx.empty() || test_idx.empty())
    throw ConfigError("test_fraction leaves an empty train or test split");
  return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, int n_clients, double alpha,
                                             std::uint64_t seed) {
  if (n_clients < 2) throw ConfigError("K must be >= 2");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("dirichlet_alpha must be > 0");
  if (static_cast<std::size_t>(n_clients) > dataset.size())
    throw ConfigError("K exceeds the number of samples");

  Rng rng(seed);
  const auto k = static_cast<std::size_t>(n_clients);
  std::vector<ClientShard> shards(k);
  for (std::size_t c = 0; c < k; ++c) shards[c].client_id = static_cast<int>(c);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.n_classes));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

  for (auto& members : by_class) {
    const auto p = sample_dirichlet(n_clients, alpha, rng);
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    const auto counts = apportion(members.size(), p);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < k; ++c) {
      auto& dst = shards[c].sample_indices;
      dst.insert(dst.end(), members.begin() + static_cast<long>(offset),
                 members.begin() + static_cast<long>(offset + counts[c]));
      offset += counts[c];
    }
  }

  for (;;) {
    auto empty = std::find_if(shards.begin(), shards.end(),
                              [](const ClientShard& s) { return s.sample_indices.empty(); });
    if (empty == shards.end()) break;
    auto largest = std::max_element(shards.begin(), shards.end(), [](const auto& a, const auto& b) {
      return a.sample_indices.size() < b.sample_indices.size();
    });
    empty->sample_indices.push_back(largest->sample_indices.back());
    largest->sample_indices.pop_back();
  }

  for (auto& s : shards) std::sort(s.sample_indices.begin(), s.sample_indices.end());
  return shards;
}

LabelDistribution label_distribution(const Dataset& dataset, const ClientShard& shard,
                                     int n_classes) {
  if (shard.sample_indices.empty())
    throw DomainError("label distribution of empty shard " + std::to_string(shard.client_id));
  if (n_classes < 1) throw DomainError("n_classes must be positive");
  LabelDistribution p(static_cast<std::size_t>(n_classes), 0.0);
  for (auto i : shard.sample_indices) {
    const int y = dataset.labels.at(i);
    if (y < 0 || y >= n_classes) throw DomainError("label out of range");
    p[static_cast<std::size_t>(y)] += 1.0;
  }
  const auto n = static_cast<double>(shard.sample_indices.size());
  for (auto& v : p) v /= n;
  return p;
}

LabelDistribution average_distribution(std::span<const LabelDistribution> distributions) {
  if (distributions.empty()) throw DomainError("average of no distributions");
  const std::vector<double> ones(distributions.size(), 1.0);
  return weighted_average_distribution(distributions, ones);
}

LabelDistribution weighted_average_distribution(std::span<const LabelDistribution> distributions,
                                                std::span<const double> weights) {
  if (distributions.empty()) throw DomainError("average of no distributions");
  if (weights.size() != distributions.size()) throw DomainError("one weight per distribution");
  const auto len = distributions.front().size();
  LabelDistribution out(len, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < distributions.size(); ++k) {
    if (distributions[k].size() != len) throw DomainError("distribution lengths differ");
    if (!(weights[k] >= 0.0)) throw DomainError("negative distribution weight");
    for (std::size_t c = 0; c < len; ++c) out[c] += weights[k] * distributions[k][c];
    total += weights[k];
  }
  if (!(total > 0.0)) throw DomainError("distribution weights sum to zero");
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace fedsim
