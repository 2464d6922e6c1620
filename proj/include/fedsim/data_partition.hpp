#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace fedsim {

// Row-major feature matrix plus integer class labels.
struct Dataset {
  std::size_t n_features = 0;
  int n_classes = 0;
  std::vector<double> features;  // n_samples * n_features
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }

  // Throws DomainError unless labels are in range, features are finite and
  // the shapes agree.
  void validate() const;
};

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> sample_indices;
};

using LabelDistribution = std::vector<double>;

// How the reference distribution P_avg is formed from client distributions.
enum class AverageWeighting { kClientUniform, kSampleWeighted };

struct SyntheticSpec {
  int n_classes = 10;
  std::size_t n_features = 10;
  std::size_t n_per_class = 200;
  double class_separation = 3.0;
};

// Isotropic unit-variance Gaussian blobs, one per class. Centroids are drawn
// uniformly on the sphere of radius class_separation. Samples are laid out
// class by class.
Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec);

// Reads `f0,...,f{d-1},label` with a header row. Classes are inferred as
// max(label) + 1 unless n_classes > 0 is given.
Dataset load_csv(const std::filesystem::path& path, int n_classes = 0);

// Subset of `dataset` restricted to `indices`, in that order.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

// Per-class stratified holdout. Each class contributes
// round(test_fraction * n_c) samples to the test side, chosen by a seeded
// shuffle. Returns (train, test).
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed);

// Label-skewed split across `n_clients`. For each class, client proportions
// are drawn from Dirichlet(alpha * 1_K) and turned into integer counts by
// largest-remainder rounding; empty clients are then repaired by taking one
// sample from the current largest shard.
std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, int n_clients, double alpha,
                                             std::uint64_t seed);

LabelDistribution label_distribution(const Dataset& dataset, const ClientShard& shard,
                                     int n_classes);

// Unweighted element-wise mean.
LabelDistribution average_distribution(std::span<const LabelDistribution> distributions);

// Mean weighted by `weights` (typically shard sizes).
LabelDistribution weighted_average_distribution(std::span<const LabelDistribution> distributions,
                                                std::span<const double> weights);

}  // namespace fedsim
