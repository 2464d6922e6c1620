#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedsim/data_partition.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Multinomial logistic regression: logits = W x + b, W is C x d row-major.
struct ModelParams {
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  ModelParams() = default;
  ModelParams(int classes, std::size_t features)
      : n_classes(classes),
        n_features(features),
        weights(static_cast<std::size_t>(classes) * features, 0.0),
        bias(static_cast<std::size_t>(classes), 0.0) {}

  bool same_shape(const ModelParams& o) const noexcept {
    return n_classes == o.n_classes && n_features == o.n_features;
  }
  bool all_finite() const noexcept;

  // In-place linear algebra used by the optimizers and the aggregator.
  ModelParams& axpy(double a, const ModelParams& x);  // this += a * x
  ModelParams& scale(double a);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

double squared_norm(const ModelParams& p);
double squared_distance(const ModelParams& a, const ModelParams& b);

struct TrainConfig {
  int local_epochs = 5;
  double learning_rate = 0.05;
  double proximal_mu = 0.1;
  std::size_t batch_size = 32;

  void validate() const;  // throws ConfigError
};

ModelParams init_params(std::size_t n_features, int n_classes, std::uint64_t seed);

// Mean cross-entropy over `indices`.
double loss(const ModelParams& params, const Dataset& data, std::span<const std::size_t> indices);

// Exact gradient of the mean cross-entropy over `indices`.
ModelParams gradient(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> indices);

// Loss and gradient in one pass.
double loss_and_gradient(const ModelParams& params, const Dataset& data,
                         std::span<const std::size_t> indices, ModelParams& grad);

// E epochs of mini-batch SGD on loss + (mu/2)||w - w_global||^2 starting from
// global_params. Each epoch fully reshuffles the shard with `rng`. Throws
// NumericError naming the client if the loss or weights go non-finite.
ModelParams local_train_fedprox(const ModelParams& global_params, const Dataset& data,
                                const ClientShard& shard, const TrainConfig& cfg, Rng& rng);

// Fraction of argmax-correct predictions; ties go to the lowest class id.
double accuracy(const ModelParams& params, const Dataset& data,
                std::span<const std::size_t> indices);
double accuracy(const ModelParams& params, const Dataset& data);

std::vector<std::size_t> all_indices(const Dataset& data);

}  // namespace fedsim
