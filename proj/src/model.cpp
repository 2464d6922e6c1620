#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void require_indices(std::span<const std::size_t> indices) {
  if (indices.empty()) throw DomainError("empty index set");
}

void require_compatible(const ModelParams& params, const Dataset& data) {
  if (params.n_features != data.n_features || params.n_classes != data.n_classes)
    throw DomainError("model shape does not match dataset");
}

// logits = W x + b, written into `out` (length C).
void logits(const ModelParams& p, std::span<const double> x, std::span<double> out) {
  const std::size_t d = p.n_features;
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double* w = p.weights.data() + c * d;
    double z = p.bias[c];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
    out[c] = z;
  }
}

// Converts logits to probabilities in place; returns log-sum-exp.
double softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : z) v /= total;
  return mx + std::log(total);
}

}  // namespace

bool ModelParams::all_finite() const noexcept {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), finite) &&
         std::all_of(bias.begin(), bias.end(), finite);
}

ModelParams& ModelParams::axpy(double a, const ModelParams& x) {
  if (!same_shape(x)) throw DomainError("parameter shape mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += a * x.weights[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += a * x.bias[i];
  return *this;
}

ModelParams& ModelParams::scale(double a) {
  for (auto& w : weights) w *= a;
  for (auto& b : bias) b *= a;
  return *this;
}

double squared_norm(const ModelParams& p) {
  double s = 0.0;
  for (double w : p.weights) s += w * w;
  for (double b : p.bias) s += b * b;
  return s;
}

double squared_distance(const ModelParams& a, const ModelParams& b) {
  if (!a.same_shape(b)) throw DomainError("parameter shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    const double diff = a.weights[i] - b.weights[i];
    s += diff * diff;
  }
  for (std::size_t i = 0; i < a.bias.size(); ++i) {
    const double diff = a.bias[i] - b.bias[i];
    s += diff * diff;
  }
  return s;
}

void TrainConfig::validate() const {
  if (local_epochs < 1) throw ConfigError("train.local_epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate must be > 0");
  if (!(proximal_mu >= 0.0) || !std::isfinite(proximal_mu))
    throw ConfigError("train.mu must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
}

ModelParams init_params(std::size_t n_features, int n_classes, std::uint64_t seed) {
  if (n_features < 1) throw ConfigError("model needs at least one feature");
  if (n_classes < 2) throw ConfigError("model needs at least two classes");
  ModelParams p(n_classes, n_features);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  for (auto& w : p.weights) w = u(rng);
  return p;
}

double loss(const ModelParams& params, const Dataset& data, std::span<const std::size_t> indices) {
  require_indices(indices);
  require_compatible(params, data);
  std::vector<double> z(static_cast<std::size_t>(params.n_classes));
  double total = 0.0;
  for (auto i : indices) {
    logits(params, data.row(i), z);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    total += mx + std::log(sum) - z[static_cast<std::size_t>(data.labels[i])];
  }
  return total / static_cast<double>(indices.size());
}

double loss_and_gradient(const ModelParams& params, const Dataset& data,
                         std::span<const std::size_t> indices, ModelParams& grad) {
  require_indices(indices);
  require_compatible(params, data);
  const std::size_t d = params.n_features;
  const auto n_cls = static_cast<std::size_t>(params.n_classes);
  grad = ModelParams(params.n_classes, d);
  std::vector<double> z(n_cls);
  double total = 0.0;
  for (auto i : indices) {
    const auto x = data.row(i);
    const auto y = static_cast<std::size_t>(data.labels[i]);
    logits(params, x, z);
    const double zy = z[y];
    total += softmax_inplace(z) - zy;
    z[y] -= 1.0;
    for (std::size_t c = 0; c < n_cls; ++c) {
      const double r = z[c];
      double* g = grad.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) g[j] += r * x[j];
      grad.bias[c] += r;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  grad.scale(inv_n);
  return total * inv_n;
}

ModelParams gradient(const ModelParams& params, const Dataset& data,
                     std::span<const std::size_t> indices) {
  ModelParams g;
  loss_and_gradient(params, data, indices, g);
  return g;
}

ModelParams local_train_fedprox(const ModelParams& global_params, const Dataset& data,
                                const ClientShard& shard, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (shard.sample_indices.empty())
    throw DomainError("client " + std::to_string(shard.client_id) + " has an empty shard");

  ModelParams w = global_params;
  ModelParams grad;
  std::vector<std::size_t> order = shard.sample_indices;
  const std::size_t n = order.size();
  const double lr = cfg.learning_rate;
  const double mu = cfg.proximal_mu;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      const double batch_loss =
          loss_and_gradient(w, data, std::span(order).subspan(start, len), grad);
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss on client " + std::to_string(shard.client_id),
                           shard.client_id);
      // w <- w - lr * (grad + mu * (w - w_global))
      if (mu != 0.0) {
        for (std::size_t i = 0; i < w.weights.size(); ++i)
          grad.weights[i] += mu * (w.weights[i] - global_params.weights[i]);
        for (std::size_t i = 0; i < w.bias.size(); ++i)
          grad.bias[i] += mu * (w.bias[i] - global_params.bias[i]);
      }
      w.axpy(-lr, grad);
    }
    if (!w.all_finite())
      throw NumericError("non-finite weights on client " + std::to_string(shard.client_id),
                         shard.client_id);
  }
  return w;
}

double accuracy(const ModelParams& params, const Dataset& data,
                std::span<const std::size_t> indices) {
  require_indices(indices);
  require_compatible(params, data);
  std::vector<double> z(static_cast<std::size_t>(params.n_classes));
  std::size_t correct = 0;
  for (auto i : indices) {
    logits(params, data.row(i), z);
    // max_element returns the first maximum, i.e. the lowest class id.
    const auto pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

double accuracy(const ModelParams& params, const Dataset& data) {
  const auto idx = all_indices(data);
  return accuracy(params, data, idx);
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace fedsim
