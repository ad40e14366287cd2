#pragma once

// Desk-scale classifiers over flat parameter vectors.
//
// Flattening order (layer-major, row-major within a layer):
//   softmax regression (hidden_dim == 0):
//     W  [num_classes x input_dim]   W[c][j] at c*input_dim + j
//     b  [num_classes]
//   one-hidden-layer MLP (hidden_dim > 0):
//     W1 [hidden_dim x input_dim]
//     b1 [hidden_dim]
//     W2 [num_classes x hidden_dim]
//     b2 [num_classes]
// Defenses see only this flat vector, so the order is part of the interface.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faros/data.hpp"
#include "faros/errors.hpp"
#include "faros/linalg.hpp"
#include "faros/rng.hpp"

namespace faros {

struct ModelSpec {
  int input_dim = 1;
  int num_classes = 2;
  int hidden_dim = 0;  // 0 selects softmax regression; activation is ReLU

  void validate() const {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1", "data.feature_dim");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2", "data.num_classes");
    if (hidden_dim < 0) throw ConfigError("hidden_dim must be >= 0", "model.hidden_dim");
  }

  std::size_t param_count() const {
    const std::size_t d = input_dim, c = num_classes, h = hidden_dim;
    return h == 0 ? d * c + c : d * h + h + h * c + c;
  }
};

struct TrainSpec {
  int local_epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1", "train.local_epochs");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1", "train.batch_size");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be >= 0", "train.learning_rate");
  }
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p(spec.param_count(), 0.0);
  Rng rng = make_rng(seed, {stream::kInit});
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) p[offset + i] = u(rng);
  };
  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden_dim;
  if (h == 0) {
    fill(0, c * d, spec.input_dim);
  } else {
    fill(0, h * d, spec.input_dim);
    fill(h * d + h, c * h, spec.hidden_dim);
  }
  return p;
}

namespace detail {

inline void check_shapes(std::span<const double> params, const ModelSpec& spec,
                         std::size_t features) {
  if (params.size() != spec.param_count())
    throw DimensionMismatchError("parameter vector has " + std::to_string(params.size()) +
                                 " entries, model expects " + std::to_string(spec.param_count()));
  if (features != static_cast<std::size_t>(spec.input_dim))
    throw DimensionMismatchError("feature vector has " + std::to_string(features) +
                                 " entries, model expects " + std::to_string(spec.input_dim));
}

/// y = W x + b for W stored row-major at `w`.
inline void affine(const double* w, const double* b, std::span<const double> x, std::size_t rows,
                   double* y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[r] = acc;
  }
}

struct Activations {
  std::vector<double> hidden_pre;  // empty for softmax regression
  std::vector<double> hidden;
  std::vector<double> logits;
};

inline void compute_logits(std::span<const double> params, const ModelSpec& spec,
                           std::span<const double> x, Activations& act) {
  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden_dim;
  act.logits.resize(c);
  if (h == 0) {
    affine(params.data(), params.data() + c * d, x, c, act.logits.data());
    return;
  }
  act.hidden_pre.resize(h);
  act.hidden.resize(h);
  affine(params.data(), params.data() + h * d, x, h, act.hidden_pre.data());
  for (std::size_t i = 0; i < h; ++i) act.hidden[i] = act.hidden_pre[i] > 0.0 ? act.hidden_pre[i] : 0.0;
  const double* w2 = params.data() + h * d + h;
  affine(w2, w2 + c * h, act.hidden, c, act.logits.data());
}

/// In-place softmax with max subtraction; returns log-sum-exp of the input.
inline double softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - zmax));
  for (double& v : z) v /= sum;
  return zmax + std::log(sum);
}

inline int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

/// Adds the cross-entropy gradient of one example into `grad` and returns the
/// example's loss.
inline double accumulate_example(std::span<const double> params, const ModelSpec& spec,
                                 const Example& e, std::span<double> grad, Activations& act,
                                 std::vector<double>& scratch) {
  check_shapes(params, spec, e.features.size());
  if (e.label < 0 || e.label >= spec.num_classes)
    throw ConfigError("label " + std::to_string(e.label) + " outside [0, num_classes)");
  compute_logits(params, spec, e.features, act);
  const double zy = act.logits[e.label];
  std::vector<double>& p = act.logits;
  const double lse = softmax_inplace(p);
  const double loss = lse - zy;
  p[e.label] -= 1.0;  // p now holds dL/dlogits

  const std::size_t d = spec.input_dim, c = spec.num_classes, h = spec.hidden_dim;
  const std::span<const double> x = e.features;
  if (h == 0) {
    for (std::size_t k = 0; k < c; ++k) {
      double* gw = grad.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += p[k] * x[j];
      grad[c * d + k] += p[k];
    }
    return loss;
  }
  const std::size_t w2_off = h * d + h;
  const std::size_t b2_off = w2_off + c * h;
  const double* w2 = params.data() + w2_off;
  scratch.assign(h, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double* gw = grad.data() + w2_off + k * h;
    const double* wrow = w2 + k * h;
    for (std::size_t i = 0; i < h; ++i) {
      gw[i] += p[k] * act.hidden[i];
      scratch[i] += wrow[i] * p[k];
    }
    grad[b2_off + k] += p[k];
  }
  for (std::size_t i = 0; i < h; ++i) {
    const double gz = act.hidden_pre[i] > 0.0 ? scratch[i] : 0.0;  // ReLU'(0) := 0
    if (gz == 0.0) continue;
    double* gw = grad.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) gw[j] += gz * x[j];
    grad[h * d + i] += gz;
  }
  return loss;
}

}  // namespace detail

/// Class probabilities for one input.
inline std::vector<double> forward(std::span<const double> params, const ModelSpec& spec,
                                   std::span<const double> features) {
  detail::check_shapes(params, spec, features.size());
  detail::Activations act;
  detail::compute_logits(params, spec, features, act);
  detail::softmax_inplace(act.logits);
  return act.logits;
}

/// Argmax class, lowest index on ties.
inline int predict(std::span<const double> params, const ModelSpec& spec,
                   std::span<const double> features) {
  detail::check_shapes(params, spec, features.size());
  detail::Activations act;
  detail::compute_logits(params, spec, features, act);
  return detail::argmax_lowest(act.logits);
}

/// Mean cross-entropy over `batch` and its gradient in flattening order.
inline std::pair<double, ParamVector> loss_and_grad(std::span<const double> params,
                                                    const ModelSpec& spec,
                                                    std::span<const Example> batch) {
  if (batch.empty()) throw EmptySetError("loss over an empty batch");
  ParamVector grad(params.size(), 0.0);
  detail::Activations act;
  std::vector<double> scratch;
  double loss = 0.0;
  for (const auto& e : batch) loss += detail::accumulate_example(params, spec, e, grad, act, scratch);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return {loss * inv, std::move(grad)};
}

/// Hooks that let attack code reshape plain mini-batch SGD. `extra_grad`
/// receives (params, class_grad) after the class-loss gradient of a batch is
/// computed and may rewrite class_grad in place; `after_step` and
/// `after_epoch` may rewrite the params after each update / each epoch.
struct SgdHooks {
  std::function<void(std::span<const double>, std::span<double>)> extra_grad;
  std::function<void(std::span<double>)> after_step;
  std::function<void(std::span<double>)> after_epoch;
};

/// Mini-batch SGD from `start`. Each epoch reshuffles with a stream derived
/// from (tspec.seed, epoch), so the result is a pure function of the inputs.
inline ParamVector train_sgd(std::span<const double> start, const ModelSpec& spec,
                             std::span<const Example> dataset, const TrainSpec& tspec,
                             const SgdHooks& hooks = {}) {
  if (dataset.empty()) throw EmptySetError("local training on an empty dataset");
  tspec.validate();
  spec.validate();
  ParamVector params(start.begin(), start.end());
  ParamVector grad(params.size());
  std::vector<std::size_t> order(dataset.size());
  detail::Activations act;
  std::vector<double> scratch;
  for (int epoch = 0; epoch < tspec.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(tspec.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += tspec.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(tspec.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = begin; i < end; ++i)
        detail::accumulate_example(params, spec, dataset[order[i]], grad, act, scratch);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (double& g : grad) g *= inv;
      if (hooks.extra_grad) hooks.extra_grad(params, grad);
      for (std::size_t j = 0; j < params.size(); ++j) params[j] -= tspec.learning_rate * grad[j];
      if (hooks.after_step) hooks.after_step(params);
    }
    if (hooks.after_epoch) hooks.after_epoch(params);
  }
  return params;
}

inline ParamVector local_train(std::span<const double> global_params, const ModelSpec& spec,
                               std::span<const Example> dataset, const TrainSpec& tspec) {
  return train_sgd(global_params, spec, dataset, tspec);
}

inline double evaluate_acc(std::span<const double> params, const ModelSpec& spec,
                           std::span<const Example> clean_test) {
  if (clean_test.empty()) throw EmptySetError("accuracy over an empty test set");
  std::size_t correct = 0;
  for (const auto& e : clean_test) correct += predict(params, spec, e.features) == e.label;
  return static_cast<double>(correct) / static_cast<double>(clean_test.size());
}

/// Fraction of triggered non-target test inputs classified as the target.
inline double evaluate_asr(std::span<const double> params, const ModelSpec& spec,
                           std::span<const Example> clean_test, const TriggerSpec& trigger) {
  std::size_t eligible = 0, hits = 0;
  for (const auto& e : clean_test) {
    if (e.label == trigger.target_label) continue;
    ++eligible;
    hits += predict(params, spec, apply_trigger(e, trigger).features) == trigger.target_label;
  }
  if (eligible == 0) throw NoEligibleExamplesError("no test example outside the target label");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

}  // namespace faros
