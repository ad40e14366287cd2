#pragma once

// Malicious client behaviours. Every function is a pure function of its
// arguments, so malicious clients parallelize exactly like honest ones.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faros/data.hpp"
#include "faros/errors.hpp"
#include "faros/linalg.hpp"
#include "faros/model.hpp"

namespace faros {

enum class AttackKind { kNone, kDataPoison, kModelReplacement, kConstrainAndScale, kEdgeCasePgd };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kDataPoison: return "data_poison";
    case AttackKind::kModelReplacement: return "model_replacement";
    case AttackKind::kConstrainAndScale: return "constrain_and_scale";
    case AttackKind::kEdgeCasePgd: return "edge_case_pgd";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : {AttackKind::kNone, AttackKind::kDataPoison, AttackKind::kModelReplacement,
                 AttackKind::kConstrainAndScale, AttackKind::kEdgeCasePgd})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown attack kind '" + std::string(s) + "'", "attack.kind");
}

/// Which pair of vectors the stealth term of the constrain-and-scale loss
/// compares.
enum class CosOperand {
  kParams,  // current local params vs previous global params
  kUpdate,  // current local update vs the previous global update
};

inline std::string_view to_string(CosOperand c) {
  return c == CosOperand::kParams ? "params" : "update";
}

inline CosOperand parse_cos_operand(std::string_view s) {
  if (s == "params") return CosOperand::kParams;
  if (s == "update") return CosOperand::kUpdate;
  throw ConfigError("unknown cosine operand '" + std::string(s) + "'", "attack.cos_operand");
}

struct AttackConfig {
  AttackKind kind = AttackKind::kNone;
  TriggerSpec trigger;
  double poison_rate = 0.5;
  double boost = 1.0;
  double alpha = 0.5;
  double pgd_radius = 2.0;
  bool pgd_per_step = false;
  double edge_fraction = 0.1;
  int edge_source_label = 1;
  CosOperand cos_operand = CosOperand::kParams;
  int local_epochs = 0;  // 0: same as honest clients

  void validate() const {
    if (!(boost >= 1.0)) throw ConfigError("boost must be >= 1", "attack.boost");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]", "attack.alpha");
    if (!(pgd_radius > 0.0)) throw ConfigError("pgd_radius must be > 0", "attack.pgd_radius");
    if (!(poison_rate > 0.0 && poison_rate <= 1.0))
      throw ConfigError("poison_rate must be in (0, 1]", "attack.poison_rate");
    if (local_epochs < 0) throw ConfigError("local_epochs must be >= 0", "attack.local_epochs");
  }
};

/// Side information a malicious client may hold beyond its local data.
struct AttackContext {
  std::span<const Example> edge_data;        // attacker-held samples for the edge-case pool
  std::span<const double> reference_update;  // previous global update (CosOperand::kUpdate)
};

/// global + boost * (local - global).
inline ParamVector model_replacement(std::span<const double> local_params,
                                     std::span<const double> global_params, double boost) {
  require_same_dim(local_params, global_params);
  if (!(boost >= 1.0)) throw ConfigError("boost must be >= 1", "attack.boost");
  ParamVector out(local_params.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = global_params[i] + boost * (local_params[i] - global_params[i]);
  return out;
}

/// Euclidean projection onto the ball of `radius` around `center`.
inline ParamVector pgd_project(std::span<const double> params, std::span<const double> center,
                               double radius) {
  require_same_dim(params, center);
  if (!(radius > 0.0)) throw ConfigError("projection radius must be > 0", "attack.pgd_radius");
  const double dist = std::sqrt(squared_distance(params, center));
  if (dist <= radius) return ParamVector(params.begin(), params.end());
  const double s = radius / dist;
  ParamVector out(params.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + s * (params[i] - center[i]);
  return out;
}

/// Gradient of w -> 1 - <w, r> / (|w| |r|). Zero when w is the zero vector.
inline ParamVector cosine_distance_grad(std::span<const double> w, std::span<const double> r) {
  require_same_dim(w, r);
  const double nr = l2_norm(r);
  if (nr == 0.0) throw ZeroVectorError("cosine reference is the zero vector");
  const double nw = l2_norm(w);
  ParamVector g(w.size(), 0.0);
  if (nw == 0.0) return g;
  const double wr = dot(w, r);
  const double a = 1.0 / (nw * nr);
  const double b = wr / (nw * nw * nw * nr);
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = -(a * r[i] - b * w[i]);
  return g;
}

/// SGD on (1 - alpha) * L_class + alpha * L_cos. With CosOperand::kParams the
/// stealth term is cosine_distance(params, global_params); with kUpdate it is
/// cosine_distance(params - global_params, reference_update).
inline ParamVector constrain_and_scale_train(std::span<const double> global_params,
                                             const ModelSpec& spec,
                                             std::span<const Example> poisoned_data,
                                             const TrainSpec& tspec, double alpha,
                                             CosOperand operand = CosOperand::kParams,
                                             std::span<const double> reference_update = {}) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]", "attack.alpha");
  if (alpha == 0.0) return train_sgd(global_params, spec, poisoned_data, tspec);

  ParamVector reference;
  if (operand == CosOperand::kParams) {
    if (is_zero(global_params))
      throw ZeroVectorError("global params are zero; cosine stealth term undefined");
    reference.assign(global_params.begin(), global_params.end());
  } else {
    if (reference_update.size() != global_params.size() || is_zero(reference_update))
      throw ZeroVectorError("no previous global update; cosine stealth term undefined");
    reference.assign(reference_update.begin(), reference_update.end());
  }
  const ParamVector origin(global_params.begin(), global_params.end());

  SgdHooks hooks;
  ParamVector shifted(origin.size());
  hooks.extra_grad = [&](std::span<const double> params, std::span<double> grad) {
    std::span<const double> w = params;
    if (operand == CosOperand::kUpdate) {
      for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] = params[i] - origin[i];
      w = shifted;
    }
    const ParamVector gc = cosine_distance_grad(w, reference);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = (1.0 - alpha) * grad[i] + alpha * gc[i];
  };
  return train_sgd(global_params, spec, poisoned_data, tspec, hooks);
}

/// Trains on local data plus the triggered edge-case tail of `source_label`
/// and projects onto the pgd_radius ball around the global params after every
/// epoch (or every step when acfg.pgd_per_step).
inline ParamVector edge_case_pgd_train(std::span<const double> global_params,
                                       const ModelSpec& spec, std::span<const Example> local_data,
                                       const TrainSpec& tspec, const AttackConfig& acfg,
                                       std::span<const Example> edge_data = {}) {
  Dataset candidates(local_data.begin(), local_data.end());
  candidates.insert(candidates.end(), edge_data.begin(), edge_data.end());
  const Dataset pool = edge_case_pool(candidates, acfg.edge_source_label, acfg.edge_fraction);
  if (pool.empty()) throw ConfigError("edge-case pool is empty", "attack.edge_fraction");
  Dataset train(local_data.begin(), local_data.end());
  for (const auto& e : pool) train.push_back(apply_trigger(e, acfg.trigger));

  const ParamVector center(global_params.begin(), global_params.end());
  auto project = [&](std::span<double> params) {
    const ParamVector p = pgd_project(params, center, acfg.pgd_radius);
    std::copy(p.begin(), p.end(), params.begin());
  };
  SgdHooks hooks;
  if (std::isfinite(acfg.pgd_radius)) {
    if (acfg.pgd_per_step) hooks.after_step = project;
    hooks.after_epoch = project;
  }
  return train_sgd(global_params, spec, train, tspec, hooks);
}

namespace detail {

inline bool has_poison_candidates(std::span<const Example> ds, const TriggerSpec& t) {
  for (const auto& e : ds)
    if (e.label != t.target_label) return true;
  return false;
}

}  // namespace detail

/// Local training for a malicious client.
///   none                 honest local_train
///   data_poison          local_train on poison_dataset(local_data)
///   model_replacement    data_poison, then model_replacement(., global, boost)
///   constrain_and_scale  stealth-regularized training on poisoned data, then
///                        boosted; falls back to data_poison training when the
///                        stealth term is undefined (no usable reference)
///   edge_case_pgd        edge_case_pgd_train
/// A client holding only target-label examples cannot poison and trains
/// honestly.
inline ParamVector malicious_local_train(std::span<const double> global_params,
                                         const ModelSpec& spec,
                                         std::span<const Example> local_data,
                                         const TrainSpec& tspec, const AttackConfig& acfg,
                                         const AttackContext& ctx = {}) {
  acfg.validate();
  TrainSpec ts = tspec;
  if (acfg.local_epochs > 0) ts.local_epochs = acfg.local_epochs;
  if (acfg.kind == AttackKind::kNone) return local_train(global_params, spec, local_data, tspec);
  if (acfg.kind == AttackKind::kEdgeCasePgd)
    return edge_case_pgd_train(global_params, spec, local_data, ts, acfg, ctx.edge_data);
  if (!detail::has_poison_candidates(local_data, acfg.trigger))
    return local_train(global_params, spec, local_data, tspec);

  const Dataset poisoned = poison_dataset(local_data, acfg.trigger, acfg.poison_rate, ts.seed);
  switch (acfg.kind) {
    case AttackKind::kDataPoison:
      return train_sgd(global_params, spec, poisoned, ts);
    case AttackKind::kModelReplacement:
      return model_replacement(train_sgd(global_params, spec, poisoned, ts), global_params,
                               acfg.boost);
    case AttackKind::kConstrainAndScale: {
      ParamVector local;
      try {
        local = constrain_and_scale_train(global_params, spec, poisoned, ts, acfg.alpha,
                                          acfg.cos_operand, ctx.reference_update);
      } catch (const ZeroVectorError&) {
        local = train_sgd(global_params, spec, poisoned, ts);
      }
      return model_replacement(local, global_params, acfg.boost);
    }
    default:
      break;
  }
  throw ConfigError("unhandled attack kind", "attack.kind");
}

}  // namespace faros
