#pragma once

// Server-side aggregation rules: FedAvg, Multi-Krum, Weak-DP, the static
// single-seed scaling baseline, and FAROS (adaptive differential scaling +
// robust core-set filtering).
//
// Every rule processes clients in ascending client_id order and breaks score
// ties by lower client_id, so results do not depend on the order in which
// updates arrive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faros/errors.hpp"
#include "faros/linalg.hpp"
#include "faros/rng.hpp"

namespace faros {

struct ClientUpdate {
  int client_id = 0;
  ParamVector delta;  // local params minus previous global params
  int num_samples = 1;
};

enum class DefenseKind { kFedAvg, kMultiKrum, kWeakDp, kScopeStatic, kFaros };

inline std::string_view to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::kFedAvg: return "fedavg";
    case DefenseKind::kMultiKrum: return "multi_krum";
    case DefenseKind::kWeakDp: return "weak_dp";
    case DefenseKind::kScopeStatic: return "scope_static";
    case DefenseKind::kFaros: return "faros";
  }
  return "?";
}

inline DefenseKind parse_defense_kind(std::string_view s) {
  for (auto k : {DefenseKind::kFedAvg, DefenseKind::kMultiKrum, DefenseKind::kWeakDp,
                 DefenseKind::kScopeStatic, DefenseKind::kFaros})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown defense kind '" + std::string(s) + "'", "defense.kind");
}

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kFaros;
  double phi_max = 3.0;
  double kappa = 50.0;
  int core_size = 0;     // l; 0 means ceil(k/2)
  int accept_count = 0;  // m; 0 means ceil(k/2)
  int krum_f = 0;
  int krum_select = 0;   // 0 means the resolved accept_count
  double clip_norm = 1.0;
  double noise_std = 0.0;
  double phi_static = 2.0;
  double global_lr = 1.0;
  NormStrategy norm = NormStrategy::kMaxAbs;
  bool weight_by_samples = false;

  void validate() const {
    if (!(phi_max > 1.0)) throw ConfigError("phi_max must be > 1", "defense.phi_max");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0", "defense.kappa");
    if (core_size < 0) throw ConfigError("core_size must be >= 0", "defense.core_size");
    if (accept_count < 0) throw ConfigError("accept_count must be >= 0", "defense.accept_count");
    if (krum_f < 0) throw ConfigError("krum_f must be >= 0", "defense.krum_f");
    if (krum_select < 0) throw ConfigError("krum_select must be >= 0", "defense.krum_select");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0", "defense.clip_norm");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0", "defense.noise_std");
    if (!(phi_static >= 1.0)) throw ConfigError("phi_static must be >= 1", "defense.phi_static");
    if (!(global_lr > 0.0)) throw ConfigError("global_lr must be > 0", "defense.global_lr");
  }

  static int half_up(int k) { return (k + 1) / 2; }
  int resolved_core_size(int k) const { return core_size > 0 ? core_size : half_up(k); }
  int resolved_accept_count(int k) const { return accept_count > 0 ? accept_count : half_up(k); }
};

struct DefenseDiagnostics {
  /// Client ids in processing (ascending) order; the per-client vectors
  /// below are aligned with it.
  std::vector<int> client_ids;
  std::vector<double> distances;  // d_i to the core centroid
  std::vector<double> scores;     // delta_i for FAROS/scope, Krum score for multi_krum
  std::vector<int> core_set;      // ascending ids
  double d_t = std::numeric_limits<double>::quiet_NaN();
  double phi_t = std::numeric_limits<double>::quiet_NaN();
  bool fallback_to_fedavg = false;
  std::vector<int> excluded;  // zero-delta clients dropped before filtering
  std::vector<std::string> warnings;
};

struct DefenseOutcome {
  ParamVector aggregated_delta;
  std::vector<int> accepted;  // ascending ids
  DefenseDiagnostics diagnostics;
};

/// D_t value used when the round centroid vanishes; drives phi_t to 1.
inline constexpr double kDegenerateDispersion = std::numeric_limits<double>::max();

namespace detail {

inline std::vector<std::size_t> order_by_id(std::span<const ClientUpdate> updates) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  return order;
}

inline void check_updates(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw EmptySetError("aggregation over zero client updates");
  for (const auto& u : updates) {
    require_same_dim(updates.front().delta, u.delta);
    require_finite(u.delta, "client delta");
    if (u.num_samples < 1) throw ConfigError("client update with num_samples < 1");
  }
}

/// Mean of the deltas at `positions` (already in ascending-id order).
inline ParamVector mean_delta(std::span<const ClientUpdate> updates,
                              std::span<const std::size_t> positions, bool weight_by_samples) {
  const std::size_t dim = updates.front().delta.size();
  std::vector<long double> acc(dim, 0.0L);
  long double total = 0.0L;
  for (std::size_t p : positions) {
    const long double w = weight_by_samples ? updates[p].num_samples : 1;
    total += w;
    for (std::size_t j = 0; j < dim; ++j) acc[j] += w * updates[p].delta[j];
  }
  ParamVector out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<double>(acc[j] / total);
  return out;
}

/// Indices of the `count` smallest values; ties by lower id.
inline std::vector<std::size_t> lowest(std::span<const double> values, std::span<const int> ids,
                                       std::size_t count) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return ids[a] < ids[b];
  });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

}  // namespace detail

inline DefenseOutcome fedavg(std::span<const ClientUpdate> updates, bool weight_by_samples = false) {
  detail::check_updates(updates);
  const auto order = detail::order_by_id(updates);
  DefenseOutcome out;
  out.aggregated_delta = detail::mean_delta(updates, order, weight_by_samples);
  for (std::size_t p : order) {
    out.accepted.push_back(updates[p].client_id);
    out.diagnostics.client_ids.push_back(updates[p].client_id);
  }
  return out;
}

/// Multi-Krum: score_i is the sum of squared L2 distances to the k - f - 2
/// nearest other clients; the `select` lowest scores are averaged. k >= 2f + 3
/// is not enforced, only reported in the diagnostics.
inline DefenseOutcome multi_krum(std::span<const ClientUpdate> updates, int f, int select) {
  detail::check_updates(updates);
  const int k = static_cast<int>(updates.size());
  if (select < 1 || select > k)
    throw ConfigError("krum select count " + std::to_string(select) + " outside [1, " +
                          std::to_string(k) + "]",
                      "defense.krum_select");
  if (f < 0) throw ConfigError("krum_f must be >= 0", "defense.krum_f");
  const auto order = detail::order_by_id(updates);
  DefenseOutcome out;
  auto& diag = out.diagnostics;
  if (k < 2 * f + 3)
    diag.warnings.push_back("multi_krum: k=" + std::to_string(k) + " < 2f+3=" +
                            std::to_string(2 * f + 3));
  const int neighbours = std::clamp(k - f - 2, 0, k - 1);

  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      dist[a][b] = dist[b][a] =
          squared_distance(updates[order[a]].delta, updates[order[b]].delta);

  for (int a = 0; a < k; ++a) {
    diag.client_ids.push_back(updates[order[a]].client_id);
    std::vector<int> others;
    for (int b = 0; b < k; ++b)
      if (b != a) others.push_back(b);
    std::stable_sort(others.begin(), others.end(),
                     [&](int x, int y) { return dist[a][x] < dist[a][y]; });
    others.resize(neighbours);
    std::sort(others.begin(), others.end());  // sum in index order
    double score = 0.0;
    for (int b : others) score += dist[a][b];
    diag.scores.push_back(score);
  }
  const auto chosen = detail::lowest(diag.scores, diag.client_ids, select);
  std::vector<std::size_t> positions;
  for (std::size_t c : chosen) positions.push_back(order[c]);
  std::sort(positions.begin(), positions.end(), [&](std::size_t x, std::size_t y) {
    return updates[x].client_id < updates[y].client_id;
  });
  out.aggregated_delta = detail::mean_delta(updates, positions, false);
  for (std::size_t p : positions) out.accepted.push_back(updates[p].client_id);
  return out;
}

/// Norm clipping to clip_norm followed by seeded Gaussian noise on the mean.
inline DefenseOutcome weak_dp(std::span<const ClientUpdate> updates, double clip_norm,
                              double noise_std, std::uint64_t seed) {
  detail::check_updates(updates);
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0", "defense.clip_norm");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0", "defense.noise_std");
  std::vector<ClientUpdate> clipped(updates.begin(), updates.end());
  for (auto& u : clipped) {
    const double norm = l2_norm(u.delta);
    if (norm > clip_norm) {
      const double s = clip_norm / norm;
      for (double& x : u.delta) x *= s;
    }
  }
  DefenseOutcome out = fedavg(clipped);
  if (noise_std > 0.0) {
    Rng rng = make_rng(seed, {stream::kDpNoise});
    std::normal_distribution<double> noise(0.0, noise_std);
    for (double& x : out.aggregated_delta) x += noise(rng);
  }
  return out;
}

/// phi_t = 1 + (phi_max - 1) * exp(-kappa * D_t).
inline double adaptive_phi(double d_t, double phi_max, double kappa) {
  if (!(phi_max > 1.0)) throw ConfigError("phi_max must be > 1", "defense.phi_max");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0", "defense.kappa");
  if (!(d_t >= 0.0)) throw ConfigError("dispersion must be >= 0");
  return 1.0 + (phi_max - 1.0) * std::exp(-kappa * d_t);
}

/// Element-wise |x|^phi * sgn(x).
inline ParamVector differential_scale(std::span<const double> v, double phi) {
  ParamVector out(v.begin(), v.end());
  if (phi == 1.0) return out;
  for (double& x : out) {
    if (x == 0.0) continue;
    x = std::copysign(std::pow(std::abs(x), phi), x);
  }
  return out;
}

/// delta_i = sum over p of cosine_distance(v_i, v_p). The p == i term is 0.
inline std::vector<double> pairwise_scores(std::span<const ParamVector> scaled) {
  for (const auto& v : scaled)
    if (is_zero(v)) throw ZeroVectorError("pairwise score over a zero vector");
  const std::size_t k = scaled.size();
  std::vector<std::vector<double>> d(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t p = i + 1; p < k; ++p) d[i][p] = d[p][i] = cosine_distance(scaled[i], scaled[p]);
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t p = 0; p < k; ++p) out[i] += d[i][p];
  return out;
}

/// Ids of the l smallest scores, ascending by (score, id).
inline std::vector<int> select_core_set(std::span<const double> scores, std::span<const int> ids,
                                        int l) {
  if (scores.size() != ids.size()) throw DimensionMismatchError("scores and ids differ in length");
  if (l < 1 || static_cast<std::size_t>(l) > scores.size())
    throw ConfigError("core size " + std::to_string(l) + " outside [1, " +
                          std::to_string(scores.size()) + "]",
                      "defense.core_size");
  std::vector<int> out;
  for (std::size_t i : detail::lowest(scores, ids, static_cast<std::size_t>(l)))
    out.push_back(ids[i]);
  return out;
}

struct RccResult {
  ParamVector centroid;
  std::vector<int> accepted;   // ascending by (distance, id)
  std::vector<double> distances;  // aligned with the input vectors
};

/// Averages the core members into a centroid, measures every client's cosine
/// distance to it and keeps the m closest.
inline RccResult rcc_filter(std::span<const ParamVector> scaled, std::span<const int> ids,
                            std::span<const int> core_ids, int m) {
  if (scaled.size() != ids.size()) throw DimensionMismatchError("vectors and ids differ in length");
  if (core_ids.empty()) throw EmptySetError("empty core set");
  if (m < 1 || static_cast<std::size_t>(m) > scaled.size())
    throw ConfigError("accept count " + std::to_string(m) + " outside [1, " +
                          std::to_string(scaled.size()) + "]",
                      "defense.accept_count");
  std::vector<ParamVector> core;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (std::find(core_ids.begin(), core_ids.end(), ids[i]) != core_ids.end())
      core.push_back(scaled[i]);
  if (core.size() != core_ids.size()) throw ConfigError("core id not among the clients");
  RccResult r;
  r.centroid = mean_vector(core);
  if (is_zero(r.centroid)) throw DegenerateCentroidError("core-set centroid is the zero vector");
  for (const auto& v : scaled) r.distances.push_back(cosine_distance(v, r.centroid));
  for (std::size_t i : detail::lowest(r.distances, ids, static_cast<std::size_t>(m)))
    r.accepted.push_back(ids[i]);
  return r;
}

namespace detail {

struct FilterPlan {
  bool adaptive = true;  // phi from dispersion, else phi_fixed
  double phi_fixed = 1.0;
  int core_size = 1;
};

inline DefenseOutcome fallback(std::span<const ClientUpdate> updates, DefenseDiagnostics diag,
                               bool weight_by_samples, std::string why) {
  DefenseOutcome out = fedavg(updates, weight_by_samples);
  diag.client_ids = out.diagnostics.client_ids;
  diag.fallback_to_fedavg = true;
  diag.warnings.push_back(std::move(why));
  out.diagnostics = std::move(diag);
  return out;
}

inline DefenseOutcome filtered_aggregate(std::span<const ClientUpdate> updates,
                                         const DefenseConfig& cfg, const FilterPlan& plan) {
  check_updates(updates);
  cfg.validate();
  const int k = static_cast<int>(updates.size());
  const int m = cfg.resolved_accept_count(k);
  if (plan.core_size > k || m > k)
    throw ConfigError("core size " + std::to_string(plan.core_size) + " / accept count " +
                          std::to_string(m) + " exceed client count " + std::to_string(k),
                      plan.core_size > k ? "defense.core_size" : "defense.accept_count");

  DefenseDiagnostics diag;
  std::vector<std::size_t> positions;  // survivors, ascending id
  std::vector<int> ids;
  std::vector<ParamVector> normalized;
  for (std::size_t p : order_by_id(updates)) {
    try {
      normalized.push_back(normalize(updates[p].delta, cfg.norm));
    } catch (const ZeroVectorError&) {
      diag.excluded.push_back(updates[p].client_id);
      diag.warnings.push_back("client " + std::to_string(updates[p].client_id) +
                              " sent a zero delta; excluded");
      continue;
    }
    positions.push_back(p);
    ids.push_back(updates[p].client_id);
  }
  const int survivors = static_cast<int>(positions.size());
  if (survivors < std::max({plan.core_size, m, 2}))
    return fallback(updates, std::move(diag), cfg.weight_by_samples,
                    std::to_string(survivors) + " usable clients; falling back to fedavg");

  try {
    diag.d_t = dispersion(normalized);
  } catch (const DegenerateCentroidError&) {
    diag.d_t = kDegenerateDispersion;
    diag.warnings.push_back("round centroid is zero; dispersion set to its maximum");
  }
  diag.phi_t = plan.adaptive ? adaptive_phi(diag.d_t, cfg.phi_max, cfg.kappa) : plan.phi_fixed;

  std::vector<ParamVector> scaled;
  scaled.reserve(normalized.size());
  for (const auto& v : normalized) scaled.push_back(differential_scale(v, diag.phi_t));
  for (const auto& v : scaled)
    if (is_zero(v))
      return fallback(updates, std::move(diag), cfg.weight_by_samples,
                      "a scaled gradient underflowed to zero; falling back to fedavg");

  diag.client_ids = ids;
  diag.scores = pairwise_scores(scaled);
  diag.core_set = select_core_set(diag.scores, ids, plan.core_size);

  RccResult rcc;
  try {
    rcc = rcc_filter(scaled, ids, diag.core_set, m);
  } catch (const DegenerateCentroidError&) {
    return fallback(updates, std::move(diag), cfg.weight_by_samples,
                    "core-set centroid is zero; falling back to fedavg");
  }
  diag.distances = rcc.distances;
  std::sort(diag.core_set.begin(), diag.core_set.end());

  DefenseOutcome out;
  out.accepted = rcc.accepted;
  std::sort(out.accepted.begin(), out.accepted.end());
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (std::binary_search(out.accepted.begin(), out.accepted.end(), ids[i]))
      chosen.push_back(positions[i]);
  out.aggregated_delta = mean_delta(updates, chosen, cfg.weight_by_samples);
  out.diagnostics = std::move(diag);
  return out;
}

}  // namespace detail

/// FAROS aggregation:
///   1. normalize every delta (zero deltas are excluded)
///   2. D_t = variance of cosine distances to the normalized centroid;
///      phi_t = adaptive_phi(D_t); power-scale every normalized delta by phi_t
///   3. delta_i = summed cosine distance to all clients; the l lowest form the
///      core set; d_i = cosine distance to the core centroid; keep the m lowest
///   4. aggregated delta = mean of the accepted clients' raw deltas
/// The caller applies g_t = g_{t-1} + global_lr * aggregated_delta. If fewer
/// than max(l, m) clients survive, the outcome is plain FedAvg and
/// diagnostics.fallback_to_fedavg is set.
inline DefenseOutcome faros_aggregate(std::span<const ClientUpdate> updates,
                                      const DefenseConfig& cfg) {
  const int k = static_cast<int>(updates.size());
  return detail::filtered_aggregate(updates, cfg,
                                    {.adaptive = true, .phi_fixed = 1.0,
                                     .core_size = cfg.resolved_core_size(k)});
}

/// Same pipeline with phi fixed to cfg.phi_static and the core set reduced to
/// the single client with minimal delta_i.
inline DefenseOutcome scope_static_aggregate(std::span<const ClientUpdate> updates,
                                             const DefenseConfig& cfg) {
  return detail::filtered_aggregate(updates, cfg,
                                    {.adaptive = false, .phi_fixed = cfg.phi_static,
                                     .core_size = 1});
}

/// Dispatches on cfg.kind. `round_seed` feeds the Weak-DP noise.
inline DefenseOutcome aggregate(std::span<const ClientUpdate> updates, const DefenseConfig& cfg,
                                std::uint64_t round_seed) {
  cfg.validate();
  const int k = static_cast<int>(updates.size());
  switch (cfg.kind) {
    case DefenseKind::kFedAvg:
      return fedavg(updates, cfg.weight_by_samples);
    case DefenseKind::kMultiKrum:
      return multi_krum(updates, cfg.krum_f,
                        cfg.krum_select > 0 ? cfg.krum_select : cfg.resolved_accept_count(k));
    case DefenseKind::kWeakDp:
      return weak_dp(updates, cfg.clip_norm, cfg.noise_std, round_seed);
    case DefenseKind::kScopeStatic:
      return scope_static_aggregate(updates, cfg);
    case DefenseKind::kFaros:
      return faros_aggregate(updates, cfg);
  }
  throw ConfigError("unhandled defense kind", "defense.kind");
}

}  // namespace faros
