#pragma once

// Synthetic datasets, Dirichlet non-IID partitioning and backdoor poisoning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "faros/errors.hpp"
#include "faros/linalg.hpp"
#include "faros/rng.hpp"

namespace faros {

struct Example {
  ParamVector features;
  int label = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

using Dataset = std::vector<Example>;

/// Backdoor trigger: overwrite `values[i]` at feature `positions[i]` and
/// relabel to `target_label`.
struct TriggerSpec {
  std::vector<std::size_t> positions;
  std::vector<double> values;
  int target_label = 0;

  void validate(std::size_t feature_dim) const {
    if (positions.size() != values.size())
      throw ConfigError("trigger positions and values differ in length", "data.trigger_values");
    std::unordered_set<std::size_t> seen;
    for (std::size_t p : positions) {
      if (p >= feature_dim)
        throw ConfigError("trigger position " + std::to_string(p) + " out of range for dim " +
                              std::to_string(feature_dim),
                          "data.trigger_positions");
      if (!seen.insert(p).second)
        throw ConfigError("duplicate trigger position " + std::to_string(p),
                          "data.trigger_positions");
    }
  }
};

/// Client id -> indices into the partitioned dataset.
struct Partition {
  std::vector<std::vector<std::size_t>> assignments;

  std::size_t num_clients() const { return assignments.size(); }
};

/// Class centers with pairwise Euclidean distance >= class_sep. Centers are
/// drawn from a standard normal and then rescaled so the closest pair sits at
/// exactly class_sep.
inline std::vector<ParamVector> blob_centers(int num_classes, int feature_dim, double class_sep,
                                             std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2", "data.num_classes");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2", "data.feature_dim");
  if (!(class_sep > 0.0)) throw ConfigError("class_sep must be > 0", "data.class_sep");
  Rng rng = make_rng(seed, {stream::kCenters});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ParamVector> centers(num_classes, ParamVector(feature_dim));
  double min_dist = 0.0;
  while (min_dist == 0.0) {
    for (auto& c : centers)
      for (auto& x : c) x = normal(rng);
    min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < num_classes; ++a)
      for (int b = a + 1; b < num_classes; ++b)
        min_dist = std::min(min_dist, std::sqrt(squared_distance(centers[a], centers[b])));
  }
  const double scale = class_sep / min_dist;
  for (auto& c : centers)
    for (auto& x : c) x *= scale;
  return centers;
}

/// Draws `n_per_class` unit-variance isotropic samples around each center,
/// class-major order.
inline Dataset sample_blobs(std::span<const ParamVector> centers, int n_per_class,
                            std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1", "data.n_per_class");
  Rng rng{seed};
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset out;
  out.reserve(centers.size() * static_cast<std::size_t>(n_per_class));
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      Example e;
      e.label = static_cast<int>(c);
      e.features.resize(centers[c].size());
      for (std::size_t j = 0; j < e.features.size(); ++j) e.features[j] = centers[c][j] + normal(rng);
      out.push_back(std::move(e));
    }
  }
  return out;
}

inline Dataset gen_blobs(int num_classes, int feature_dim, int n_per_class, double class_sep,
                         std::uint64_t seed) {
  const auto centers = blob_centers(num_classes, feature_dim, class_sep, seed);
  return sample_blobs(centers, n_per_class, derive_seed(seed, {stream::kTrainData}));
}

/// Deals each class's indices across clients with proportions drawn from
/// Dirichlet(q, ..., q). Clients left empty receive one index taken from the
/// currently largest client (lowest id on ties).
inline Partition dirichlet_partition(std::span<const int> labels, int num_clients, double q,
                                     std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1", "sim.total_clients");
  if (!(q > 0.0)) throw ConfigError("Dirichlet concentration must be > 0", "data.dirichlet_q");
  if (labels.size() < static_cast<std::size_t>(num_clients))
    throw ConfigError("fewer examples (" + std::to_string(labels.size()) + ") than clients (" +
                          std::to_string(num_clients) + ")",
                      "sim.total_clients");

  int num_classes = 0;
  for (int l : labels) {
    if (l < 0) throw ConfigError("negative label in partition input");
    num_classes = std::max(num_classes, l + 1);
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng = make_rng(seed, {stream::kPartition});
  std::gamma_distribution<double> gamma(q, 1.0);
  Partition part;
  part.assignments.resize(num_clients);

  std::vector<double> props(num_clients);
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    double total = 0.0;
    for (auto& p : props) total += (p = gamma(rng));
    if (!(total > 0.0) || !std::isfinite(total)) {
      // Every gamma draw underflowed (tiny q): give the class to one client.
      std::fill(props.begin(), props.end(), 0.0);
      props[std::uniform_int_distribution<int>(0, num_clients - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double n = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t begin = 0;
    for (int c = 0; c < num_clients; ++c) {
      cum += props[c];
      std::size_t end = c + 1 == num_clients
                            ? idx.size()
                            : std::min(idx.size(), static_cast<std::size_t>(std::llround(cum / total * n)));
      end = std::max(end, begin);
      for (std::size_t i = begin; i < end; ++i) part.assignments[c].push_back(idx[i]);
      begin = end;
    }
  }

  for (auto& a : part.assignments) {
    if (!a.empty()) continue;
    auto largest = std::max_element(
        part.assignments.begin(), part.assignments.end(),
        [](const auto& x, const auto& y) { return x.size() < y.size(); });
    a.push_back(largest->back());
    largest->pop_back();
  }
  return part;
}

/// Copy of `e` with the trigger stamped in and the label set to the target.
inline Example apply_trigger(const Example& e, const TriggerSpec& t) {
  t.validate(e.features.size());
  Example out = e;
  for (std::size_t i = 0; i < t.positions.size(); ++i) out.features[t.positions[i]] = t.values[i];
  out.label = t.target_label;
  return out;
}

/// Triggers ceil(rate * |ds|) examples (capped at the number eligible) chosen
/// uniformly among those whose label differs from the target.
inline Dataset poison_dataset(std::span<const Example> ds, const TriggerSpec& t, double rate,
                              std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("poison rate must be in (0, 1]", "attack.poison_rate");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds[i].label != t.target_label) eligible.push_back(i);
  if (eligible.empty()) throw ConfigError("no examples eligible for poisoning", "attack.poison_rate");
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(ds.size()) - 1e-9)));
  const std::size_t count = std::min(want, eligible.size());
  Rng rng = make_rng(seed, {stream::kPoison});
  std::shuffle(eligible.begin(), eligible.end(), rng);
  Dataset out(ds.begin(), ds.end());
  for (std::size_t i = 0; i < count; ++i) out[eligible[i]] = apply_trigger(ds[eligible[i]], t);
  return out;
}

/// The ceil(fraction * n) examples of `source_label` farthest from that
/// class's empirical mean, farthest first (lower index on ties).
inline Dataset edge_case_pool(std::span<const Example> ds, int source_label, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("edge fraction must be in (0, 1)", "attack.edge_fraction");
  std::vector<ParamVector> members;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].label == source_label) {
      members.push_back(ds[i].features);
      idx.push_back(i);
    }
  }
  if (members.empty())
    throw ConfigError("no examples of edge-case source label " + std::to_string(source_label),
                      "attack.edge_source_label");
  const ParamVector mean = mean_vector(members);
  std::vector<double> dist(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) dist[i] = squared_distance(members[i], mean);
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(members.size()) - 1e-9)));
  Dataset out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(ds[idx[order[i]]]);
  return out;
}

inline Dataset subset(std::span<const Example> ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(ds[i]);
  return out;
}

inline std::vector<int> labels_of(std::span<const Example> ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& e : ds) out.push_back(e.label);
  return out;
}

}  // namespace faros
