#pragma once

// Flat-vector kernel shared by every aggregation rule: normalization, cosine
// geometry and dispersion statistics. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faros/errors.hpp"

namespace faros {

/// Model parameters, gradients and parameter deltas all travel as a flat
/// vector of doubles. See model.hpp for the flattening order.
using ParamVector = std::vector<double>;

/// How a client delta is brought to a common scale before power scaling.
enum class NormStrategy {
  kMaxAbs,  // divide by max_j |v_j|; dominant coordinates land on +-1
  kL2,      // divide by the Euclidean norm
};

inline std::string_view to_string(NormStrategy s) {
  return s == NormStrategy::kMaxAbs ? "maxabs" : "l2";
}

inline NormStrategy parse_norm_strategy(std::string_view s) {
  if (s == "maxabs") return NormStrategy::kMaxAbs;
  if (s == "l2") return NormStrategy::kL2;
  throw ConfigError("unknown normalization strategy '" + std::string(s) + "'");
}

inline void require_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionMismatchError("dimension mismatch: " + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()));
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> v, std::string_view what) {
  if (!all_finite(v)) throw Error(std::string(what) + " contains a non-finite entry");
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
  return static_cast<double>(acc);
}

inline double l2_norm(std::span<const double> v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(acc));
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    acc += d * d;
  }
  return static_cast<double>(acc);
}

inline bool is_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

/// Rescales `v` so its largest-magnitude entry is exactly +-1 (kMaxAbs) or
/// so its Euclidean norm is 1 (kL2). Signs are preserved.
inline ParamVector normalize(std::span<const double> v,
                             NormStrategy strategy = NormStrategy::kMaxAbs) {
  const double scale = strategy == NormStrategy::kMaxAbs ? max_abs(v) : l2_norm(v);
  if (scale == 0.0) throw ZeroVectorError("cannot normalize the zero vector");
  ParamVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / scale;
  if (strategy == NormStrategy::kMaxAbs) {
    // Division by the max magnitude is exact for that entry, but force it
    // anyway so the +-1 invariant never depends on rounding.
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) == scale) out[i] = v[i] > 0 ? 1.0 : -1.0;
  }
  return out;
}

/// 1 - cos(a, b), clamped into [0, 2]. The denominator is sqrt(|a|^2 |b|^2)
/// in extended precision, which makes cosine_distance(v, v) exactly 0.
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b);
  long double ab = 0.0L, aa = 0.0L, bb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double x = a[i], y = b[i];
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  if (aa == 0.0L || bb == 0.0L) throw ZeroVectorError("cosine distance with a zero-norm operand");
  const double d = static_cast<double>(1.0L - ab / std::sqrt(aa * bb));
  return std::clamp(d, 0.0, 2.0);
}

/// Element-wise arithmetic mean, summed in index order.
inline ParamVector mean_vector(std::span<const ParamVector> vs) {
  if (vs.empty()) throw EmptySetError("mean of an empty vector set");
  const std::size_t dim = vs.front().size();
  std::vector<long double> acc(dim, 0.0L);
  for (const auto& v : vs) {
    require_same_dim(vs.front(), v);
    for (std::size_t j = 0; j < dim; ++j) acc[j] += v[j];
  }
  ParamVector out(dim);
  const long double n = static_cast<long double>(vs.size());
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<double>(acc[j] / n);
  return out;
}

/// Population variance (divides by N).
inline double scalar_variance(std::span<const double> xs) {
  if (xs.empty()) throw EmptySetError("variance of an empty sequence");
  long double mean = 0.0L;
  for (double x : xs) mean += x;
  mean /= static_cast<long double>(xs.size());
  long double acc = 0.0L;
  for (double x : xs) {
    const long double d = x - mean;
    acc += d * d;
  }
  return static_cast<double>(acc / static_cast<long double>(xs.size()));
}

/// Variance of the cosine distances from each vector to the set's centroid.
/// Throws DegenerateCentroidError when the centroid is the zero vector.
inline double dispersion(std::span<const ParamVector> vs) {
  if (vs.size() < 2) throw EmptySetError("dispersion needs at least two vectors");
  for (const auto& v : vs)
    if (is_zero(v)) throw ZeroVectorError("dispersion over a zero vector");
  const ParamVector centroid = mean_vector(vs);
  if (l2_norm(centroid) == 0.0)
    throw DegenerateCentroidError("dispersion centroid is the zero vector");
  std::vector<double> dist;
  dist.reserve(vs.size());
  for (const auto& v : vs) dist.push_back(cosine_distance(v, centroid));
  return scalar_variance(dist);
}

}  // namespace faros
