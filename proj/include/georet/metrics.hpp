// Copyright 2026 The georet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Distance kernels.
//
// Float kernels accumulate in double over four interleaved lanes that are
// summed in a fixed order, so a given pair always yields the same bits no
// matter which search path computes it. Binary kernels XOR/AND/OR 64-bit
// words and popcount; pad bits are zero by construction and never count.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "georet/error.hpp"
#include "georet/vecstore.hpp"

namespace georet {

enum class Metric : std::uint8_t {
  kL1 = 0,
  kL2 = 1,
  kL2Squared = 2,
  kCosine = 3,
  kHamming = 4,
  kJaccard = 5,
};

constexpr std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kL1: return "l1";
    case Metric::kL2: return "l2";
    case Metric::kL2Squared: return "l2sq";
    case Metric::kCosine: return "cosine";
    case Metric::kHamming: return "hamming";
    case Metric::kJaccard: return "jaccard";
  }
  return "?";
}

inline std::optional<Metric> parse_metric(std::string_view text) {
  for (auto m : {Metric::kL1, Metric::kL2, Metric::kL2Squared, Metric::kCosine, Metric::kHamming,
                 Metric::kJaccard}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

constexpr bool metric_supports(Metric metric, Dtype dtype) {
  const bool binary = metric == Metric::kHamming || metric == Metric::kJaccard;
  return binary == (dtype == Dtype::kPackedBits);
}

/// L1 over {0,1} vectors is the Hamming distance, so L1 requested on packed
/// codes is served by the Hamming kernel. Every other mismatch is an error.
inline Metric resolve_metric(Metric metric, Dtype dtype) {
  if (dtype == Dtype::kPackedBits && metric == Metric::kL1) return Metric::kHamming;
  if (!metric_supports(metric, dtype)) {
    throw ValidationError("metric " + std::string(to_string(metric)) + " does not apply to " +
                          std::string(to_string(dtype)) + " vectors");
  }
  return metric;
}

struct Neighbor {
  RowId row = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Total order used for every ranking: distance, then row id.
constexpr bool ranks_before(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
}

namespace kernels {

inline double l1(const float* a, const float* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) {
      acc[l] += std::fabs(static_cast<double>(a[i + l]) - static_cast<double>(b[i + l]));
    }
  }
  double tail = 0;
  for (; i < n; ++i) tail += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
}

inline double l2_squared(const float* a, const float* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) {
      const double d = static_cast<double>(a[i + l]) - static_cast<double>(b[i + l]);
      acc[l] += d * d;
    }
  }
  double tail = 0;
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    tail += d * d;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
}

struct DotNorms {
  double dot = 0, norm_a = 0, norm_b = 0;
};

inline DotNorms dot_norms(const float* a, const float* b, std::size_t n) {
  double dot[4] = {0, 0, 0, 0}, na[4] = {0, 0, 0, 0}, nb[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) {
      const double x = a[i + l], y = b[i + l];
      dot[l] += x * y;
      na[l] += x * x;
      nb[l] += y * y;
    }
  }
  DotNorms r;
  for (; i < n; ++i) {
    const double x = a[i], y = b[i];
    r.dot += x * y;
    r.norm_a += x * x;
    r.norm_b += y * y;
  }
  r.dot += (dot[0] + dot[1]) + (dot[2] + dot[3]);
  r.norm_a += (na[0] + na[1]) + (na[2] + na[3]);
  r.norm_b += (nb[0] + nb[1]) + (nb[2] + nb[3]);
  return r;
}

inline double cosine(const float* a, const float* b, std::size_t n) {
  const DotNorms s = dot_norms(a, b, n);
  if (s.norm_a == 0.0 || s.norm_b == 0.0) {
    throw DomainError("cosine distance is undefined for a zero vector");
  }
  const double d = 1.0 - s.dot / std::sqrt(s.norm_a * s.norm_b);
  return std::clamp(d, 0.0, 2.0);
}

inline std::uint64_t load_word(const std::uint8_t* p) {
  std::uint64_t w;
  std::memcpy(&w, p, 8);
  return w;
}

inline std::uint64_t hamming(const std::uint8_t* a, const std::uint8_t* b, std::size_t nbytes) {
  std::uint64_t d = 0;
  std::size_t i = 0;
  for (; i + 8 <= nbytes; i += 8) d += std::popcount(load_word(a + i) ^ load_word(b + i));
  for (; i < nbytes; ++i) d += std::popcount(static_cast<std::uint8_t>(a[i] ^ b[i]));
  return d;
}

inline double jaccard(const std::uint8_t* a, const std::uint8_t* b, std::size_t nbytes) {
  std::uint64_t inter = 0, uni = 0;
  std::size_t i = 0;
  for (; i + 8 <= nbytes; i += 8) {
    const std::uint64_t x = load_word(a + i), y = load_word(b + i);
    inter += std::popcount(x & y);
    uni += std::popcount(x | y);
  }
  for (; i < nbytes; ++i) {
    inter += std::popcount(static_cast<std::uint8_t>(a[i] & b[i]));
    uni += std::popcount(static_cast<std::uint8_t>(a[i] | b[i]));
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace kernels

/// Distance under metric M with no compatibility checks. Callers validate
/// dtype and dim once, then call this in their inner loops.
template <Metric M>
inline double distance_unchecked(const VectorView& a, const VectorView& b) {
  if constexpr (M == Metric::kL1) {
    return kernels::l1(a.floats.data(), b.floats.data(), a.dim);
  } else if constexpr (M == Metric::kL2) {
    return std::sqrt(kernels::l2_squared(a.floats.data(), b.floats.data(), a.dim));
  } else if constexpr (M == Metric::kL2Squared) {
    return kernels::l2_squared(a.floats.data(), b.floats.data(), a.dim);
  } else if constexpr (M == Metric::kCosine) {
    return kernels::cosine(a.floats.data(), b.floats.data(), a.dim);
  } else if constexpr (M == Metric::kHamming) {
    return static_cast<double>(kernels::hamming(a.bytes.data(), b.bytes.data(), a.bytes.size()));
  } else {
    return kernels::jaccard(a.bytes.data(), b.bytes.data(), a.bytes.size());
  }
}

/// Invokes fn(std::integral_constant<Metric, M>{}) for the runtime metric.
template <typename Fn>
decltype(auto) visit_metric(Metric metric, Fn&& fn) {
  using std::integral_constant;
  switch (metric) {
    case Metric::kL1: return fn(integral_constant<Metric, Metric::kL1>{});
    case Metric::kL2: return fn(integral_constant<Metric, Metric::kL2>{});
    case Metric::kL2Squared: return fn(integral_constant<Metric, Metric::kL2Squared>{});
    case Metric::kCosine: return fn(integral_constant<Metric, Metric::kCosine>{});
    case Metric::kHamming: return fn(integral_constant<Metric, Metric::kHamming>{});
    case Metric::kJaccard: return fn(integral_constant<Metric, Metric::kJaccard>{});
  }
  throw ValidationError("unknown metric");
}

inline void check_compatible(const VectorView& a, const VectorView& b, Metric metric) {
  if (a.dtype != b.dtype) throw ValidationError("vectors differ in dtype");
  if (a.dim != b.dim) {
    throw ValidationError("vectors differ in dim (" + std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim) + ")");
  }
  if (!metric_supports(metric, a.dtype)) {
    throw ValidationError("metric " + std::string(to_string(metric)) + " does not apply to " +
                          std::string(to_string(a.dtype)) + " vectors");
  }
  if (a.dtype == Dtype::kPackedBits &&
      (a.bytes.size() != packed_row_bytes(a.dim) || b.bytes.size() != packed_row_bytes(b.dim))) {
    throw ValidationError("packed vector byte length does not match its bit count");
  }
}

inline double distance(const VectorView& a, const VectorView& b, Metric metric) {
  check_compatible(a, b, metric);
  return visit_metric(metric, [&](auto m) { return distance_unchecked<decltype(m)::value>(a, b); });
}

/// Distances from `query` to the given database rows (all rows when
/// `subset` is empty-optional), in request order.
inline std::vector<Neighbor> batch_distances(const VectorView& query, const EmbeddingMatrix& database,
                                             Metric metric,
                                             std::optional<std::span<const RowId>> subset = std::nullopt) {
  if (query.dtype != database.dtype() || query.dim != database.dim()) {
    throw ValidationError("query (" + std::string(to_string(query.dtype)) + "/" +
                          std::to_string(query.dim) + ") does not match database (" +
                          std::string(to_string(database.dtype())) + "/" +
                          std::to_string(database.dim()) + ")");
  }
  check_compatible(query, query, metric);
  std::vector<Neighbor> out;
  visit_metric(metric, [&](auto m) {
    constexpr Metric kM = decltype(m)::value;
    if (subset) {
      out.reserve(subset->size());
      for (RowId r : *subset) {
        if (r >= database.count()) {
          throw ValidationError("row " + std::to_string(r) + " out of range for a " +
                                std::to_string(database.count()) + "-row database");
        }
        out.push_back({r, distance_unchecked<kM>(query, database.row(r))});
      }
    } else {
      out.reserve(database.count());
      for (RowId r = 0; r < database.count(); ++r) {
        out.push_back({r, distance_unchecked<kM>(query, database.row(r))});
      }
    }
  });
  return out;
}

}  // namespace georet
