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

// Exhaustive and inverted-file (IVF) retrieval indexes.
//
// IVF training clusters the indexed rows into nlist cells: Lloyd k-means
// under squared L2 for float vectors, and k-majority (Hamming assignment,
// per-bit majority update, ties -> 1) for packed codes. Both start from a
// k-means++ style D^2-weighted seeding, stop after max_iterations update
// steps or once an assignment pass changes nothing, and repair empty cells
// by stealing the point farthest from its own centroid.
//
// Search ranks centroids against the query under the index metric (ties by
// centroid id), scans the top nprobe cells exhaustively and keeps the k best
// rows under the (distance, row id) order.
//
// GIVF layout (integers little-endian, varint = unsigned LEB128):
//
//   offset  size  field
//   0       4     magic "GIVF"
//   4       2     version (1)
//   6       1     kind (0 = flat, 1 = ivf)
//   7       1     metric
//   8       8     database row count
//   16      4     database dim
//   20      1     database dtype
//   21      3     reserved (0)
//   24      4     nlist             (0 for flat)
//   28      4     nprobe            (0 for flat)
//   32      4     max_iterations    (0 for flat)
//   36      4     max_points_per_centroid
//   40      8     seed
//   48      8     indexed row count
//   56      ...   ivf only: centroids as an embedded GEMB block
//           ...   lists (flat: one list, ivf: nlist lists), each as
//                 varint length, then the first id and successive deltas
//                 of the ascending row ids as varints

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "georet/error.hpp"
#include "georet/metrics.hpp"
#include "georet/parallel.hpp"
#include "georet/rng.hpp"
#include "georet/vecstore.hpp"

namespace georet {

struct IvfParams {
  std::uint32_t nlist = 128;
  std::uint32_t nprobe = 8;
  std::uint32_t max_iterations = 25;
  std::uint64_t seed = 0;
  // Training uses at most nlist * max_points_per_centroid sampled rows
  // (0 = all rows). Every row is still assigned to a list afterwards.
  std::uint32_t max_points_per_centroid = 256;

  friend bool operator==(const IvfParams&, const IvfParams&) = default;
};

/// Result list ordered by (distance, row id), at most k long.
struct RetrievalResult {
  std::vector<Neighbor> entries;

  std::size_t size() const { return entries.size(); }
  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

struct ClusteringResult {
  EmbeddingMatrix centroids;
  std::vector<std::uint32_t> assignments;  // parallel to the input rows
  std::uint32_t iterations = 0;            // centroid update steps performed
  bool converged = false;
};

namespace detail {

inline void check_rows_in_range(const EmbeddingMatrix& db, std::span<const RowId> rows) {
  for (RowId r : rows) {
    if (r >= db.count()) {
      throw ValidationError("row " + std::to_string(r) + " out of range for a " +
                            std::to_string(db.count()) + "-row database");
    }
  }
}

inline void check_training_params(const IvfParams& p, std::size_t rows) {
  if (p.nlist == 0) throw ConfigError("nlist must be positive");
  if (p.nlist > rows) {
    throw ConfigError("nlist (" + std::to_string(p.nlist) + ") exceeds the number of rows (" +
                      std::to_string(rows) + ")");
  }
  if (p.max_iterations == 0) throw ConfigError("max_iterations must be positive");
}

/// Centroid storage and update rules for float vectors under squared L2.
struct FloatSpace {
  static constexpr Dtype kDtype = Dtype::kFloat32;
  std::uint32_t dim;
  std::vector<float> centroids;

  FloatSpace(std::uint32_t d, std::size_t k) : dim(d), centroids(k * d, 0.0f) {}

  VectorView centroid(std::size_t c) const {
    return VectorView::of_floats(std::span<const float>(centroids).subspan(c * dim, dim));
  }
  static double distance(const VectorView& a, const VectorView& b) {
    return kernels::l2_squared(a.floats.data(), b.floats.data(), a.dim);
  }
  // D^2 seeding weight; distance() is already squared.
  static double seed_weight(double d) { return d; }

  void set_centroid(std::size_t c, const VectorView& v) {
    std::copy(v.floats.begin(), v.floats.end(), centroids.begin() + c * dim);
  }

  // Means of members, accumulated in double in member order.
  void update(const EmbeddingMatrix& db, std::span<const RowId> points,
              std::span<const std::uint32_t> assign, std::span<const std::size_t> counts) {
    const std::size_t k = counts.size();
    std::vector<double> sums(k * dim, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto row = db.float_row(points[i]);
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
      for (std::uint32_t j = 0; j < dim; ++j) s[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::uint32_t j = 0; j < dim; ++j) {
        centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
      }
    }
  }

  EmbeddingMatrix to_matrix(std::size_t k) && {
    return EmbeddingMatrix::from_floats(k, dim, std::move(centroids));
  }
};

/// Centroid storage and update rules for packed codes under Hamming.
struct BinarySpace {
  static constexpr Dtype kDtype = Dtype::kPackedBits;
  std::uint32_t dim;
  std::size_t row_bytes;
  std::vector<std::uint8_t> centroids;

  BinarySpace(std::uint32_t d, std::size_t k)
      : dim(d), row_bytes(packed_row_bytes(d)), centroids(k * packed_row_bytes(d), 0) {}

  VectorView centroid(std::size_t c) const {
    return VectorView::of_bits(std::span<const std::uint8_t>(centroids).subspan(c * row_bytes, row_bytes), dim);
  }
  static double distance(const VectorView& a, const VectorView& b) {
    return static_cast<double>(kernels::hamming(a.bytes.data(), b.bytes.data(), a.bytes.size()));
  }
  static double seed_weight(double d) { return d * d; }

  void set_centroid(std::size_t c, const VectorView& v) {
    std::copy(v.bytes.begin(), v.bytes.end(), centroids.begin() + c * row_bytes);
  }

  // Per-bit majority of members; a tie sets the bit.
  void update(const EmbeddingMatrix& db, std::span<const RowId> points,
              std::span<const std::uint32_t> assign, std::span<const std::size_t> counts) {
    const std::size_t k = counts.size();
    std::vector<std::uint32_t> ones(k * dim, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto code = db.code_row(points[i]);
      std::uint32_t* o = ones.data() + static_cast<std::size_t>(assign[i]) * dim;
      for (std::uint32_t j = 0; j < dim; ++j) o[j] += get_bit(code, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto out = std::span<std::uint8_t>(centroids).subspan(c * row_bytes, row_bytes);
      std::fill(out.begin(), out.end(), std::uint8_t{0});
      for (std::uint32_t j = 0; j < dim; ++j) {
        if (2 * static_cast<std::size_t>(ones[c * dim + j]) >= counts[c]) set_bit(out, j);
      }
    }
  }

  EmbeddingMatrix to_matrix(std::size_t k) && {
    return EmbeddingMatrix::from_bits(k, dim, std::move(centroids));
  }
};

/// Deterministic training sample: all rows, or a seeded partial
/// Fisher-Yates draw of `cap` rows returned in ascending order.
inline std::vector<RowId> training_sample(std::span<const RowId> rows, std::size_t cap, Rng& rng) {
  std::vector<RowId> sample(rows.begin(), rows.end());
  if (cap == 0 || sample.size() <= cap) return sample;
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + rng.uniform_index(sample.size() - i);
    std::swap(sample[i], sample[j]);
  }
  sample.resize(cap);
  std::sort(sample.begin(), sample.end());
  return sample;
}

template <typename Space>
std::uint32_t nearest_centroid(const Space& space, std::size_t k, const VectorView& v) {
  std::uint32_t best = 0;
  double best_d = Space::distance(v, space.centroid(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double d = Space::distance(v, space.centroid(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

template <typename Space>
void seed_centroids(Space& space, std::size_t k, const EmbeddingMatrix& db,
                    std::span<const RowId> points, Rng& rng, unsigned threads) {
  const std::size_t n = points.size();
  std::size_t pick = rng.uniform_index(n);
  space.set_centroid(0, db.row(points[pick]));
  std::vector<double> weight(n);
  parallel_for(n, threads, [&](std::size_t i) {
    weight[i] = Space::seed_weight(Space::distance(db.row(points[i]), space.centroid(0)));
  });
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double w : weight) total += w;
    if (total > 0.0) {
      const double target = rng.uniform_unit() * total;
      double cumulative = 0.0;
      pick = n;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] <= 0.0) continue;
        last_positive = i;
        cumulative += weight[i];
        if (cumulative > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;
    } else {
      // Every point coincides with a chosen centroid.
      pick = rng.uniform_index(n);
    }
    space.set_centroid(c, db.row(points[pick]));
    parallel_for(n, threads, [&](std::size_t i) {
      const double w = Space::seed_weight(Space::distance(db.row(points[i]), space.centroid(c)));
      weight[i] = std::min(weight[i], w);
    });
  }
}

template <typename Space>
ClusteringResult cluster(const EmbeddingMatrix& db, std::span<const RowId> rows, const IvfParams& params,
                         unsigned threads) {
  if (db.dtype() != Space::kDtype) {
    throw ValidationError(Space::kDtype == Dtype::kFloat32 ? "k-means needs float32 vectors"
                                                           : "k-majority needs packed binary codes");
  }
  check_training_params(params, rows.size());
  check_rows_in_range(db, rows);

  const std::size_t k = params.nlist;
  Rng rng(params.seed);
  const std::size_t cap = static_cast<std::size_t>(params.max_points_per_centroid) * k;
  const std::vector<RowId> points = training_sample(rows, cap, rng);
  const std::size_t n = points.size();

  Space space(db.dim(), k);
  seed_centroids(space, k, db, points, rng, threads);

  ClusteringResult result;
  std::vector<std::uint32_t> assign(n, 0), next(n, 0);
  std::vector<std::size_t> counts(k, 0);
  for (std::uint32_t pass = 0;; ++pass) {
    parallel_for(n, threads, [&](std::size_t i) { next[i] = nearest_centroid(space, k, db.row(points[i])); });
    const bool changed = pass == 0 || next != assign;
    assign.swap(next);
    if (!changed) {
      result.converged = true;
      break;
    }
    if (result.iterations == params.max_iterations) break;

    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : assign) ++counts[a];
    space.update(db, points, assign, counts);
    ++result.iterations;

    // Empty cells take the point farthest from its own centroid, drawn only
    // from cells that keep at least one member.
    if (std::find(counts.begin(), counts.end(), std::size_t{0}) != counts.end()) {
      std::vector<double> spread(n);
      parallel_for(n, threads, [&](std::size_t i) {
        spread[i] = Space::distance(db.row(points[i]), space.centroid(assign[i]));
      });
      std::vector<bool> moved(n, false);
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (moved[i] || counts[assign[i]] < 2) continue;
          if (far == n || spread[i] > spread[far]) far = i;
        }
        if (far == n) break;
        --counts[assign[far]];
        assign[far] = static_cast<std::uint32_t>(c);
        counts[c] = 1;
        moved[far] = true;
        space.set_centroid(c, db.row(points[far]));
      }
    }
  }

  result.assignments.resize(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    result.assignments[i] = nearest_centroid(space, k, db.row(rows[i]));
  });
  result.centroids = std::move(space).to_matrix(k);
  return result;
}

/// Bounded selection of the k best neighbors under ranks_before.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void push(const Neighbor& n) {
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (ranks_before(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }

  // Worst kept distance once full; lets scans skip hopeless candidates.
  bool full() const { return heap_.size() == k_; }
  const Neighbor& worst() const { return heap_.front(); }

  std::vector<Neighbor> take_sorted() && {
    std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

inline void check_query(const VectorView& query, const EmbeddingMatrix& db, std::size_t k) {
  if (k == 0) throw ValidationError("k must be positive");
  if (query.dtype != db.dtype()) {
    throw ValidationError("query dtype " + std::string(to_string(query.dtype)) + " does not match index dtype " +
                          std::string(to_string(db.dtype())));
  }
  if (query.dim != db.dim()) {
    throw ValidationError("query dim " + std::to_string(query.dim) + " does not match index dim " +
                          std::to_string(db.dim()));
  }
  if (query.dtype == Dtype::kPackedBits ? query.bytes.size() != packed_row_bytes(query.dim)
                                        : query.floats.size() != query.dim) {
    throw ValidationError("query payload does not match its dim");
  }
}

template <Metric M>
void scan_rows(const VectorView& query, const EmbeddingMatrix& db, std::span<const RowId> rows, TopK& top) {
  for (RowId r : rows) top.push({r, distance_unchecked<M>(query, db.row(r))});
}

// `block` row i holds the vector of database row ids[i].
template <Metric M>
void scan_block(const VectorView& query, const EmbeddingMatrix& block, std::span<const RowId> ids, TopK& top) {
  if constexpr (M == Metric::kHamming) {
    const std::uint8_t* q = query.bytes.data();
    const std::uint8_t* row = block.code_data().data();
    const std::size_t stride = block.row_bytes();
    auto run = [&](auto words) {
      constexpr std::size_t W = decltype(words)::value;
      std::array<std::uint64_t, W> qw;
      for (std::size_t w = 0; w < W; ++w) qw[w] = kernels::load_word(q + 8 * w);
      for (std::size_t i = 0; i < ids.size(); ++i, row += stride) {
        std::uint64_t d = 0;
        for (std::size_t w = 0; w < W; ++w) d += std::popcount(qw[w] ^ kernels::load_word(row + 8 * w));
        top.push({ids[i], static_cast<double>(d)});
      }
    };
    // Fixed word counts for the common code lengths unroll fully.
    using std::integral_constant;
    switch (stride) {
      case 8: run(integral_constant<std::size_t, 1>{}); return;
      case 16: run(integral_constant<std::size_t, 2>{}); return;
      case 32: run(integral_constant<std::size_t, 4>{}); return;
      case 64: run(integral_constant<std::size_t, 8>{}); return;
      case 96: run(integral_constant<std::size_t, 12>{}); return;
      case 128: run(integral_constant<std::size_t, 16>{}); return;
      default: break;
    }
    for (std::size_t i = 0; i < ids.size(); ++i, row += stride) {
      top.push({ids[i], static_cast<double>(kernels::hamming(q, row, stride))});
    }
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) top.push({ids[i], distance_unchecked<M>(query, block.row(i))});
  }
}

}  // namespace detail

inline ClusteringResult train_kmeans(const EmbeddingMatrix& database, std::span<const RowId> rows,
                                     const IvfParams& params, unsigned threads = 1) {
  return detail::cluster<detail::FloatSpace>(database, rows, params, threads);
}

inline ClusteringResult train_kmajority(const EmbeddingMatrix& database, std::span<const RowId> rows,
                                        const IvfParams& params, unsigned threads = 1) {
  return detail::cluster<detail::BinarySpace>(database, rows, params, threads);
}

// ---------------------------------------------------------------------------
// Flat index

class FlatIndex {
 public:
  FlatIndex(std::shared_ptr<const EmbeddingMatrix> database, std::vector<RowId> rows, Metric metric)
      : db_(std::move(database)), rows_(std::move(rows)), metric_(metric) {
    if (!db_) throw ValidationError("flat index needs a database");
    if (rows_.empty()) throw ValidationError("cannot index an empty row set");
    if (!metric_supports(metric_, db_->dtype())) {
      throw ValidationError("metric " + std::string(to_string(metric_)) + " does not apply to " +
                            std::string(to_string(db_->dtype())) + " vectors");
    }
    detail::check_rows_in_range(*db_, rows_);
    std::sort(rows_.begin(), rows_.end());
    if (std::adjacent_find(rows_.begin(), rows_.end()) != rows_.end()) {
      throw ValidationError("duplicate row in flat index row set");
    }
  }

  std::size_t size() const { return rows_.size(); }
  Metric metric() const { return metric_; }
  const std::vector<RowId>& rows() const { return rows_; }
  const EmbeddingMatrix& database() const { return *db_; }
  const std::shared_ptr<const EmbeddingMatrix>& database_ptr() const { return db_; }

  RetrievalResult search(const VectorView& query, std::size_t k) const {
    detail::check_query(query, *db_, k);
    detail::TopK top(std::min(k, rows_.size()));
    visit_metric(metric_, [&](auto m) { detail::scan_rows<decltype(m)::value>(query, *db_, rows_, top); });
    return {std::move(top).take_sorted()};
  }

 private:
  std::shared_ptr<const EmbeddingMatrix> db_;
  std::vector<RowId> rows_;
  Metric metric_;
};

inline FlatIndex build_flat(std::shared_ptr<const EmbeddingMatrix> database, std::vector<RowId> rows,
                            Metric metric) {
  return FlatIndex(std::move(database), std::move(rows), metric);
}

// ---------------------------------------------------------------------------
// IVF index

class IvfIndex {
 public:
  /// Assembles an index from trained parts, checking every structural
  /// invariant: lists sorted and disjoint, their union equal to `rows`,
  /// centroids shaped like the database.
  IvfIndex(std::shared_ptr<const EmbeddingMatrix> database, Metric metric, IvfParams params,
           EmbeddingMatrix centroids, std::vector<std::vector<RowId>> lists)
      : db_(std::move(database)),
        metric_(metric),
        params_(params),
        centroids_(std::move(centroids)),
        lists_(std::move(lists)) {
    if (!db_) throw ValidationError("ivf index needs a database");
    if (!metric_supports(metric_, db_->dtype())) {
      throw ValidationError("metric " + std::string(to_string(metric_)) + " does not apply to " +
                            std::string(to_string(db_->dtype())) + " vectors");
    }
    if (params_.nlist == 0 || lists_.size() != params_.nlist || centroids_.count() != params_.nlist) {
      throw ValidationError("ivf index: nlist, list count and centroid count disagree");
    }
    check_nprobe(params_.nprobe);
    if (centroids_.dtype() != db_->dtype() || centroids_.dim() != db_->dim()) {
      throw ValidationError("ivf index: centroids do not match the database dtype/dim");
    }
    for (const auto& list : lists_) {
      if (!std::is_sorted(list.begin(), list.end()) ||
          std::adjacent_find(list.begin(), list.end()) != list.end()) {
        throw ValidationError("ivf index: inverted list is not strictly ascending");
      }
      detail::check_rows_in_range(*db_, list);
      rows_.insert(rows_.end(), list.begin(), list.end());
    }
    std::sort(rows_.begin(), rows_.end());
    if (std::adjacent_find(rows_.begin(), rows_.end()) != rows_.end()) {
      throw ValidationError("ivf index: a row appears in more than one list");
    }
    if (rows_.empty()) throw ValidationError("cannot index an empty row set");
    // Each list keeps a contiguous copy of its vectors for scanning.
    list_vectors_.reserve(lists_.size());
    for (const auto& list : lists_) list_vectors_.push_back(db_->select_rows(list));
  }

  std::size_t size() const { return rows_.size(); }
  Metric metric() const { return metric_; }
  const IvfParams& params() const { return params_; }
  const EmbeddingMatrix& centroids() const { return centroids_; }
  const std::vector<std::vector<RowId>>& lists() const { return lists_; }
  const std::vector<RowId>& rows() const { return rows_; }
  const EmbeddingMatrix& database() const { return *db_; }
  const std::shared_ptr<const EmbeddingMatrix>& database_ptr() const { return db_; }

  /// Centroid ids ordered by (distance to query, id), nprobe of them.
  std::vector<std::uint32_t> probe_order(const VectorView& query, std::uint32_t nprobe) const {
    std::vector<Neighbor> ranked;
    ranked.reserve(params_.nlist);
    visit_metric(metric_, [&](auto m) {
      for (std::uint32_t c = 0; c < params_.nlist; ++c) {
        ranked.push_back({c, distance_unchecked<decltype(m)::value>(query, centroids_.row(c))});
      }
    });
    std::partial_sort(ranked.begin(), ranked.begin() + nprobe, ranked.end(), ranks_before);
    std::vector<std::uint32_t> order(nprobe);
    for (std::uint32_t i = 0; i < nprobe; ++i) order[i] = static_cast<std::uint32_t>(ranked[i].row);
    return order;
  }

  RetrievalResult search(const VectorView& query, std::size_t k,
                         std::optional<std::uint32_t> nprobe_override = std::nullopt) const {
    detail::check_query(query, *db_, k);
    const std::uint32_t nprobe = nprobe_override.value_or(params_.nprobe);
    check_nprobe(nprobe);
    const auto probes = probe_order(query, nprobe);
    std::size_t candidates = 0;
    for (auto c : probes) candidates += lists_[c].size();
    detail::TopK top(std::min(k, std::max<std::size_t>(candidates, 1)));
    visit_metric(metric_, [&](auto m) {
      for (auto c : probes) detail::scan_block<decltype(m)::value>(query, list_vectors_[c], lists_[c], top);
    });
    return {std::move(top).take_sorted()};
  }

 private:
  void check_nprobe(std::uint32_t nprobe) const {
    if (nprobe == 0 || nprobe > params_.nlist) {
      throw ConfigError("nprobe must be in [1, nlist=" + std::to_string(params_.nlist) + "], got " +
                        std::to_string(nprobe));
    }
  }

  std::shared_ptr<const EmbeddingMatrix> db_;
  Metric metric_;
  IvfParams params_;
  EmbeddingMatrix centroids_;
  std::vector<std::vector<RowId>> lists_;
  std::vector<EmbeddingMatrix> list_vectors_;
  std::vector<RowId> rows_;
};

/// Trains centroids (k-means for floats, k-majority for codes) over `rows`
/// and fills the inverted lists from the final assignment.
inline IvfIndex build_ivf(std::shared_ptr<const EmbeddingMatrix> database, std::vector<RowId> rows,
                          Metric metric, const IvfParams& params, unsigned threads = 1) {
  if (!database) throw ValidationError("ivf index needs a database");
  if (!metric_supports(metric, database->dtype())) {
    throw ValidationError("metric " + std::string(to_string(metric)) + " does not apply to " +
                          std::string(to_string(database->dtype())) + " vectors");
  }
  if (rows.empty()) throw ValidationError("cannot index an empty row set");
  if (params.nprobe == 0 || params.nprobe > params.nlist) {
    throw ConfigError("nprobe must be in [1, nlist=" + std::to_string(params.nlist) + "], got " +
                      std::to_string(params.nprobe));
  }
  std::sort(rows.begin(), rows.end());
  if (std::adjacent_find(rows.begin(), rows.end()) != rows.end()) {
    throw ValidationError("duplicate row in ivf row set");
  }
  ClusteringResult trained = database->is_float() ? train_kmeans(*database, rows, params, threads)
                                                  : train_kmajority(*database, rows, params, threads);
  std::vector<std::vector<RowId>> lists(params.nlist);
  for (std::size_t i = 0; i < rows.size(); ++i) lists[trained.assignments[i]].push_back(rows[i]);
  return IvfIndex(std::move(database), metric, params, std::move(trained.centroids), std::move(lists));
}

using Index = std::variant<FlatIndex, IvfIndex>;

inline RetrievalResult search(const Index& index, const VectorView& query, std::size_t k,
                              std::optional<std::uint32_t> nprobe_override = std::nullopt) {
  return std::visit(
      [&](const auto& idx) -> RetrievalResult {
        if constexpr (std::is_same_v<std::decay_t<decltype(idx)>, IvfIndex>) {
          return idx.search(query, k, nprobe_override);
        } else {
          return idx.search(query, k);
        }
      },
      index);
}

inline const EmbeddingMatrix& index_database(const Index& index) {
  return std::visit([](const auto& idx) -> const EmbeddingMatrix& { return idx.database(); }, index);
}

inline Metric index_metric(const Index& index) {
  return std::visit([](const auto& idx) { return idx.metric(); }, index);
}

// ---------------------------------------------------------------------------
// GIVF persistence

inline constexpr std::array<char, 4> kGivfMagic = {'G', 'I', 'V', 'F'};
inline constexpr std::uint16_t kGivfVersion = 1;
inline constexpr std::size_t kGivfHeaderBytes = 56;

namespace detail {

inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint64_t get_varint(std::istream& in) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw CorruptionError("truncated GIVF list data");
    v |= static_cast<std::uint64_t>(c & 0x7F) << shift;
    if (!(c & 0x80)) return v;
  }
  throw CorruptionError("malformed varint in GIVF list data");
}

inline void encode_list(std::vector<std::uint8_t>& out, std::span<const RowId> list) {
  put_varint(out, list.size());
  RowId prev = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    put_varint(out, i == 0 ? list[i] : list[i] - prev);
    prev = list[i];
  }
}

inline std::vector<RowId> decode_list(std::istream& in, std::uint64_t max_len) {
  const std::uint64_t n = get_varint(in);
  if (n > max_len) throw CorruptionError("GIVF list longer than the indexed row count");
  std::vector<RowId> list(n);
  RowId prev = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t v = get_varint(in);
    if (i > 0 && v == 0) throw CorruptionError("GIVF list is not strictly ascending");
    list[i] = i == 0 ? v : prev + v;
    prev = list[i];
  }
  return list;
}

inline std::array<std::uint8_t, kGivfHeaderBytes> givf_header(std::uint8_t kind, Metric metric,
                                                              const EmbeddingMatrix& db, const IvfParams& p,
                                                              std::uint64_t indexed) {
  std::array<std::uint8_t, kGivfHeaderBytes> h{};
  std::memcpy(h.data(), kGivfMagic.data(), 4);
  put_le<std::uint16_t>(h.data() + 4, kGivfVersion);
  h[6] = kind;
  h[7] = static_cast<std::uint8_t>(metric);
  put_le<std::uint64_t>(h.data() + 8, db.count());
  put_le<std::uint32_t>(h.data() + 16, db.dim());
  h[20] = static_cast<std::uint8_t>(db.dtype());
  put_le<std::uint32_t>(h.data() + 24, p.nlist);
  put_le<std::uint32_t>(h.data() + 28, p.nprobe);
  put_le<std::uint32_t>(h.data() + 32, p.max_iterations);
  put_le<std::uint32_t>(h.data() + 36, p.max_points_per_centroid);
  put_le<std::uint64_t>(h.data() + 40, p.seed);
  put_le<std::uint64_t>(h.data() + 48, indexed);
  return h;
}

}  // namespace detail

/// Writes the index structure (not the database vectors). Returns bytes written.
inline std::uint64_t save_index(const Index& index, std::ostream& out) {
  detail::CountingWriter w(out);
  std::vector<std::uint8_t> body;
  if (const auto* flat = std::get_if<FlatIndex>(&index)) {
    auto header = detail::givf_header(0, flat->metric(), flat->database(), IvfParams{0, 0, 0, 0, 0}, flat->size());
    w.write(header.data(), header.size());
    detail::encode_list(body, flat->rows());
  } else {
    const auto& ivf = std::get<IvfIndex>(index);
    auto header = detail::givf_header(1, ivf.metric(), ivf.database(), ivf.params(), ivf.size());
    w.write(header.data(), header.size());
    std::ostringstream centroids;
    write_embeddings(ivf.centroids(), centroids);
    const std::string block = std::move(centroids).str();
    w.write(block.data(), block.size());
    for (const auto& list : ivf.lists()) detail::encode_list(body, list);
  }
  w.write(body.data(), body.size());
  return w.written();
}

/// Reads a GIVF stream and attaches it to `database`, which must have the
/// shape recorded when the index was saved.
inline Index load_index(std::istream& in, std::shared_ptr<const EmbeddingMatrix> database) {
  if (!database) throw ValidationError("load_index needs a database");
  std::array<std::uint8_t, kGivfHeaderBytes> h{};
  const std::size_t got = detail::read_some(in, h.data(), h.size());
  if (got >= 4 && std::memcmp(h.data(), kGivfMagic.data(), 4) != 0) throw FormatError("bad magic: not a GIVF stream");
  if (got < h.size()) throw CorruptionError("truncated GIVF header");
  const auto version = detail::get_le<std::uint16_t>(h.data() + 4);
  if (version != kGivfVersion) throw FormatError("unsupported GIVF version " + std::to_string(version));
  const std::uint8_t kind = h[6];
  if (kind > 1) throw FormatError("unknown GIVF index kind " + std::to_string(kind));
  if (h[7] > static_cast<std::uint8_t>(Metric::kJaccard)) throw FormatError("unknown GIVF metric");
  if (h[21] || h[22] || h[23]) throw FormatError("GIVF reserved bytes are nonzero");
  const auto metric = static_cast<Metric>(h[7]);
  const auto db_count = detail::get_le<std::uint64_t>(h.data() + 8);
  const auto db_dim = detail::get_le<std::uint32_t>(h.data() + 16);
  const auto db_dtype = h[20];
  if (db_count != database->count() || db_dim != database->dim() ||
      db_dtype != static_cast<std::uint8_t>(database->dtype())) {
    throw ValidationError("index was built over a " + std::to_string(db_count) + " x " + std::to_string(db_dim) +
                          " " + std::string(to_string(static_cast<Dtype>(db_dtype & 1))) +
                          " database, but the attached one is " + std::to_string(database->count()) + " x " +
                          std::to_string(database->dim()) + " " + std::string(to_string(database->dtype())));
  }
  IvfParams params;
  params.nlist = detail::get_le<std::uint32_t>(h.data() + 24);
  params.nprobe = detail::get_le<std::uint32_t>(h.data() + 28);
  params.max_iterations = detail::get_le<std::uint32_t>(h.data() + 32);
  params.max_points_per_centroid = detail::get_le<std::uint32_t>(h.data() + 36);
  params.seed = detail::get_le<std::uint64_t>(h.data() + 40);
  const auto indexed = detail::get_le<std::uint64_t>(h.data() + 48);

  auto expect_end = [&] {
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptionError("trailing bytes after GIVF data");
  };

  if (kind == 0) {
    auto rows = detail::decode_list(in, indexed);
    if (rows.size() != indexed) throw CorruptionError("GIVF flat row count disagrees with header");
    expect_end();
    return FlatIndex(std::move(database), std::move(rows), metric);
  }
  EmbeddingMatrix centroids = read_embeddings(in);
  if (params.nlist > db_count || centroids.count() != params.nlist) {
    throw CorruptionError("GIVF centroid block disagrees with nlist");
  }
  std::vector<std::vector<RowId>> lists(params.nlist);
  std::uint64_t total = 0;
  for (auto& list : lists) {
    list = detail::decode_list(in, indexed - total);
    total += list.size();
  }
  if (total != indexed) throw CorruptionError("GIVF lists disagree with the indexed row count");
  expect_end();
  return IvfIndex(std::move(database), metric, params, std::move(centroids), std::move(lists));
}

}  // namespace georet
