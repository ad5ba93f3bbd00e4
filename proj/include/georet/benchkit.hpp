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

// Synthetic labelled embeddings and IVF search latency benchmarks.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "georet/compress.hpp"
#include "georet/error.hpp"
#include "georet/format.hpp"
#include "georet/index.hpp"
#include "georet/metrics.hpp"
#include "georet/rng.hpp"
#include "georet/vecstore.hpp"

namespace georet {

struct SyntheticData {
  EmbeddingMatrix embeddings;
  DatasetManifest manifest;
};

/// Gaussian class clusters. Each of `num_classes` centers is a random unit
/// vector; record i belongs to class i % num_classes and is its center plus
/// isotropic noise with per-component sigma cluster_spread / sqrt(dim), so
/// cluster_spread is the expected noise norm. Within each class, records
/// cycle through train, train, train, val, test (60/20/20). Labels are
/// singleton sets. All draws come from one Rng(seed) stream: centers first,
/// then records in order.
inline SyntheticData generate_synthetic(std::size_t count, std::uint32_t dim, std::uint32_t num_classes,
                                        double cluster_spread, std::uint64_t seed) {
  if (num_classes == 0) throw ConfigError("synthetic data needs at least one class");
  if (num_classes > count) {
    throw ConfigError("num_classes (" + std::to_string(num_classes) + ") exceeds count (" + std::to_string(count) +
                      ")");
  }
  if (dim == 0) throw ConfigError("dim must be positive");
  if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread)) {
    throw ConfigError("cluster_spread must be a finite non-negative number");
  }

  Rng rng(seed);
  std::vector<double> centers(static_cast<std::size_t>(num_classes) * dim);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    double* center = centers.data() + static_cast<std::size_t>(c) * dim;
    double norm2 = 0.0;
    while (norm2 == 0.0) {
      for (std::uint32_t j = 0; j < dim; ++j) {
        center[j] = rng.normal();
        norm2 += center[j] * center[j];
      }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::uint32_t j = 0; j < dim; ++j) center[j] *= inv;
  }

  const double sigma = cluster_spread / std::sqrt(static_cast<double>(dim));
  std::vector<float> values(count * dim);
  std::vector<Record> records(count);
  static constexpr Split kCycle[5] = {Split::kTrain, Split::kTrain, Split::kTrain, Split::kVal, Split::kTest};
  for (std::size_t i = 0; i < count; ++i) {
    const auto cls = static_cast<std::uint32_t>(i % num_classes);
    const double* center = centers.data() + static_cast<std::size_t>(cls) * dim;
    float* out = values.data() + i * dim;
    for (std::uint32_t j = 0; j < dim; ++j) {
      out[j] = static_cast<float>(center[j] + (sigma > 0.0 ? sigma * rng.normal() : 0.0));
    }
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%07zu", i);
    records[i] = Record{id, i, kCycle[(i / num_classes) % 5], {cls}};
  }

  std::vector<std::string> vocabulary(num_classes);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "class_%03u", c);
    vocabulary[c] = name;
  }
  return {EmbeddingMatrix::from_floats(count, dim, std::move(values)),
          DatasetManifest(std::move(records), std::move(vocabulary))};
}

// ---------------------------------------------------------------------------
// Latency benchmark

struct BenchVariant {
  Dtype dtype = Dtype::kPackedBits;
  std::uint32_t length = 64;

  friend bool operator==(const BenchVariant&, const BenchVariant&) = default;
};

/// "binary:64" / "float:768"
inline BenchVariant parse_bench_variant(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("variant '" + std::string(text) + "' is not type:length");
  const auto type = text.substr(0, colon);
  BenchVariant v;
  if (type == "binary") v.dtype = Dtype::kPackedBits;
  else if (type == "float") v.dtype = Dtype::kFloat32;
  else throw ConfigError("variant type must be binary or float, got '" + std::string(type) + "'");
  const auto len = text.substr(colon + 1);
  std::uint32_t n = 0;
  auto [ptr, ec] = std::from_chars(len.data(), len.data() + len.size(), n);
  if (ec != std::errc{} || ptr != len.data() + len.size() || n == 0) {
    throw ConfigError("variant length must be a positive integer, got '" + std::string(len) + "'");
  }
  v.length = n;
  return v;
}

inline std::string variant_type_name(Dtype dtype) { return dtype == Dtype::kFloat32 ? "float" : "binary"; }

struct BenchConfig {
  std::vector<std::size_t> db_sizes = {10000, 50000, 100000};
  std::vector<BenchVariant> variants = {{Dtype::kPackedBits, 64}, {Dtype::kPackedBits, 768}, {Dtype::kFloat32, 768}};
  std::size_t queries_per_size = 200;
  std::size_t repeats = 3;
  std::size_t warmup = 100;
  IvfParams index;  // nlist 128, nprobe 8
  std::size_t k = 20;
  std::uint64_t seed = 0;
  // Binary variants compress float data of this dim: binarize when the
  // length equals it, trivial hash otherwise.
  std::uint32_t source_dim = 768;
  std::uint32_t num_classes = 100;
  double cluster_spread = 0.5;
  unsigned build_threads = 1;
  unsigned clients = 0;  // > 0 adds a throughput run with this many threads
};

struct BenchRow {
  Dtype dtype = Dtype::kPackedBits;
  std::uint32_t length = 0;
  std::size_t db_size = 0;
  double median_ms = 0;
  double p95_ms = 0;
  double mean_ms = 0;
  std::size_t samples = 0;

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct ThroughputRow {
  Dtype dtype = Dtype::kPackedBits;
  std::uint32_t length = 0;
  std::size_t db_size = 0;
  unsigned clients = 0;
  std::size_t queries = 0;
  double queries_per_second = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<ThroughputRow> throughput;
  unsigned cores = 0;
  std::string memory_note;
};

enum class BenchPhase { kGenerate, kBuild, kWarmup, kMeasure, kThroughput };

/// Optional observer told when each phase starts (begin = true) and ends.
using BenchObserver = std::function<void(BenchPhase, bool begin)>;

namespace detail {

inline std::uint64_t physical_memory_bytes(bool available_only) {
  const long pages = sysconf(available_only ? _SC_AVPHYS_PAGES : _SC_PHYS_PAGES);
  const long page = sysconf(_SC_PAGESIZE);
  if (pages <= 0 || page <= 0) return 0;
  return static_cast<std::uint64_t>(pages) * static_cast<std::uint64_t>(page);
}

inline void validate(const BenchConfig& c) {
  if (c.db_sizes.empty()) throw ConfigError("bench needs at least one database size");
  for (std::size_t i = 0; i < c.db_sizes.size(); ++i) {
    if (c.db_sizes[i] == 0) throw ConfigError("database sizes must be positive");
    if (i && c.db_sizes[i] <= c.db_sizes[i - 1]) throw ConfigError("database sizes must be strictly ascending");
  }
  if (c.variants.empty()) throw ConfigError("bench needs at least one variant");
  if (c.repeats == 0) throw ConfigError("repeats must be at least 1");
  if (c.queries_per_size == 0) throw ConfigError("queries_per_size must be at least 1");
  if (c.k == 0) throw ConfigError("k must be at least 1");
  if (c.index.nprobe == 0 || c.index.nprobe > c.index.nlist) throw ConfigError("nprobe must be in [1, nlist]");
  if (c.db_sizes.front() < c.index.nlist) {
    throw ConfigError("smallest database size " + std::to_string(c.db_sizes.front()) + " is below nlist " +
                      std::to_string(c.index.nlist));
  }
  for (const auto& v : c.variants) {
    if (v.dtype == Dtype::kPackedBits && v.length != c.source_dim) check_trivial_hash_bits(c.source_dim, v.length);
  }
}

inline double percentile_nearest_rank(const std::vector<double>& sorted, double p) {
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace detail

/// Times single IVF searches for every (variant, size) pair. Only the
/// search call sits between the clock reads; data generation, compression
/// and index building happen before measurement starts.
inline BenchReport run_bench(const BenchConfig& config, const BenchObserver& observe = {}) {
  detail::validate(config);
  auto notify = [&](BenchPhase p, bool begin) {
    if (observe) observe(p, begin);
  };

  BenchReport report;
  report.cores = std::thread::hardware_concurrency();
  report.memory_note = std::to_string(detail::physical_memory_bytes(false) >> 20) + " MiB physical memory";

  for (const auto& variant : config.variants) {
    const std::uint32_t float_dim = variant.dtype == Dtype::kFloat32 ? variant.length : config.source_dim;
    for (const std::size_t size : config.db_sizes) {
      const std::size_t total = size + config.queries_per_size;
      const std::uint64_t need = static_cast<std::uint64_t>(total) * float_dim * sizeof(float) * 2;
      const std::uint64_t avail = detail::physical_memory_bytes(true);
      if (avail != 0 && need > avail) {
        throw ResourceError("database size " + std::to_string(size) + " needs about " + std::to_string(need >> 20) +
                            " MiB but only " + std::to_string(avail >> 20) + " MiB are available");
      }

      notify(BenchPhase::kGenerate, true);
      auto vectors = [&] {
        SyntheticData data = generate_synthetic(total, float_dim, std::min<std::size_t>(config.num_classes, total),
                                                config.cluster_spread, config.seed);
        if (variant.dtype == Dtype::kFloat32) return std::make_shared<const EmbeddingMatrix>(std::move(data.embeddings));
        const CompressionSpec spec = variant.length == float_dim ? CompressionSpec::binarize()
                                                                 : CompressionSpec::trivial_hash(variant.length);
        return std::make_shared<const EmbeddingMatrix>(compress(data.embeddings, spec, config.build_threads));
      }();
      notify(BenchPhase::kGenerate, false);

      notify(BenchPhase::kBuild, true);
      std::vector<RowId> db_rows(size);
      std::iota(db_rows.begin(), db_rows.end(), RowId{0});
      const Metric metric = variant.dtype == Dtype::kFloat32 ? Metric::kL2 : Metric::kHamming;
      const IvfIndex index = build_ivf(vectors, std::move(db_rows), metric, config.index, config.build_threads);
      notify(BenchPhase::kBuild, false);

      auto query = [&](std::size_t i) { return vectors->row(size + i % config.queries_per_size); };
      std::size_t sink = 0;

      notify(BenchPhase::kWarmup, true);
      for (std::size_t i = 0; i < config.warmup; ++i) sink += index.search(query(i), config.k).size();
      notify(BenchPhase::kWarmup, false);

      notify(BenchPhase::kMeasure, true);
      std::vector<double> ms;
      ms.reserve(config.queries_per_size * config.repeats);
      for (std::size_t rep = 0; rep < config.repeats; ++rep) {
        for (std::size_t i = 0; i < config.queries_per_size; ++i) {
          const VectorView q = query(i);
          const auto t0 = std::chrono::steady_clock::now();
          const RetrievalResult r = index.search(q, config.k);
          const auto t1 = std::chrono::steady_clock::now();
          sink += r.size();
          ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
      }
      notify(BenchPhase::kMeasure, false);

      BenchRow row{variant.dtype, variant.length, size, 0, 0, 0, ms.size()};
      double sum = 0;
      for (double v : ms) sum += v;
      row.mean_ms = sum / static_cast<double>(ms.size());
      std::sort(ms.begin(), ms.end());
      const std::size_t n = ms.size();
      row.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
      row.p95_ms = detail::percentile_nearest_rank(ms, 0.95);
      report.rows.push_back(row);

      if (config.clients > 0) {
        notify(BenchPhase::kThroughput, true);
        const std::size_t per_client = config.queries_per_size * config.repeats;
        std::atomic<std::size_t> done{0}, results{0};
        const auto t0 = std::chrono::steady_clock::now();
        {
          std::vector<std::jthread> clients;
          for (unsigned c = 0; c < config.clients; ++c) {
            clients.emplace_back([&, c] {
              std::size_t local = 0;
              for (std::size_t i = 0; i < per_client; ++i) local += index.search(query(i + c), config.k).size();
              done += per_client;
              results += local;
            });
          }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        notify(BenchPhase::kThroughput, false);
        report.throughput.push_back({variant.dtype, variant.length, size, config.clients, done.load(),
                                     secs > 0 ? static_cast<double>(done.load()) / secs : 0.0});
      }
      volatile std::size_t observed = sink;  // keeps the searches from being optimized away
      (void)observed;
    }
  }
  return report;
}

inline constexpr const char* kBenchCsvHeader = "dtype,length,db_size,median_ms,p95_ms,mean_ms,samples";

enum class ReportFormat { kCsv, kText };

inline std::string size_label(std::size_t n) {
  if (n >= 1000000 && n % 1000000 == 0) return std::to_string(n / 1000000) + "M";
  if (n >= 1000 && n % 1000 == 0) return std::to_string(n / 1000) + "K";
  return std::to_string(n);
}

/// CSV: one row per (variant, size) with full-precision milliseconds.
/// Text: variants as rows and database sizes as columns, median latency.
inline std::string emit_report(const BenchReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << kBenchCsvHeader << '\n';
    for (const auto& r : report.rows) {
      out << variant_type_name(r.dtype) << ',' << r.length << ',' << r.db_size << ',' << format_double(r.median_ms)
          << ',' << format_double(r.p95_ms) << ',' << format_double(r.mean_ms) << ',' << r.samples << '\n';
    }
    return out.str();
  }

  std::vector<std::size_t> sizes;
  std::vector<BenchVariant> variants;
  for (const auto& r : report.rows) {
    if (std::find(sizes.begin(), sizes.end(), r.db_size) == sizes.end()) sizes.push_back(r.db_size);
    const BenchVariant v{r.dtype, r.length};
    if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
  }
  std::sort(sizes.begin(), sizes.end());
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"Data type", "Length"};
  for (auto s : sizes) header.push_back(size_label(s));
  table.push_back(header);
  for (const auto& v : variants) {
    std::vector<std::string> line = {v.dtype == Dtype::kFloat32 ? "Float" : "Binary", std::to_string(v.length)};
    for (auto s : sizes) {
      auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const BenchRow& r) {
        return r.dtype == v.dtype && r.length == v.length && r.db_size == s;
      });
      line.push_back(it == report.rows.end() ? "-" : format_fixed(it->median_ms, 3) + " ms");
    }
    table.push_back(line);
  }
  out << align_table(table);
  if (!report.throughput.empty()) {
    out << '\n';
    std::vector<std::vector<std::string>> tp = {{"Data type", "Length", "Images", "Clients", "Queries", "QPS"}};
    for (const auto& t : report.throughput) {
      tp.push_back({t.dtype == Dtype::kFloat32 ? "Float" : "Binary", std::to_string(t.length), size_label(t.db_size),
                    std::to_string(t.clients), std::to_string(t.queries), format_fixed(t.queries_per_second, 1)});
    }
    out << align_table(tp);
  }
  return out.str();
}

inline std::vector<BenchRow> parse_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kBenchCsvHeader)) {
    throw FormatError("bench CSV header mismatch");
  }
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw FormatError("bench CSV row has " + std::to_string(f.size()) + " fields");
    BenchRow r;
    if (f[0] == "float") r.dtype = Dtype::kFloat32;
    else if (f[0] == "binary") r.dtype = Dtype::kPackedBits;
    else throw FormatError("bench CSV: unknown dtype '" + f[0] + "'");
    r.length = static_cast<std::uint32_t>(std::stoul(f[1]));
    r.db_size = std::stoull(f[2]);
    r.median_ms = parse_double(f[3]);
    r.p95_ms = parse_double(f[4]);
    r.mean_ms = parse_double(f[5]);
    r.samples = std::stoull(f[6]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace georet
