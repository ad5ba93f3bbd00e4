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

// Retrieval quality: label-overlap relevance, AP@K and mAP@K.
//
// AP@K for one query with relevance flags r_1..r_n (n <= K, best first):
//
//   AP = (1 / R) * sum_{i : r_i = 1} (r_1 + ... + r_i) / i
//
// where R is the number of relevant items among the n retrieved; a query
// with R = 0 scores 0. Queries with no relevant item anywhere in the
// database are left out of the mean and counted in skipped_queries.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georet/compress.hpp"
#include "georet/error.hpp"
#include "georet/format.hpp"
#include "georet/index.hpp"
#include "georet/metrics.hpp"
#include "georet/parallel.hpp"
#include "georet/vecstore.hpp"

namespace georet {

/// 1 iff the two label sets intersect. Both sets must be sorted and non-empty.
inline int relevance(std::span<const std::uint32_t> query_labels, std::span<const std::uint32_t> candidate_labels) {
  if (query_labels.empty() || candidate_labels.empty()) {
    throw ValidationError("relevance needs non-empty label sets");
  }
  auto a = query_labels.begin();
  auto b = candidate_labels.begin();
  while (a != query_labels.end() && b != candidate_labels.end()) {
    if (*a == *b) return 1;
    if (*a < *b) ++a;
    else ++b;
  }
  return 0;
}

inline double ap_at_k(std::span<const std::uint8_t> rel_flags, std::size_t k) {
  if (rel_flags.size() > k) {
    throw ValidationError("ranking has " + std::to_string(rel_flags.size()) + " entries, more than k=" +
                          std::to_string(k));
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rel_flags.size(); ++i) {
    if (!rel_flags[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

struct EvalConfig {
  std::size_t k = 20;
  Metric metric = Metric::kL1;
  Split query_split = Split::kVal;
  Split db_split = Split::kTest;
  std::optional<CompressionSpec> compression;
  std::optional<IvfParams> ivf;  // nullopt: exhaustive flat search
  std::string label;             // column name; derived from compression when empty
  unsigned threads = 1;
};

/// Row names used for the three standard representations.
inline std::string method_label(const EvalConfig& config) {
  if (!config.label.empty()) return config.label;
  if (!config.compression) return "Embedding";
  switch (config.compression->method) {
    case CompressionMethod::kBinarize: return "Binary emb.";
    case CompressionMethod::kTrivialHash: return std::to_string(config.compression->output_bits) + "-bit hash";
    case CompressionMethod::kLsh: return std::to_string(config.compression->output_bits) + "-bit LSH";
  }
  return "?";
}

struct QueryResult {
  std::string query_id;
  RowId row = 0;
  double ap = 0.0;
  std::size_t relevant_retrieved = 0;
  std::size_t relevant_in_db = 0;
  bool skipped = false;
};

struct EvalReport {
  double map_at_k = 0.0;
  std::vector<QueryResult> per_query;  // ascending by query row
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;
  std::size_t database_size = 0;
  EvalConfig config;
  Metric resolved_metric = Metric::kL1;
  Dtype vector_dtype = Dtype::kFloat32;
  std::uint32_t vector_dim = 0;
};

namespace detail {

/// Counts database items sharing a label with a query, by grouping the
/// database into distinct label sets first.
class RelevantCounter {
 public:
  RelevantCounter(const DatasetManifest& manifest, std::span<const RowId> db_rows) {
    std::map<LabelSet, std::size_t> groups;
    for (RowId r : db_rows) ++groups[manifest.find_row(r)->labels];
    groups_.assign(groups.begin(), groups.end());
  }

  std::size_t count(const LabelSet& query) const {
    std::size_t n = 0;
    for (const auto& [labels, c] : groups_) n += static_cast<std::size_t>(relevance(query, labels)) * c;
    return n;
  }

 private:
  std::vector<std::pair<LabelSet, std::size_t>> groups_;
};

}  // namespace detail

/// Runs every query of config.query_split against config.db_split and
/// scores the top-k lists. Compression, when configured, is applied to the
/// whole matrix so queries and database share one code space.
inline EvalReport evaluate(std::shared_ptr<const EmbeddingMatrix> embeddings, const DatasetManifest& manifest,
                           const EvalConfig& config, const WarningSink& warn = {}) {
  if (!embeddings) throw ValidationError("evaluate needs embeddings");
  if (config.k == 0) throw ConfigError("k must be at least 1");
  manifest.check_rows(embeddings->count());
  const QueryDatabasePair pair = select_pair(manifest, config.query_split, config.db_split, warn);

  std::shared_ptr<const EmbeddingMatrix> vectors = embeddings;
  if (config.compression) {
    vectors = std::make_shared<const EmbeddingMatrix>(compress(*embeddings, *config.compression, config.threads));
  }
  const Metric metric = resolve_metric(config.metric, vectors->dtype());

  const Index index = config.ivf
                          ? Index(build_ivf(vectors, pair.database_rows, metric, *config.ivf, config.threads))
                          : Index(build_flat(vectors, pair.database_rows, metric));
  const detail::RelevantCounter counter(manifest, pair.database_rows);

  EvalReport report;
  report.config = config;
  report.resolved_metric = metric;
  report.vector_dtype = vectors->dtype();
  report.vector_dim = vectors->dim();
  report.database_size = pair.database_rows.size();
  report.per_query.resize(pair.query_rows.size());

  parallel_for(pair.query_rows.size(), config.threads, [&](std::size_t qi) {
    const RowId qrow = pair.query_rows[qi];
    const Record& qrec = *manifest.find_row(qrow);
    QueryResult& out = report.per_query[qi];
    out.query_id = qrec.id;
    out.row = qrow;
    out.relevant_in_db = counter.count(qrec.labels);
    if (out.relevant_in_db == 0) {
      out.skipped = true;
      return;
    }
    const RetrievalResult result = search(index, vectors->row(qrow), config.k);
    std::vector<std::uint8_t> flags(result.size());
    for (std::size_t i = 0; i < result.size(); ++i) {
      flags[i] = static_cast<std::uint8_t>(relevance(qrec.labels, manifest.find_row(result.entries[i].row)->labels));
      out.relevant_retrieved += flags[i];
    }
    out.ap = ap_at_k(flags, config.k);
  });

  // Fixed summation order (ascending query row) keeps the mean reproducible.
  double sum = 0.0;
  for (const auto& q : report.per_query) {
    if (q.skipped) {
      ++report.skipped_queries;
    } else {
      ++report.evaluated_queries;
      sum += q.ap;
    }
  }
  if (report.evaluated_queries == 0) {
    throw EvaluationError("no query has a relevant item in the '" + std::string(to_string(config.db_split)) +
                          "' split; mAP is undefined");
  }
  report.map_at_k = sum / static_cast<double>(report.evaluated_queries);
  return report;
}

inline EvalReport evaluate(const EmbeddingMatrix& embeddings, const DatasetManifest& manifest,
                           const EvalConfig& config, const WarningSink& warn = {}) {
  return evaluate(std::make_shared<const EmbeddingMatrix>(embeddings), manifest, config, warn);
}

inline void write_per_query_csv(const EvalReport& report, std::ostream& out) {
  out << "query_id,row,ap,relevant_retrieved,relevant_in_db,skipped\n";
  for (const auto& q : report.per_query) {
    out << q.query_id << ',' << q.row << ',' << format_double(q.ap) << ',' << q.relevant_retrieved << ','
        << q.relevant_in_db << ',' << (q.skipped ? 1 : 0) << '\n';
  }
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
  const EvalConfig& c = report.config;
  nlohmann::ordered_json j;
  j["method"] = method_label(c);
  j["k"] = c.k;
  j["map_at_k"] = report.map_at_k;
  j["evaluated_queries"] = report.evaluated_queries;
  j["skipped_queries"] = report.skipped_queries;
  j["database_size"] = report.database_size;
  nlohmann::ordered_json cfg;
  cfg["metric"] = std::string(to_string(c.metric));
  cfg["resolved_metric"] = std::string(to_string(report.resolved_metric));
  cfg["query_split"] = std::string(to_string(c.query_split));
  cfg["db_split"] = std::string(to_string(c.db_split));
  if (c.compression) {
    cfg["compression"] = {{"method", std::string(to_string(c.compression->method))},
                          {"bits", report.vector_dim},
                          {"seed", c.compression->seed}};
  } else {
    cfg["compression"] = nullptr;
  }
  cfg["vector_dtype"] = std::string(to_string(report.vector_dtype));
  cfg["vector_dim"] = report.vector_dim;
  if (c.ivf) {
    cfg["index"] = {{"type", "ivf"},
                    {"nlist", c.ivf->nlist},
                    {"nprobe", c.ivf->nprobe},
                    {"max_iterations", c.ivf->max_iterations},
                    {"max_points_per_centroid", c.ivf->max_points_per_centroid},
                    {"seed", c.ivf->seed}};
  } else {
    cfg["index"] = {{"type", "flat"}};
  }
  j["config"] = std::move(cfg);
  return j;
}

/// Side-by-side mAP of several configurations over one dataset.
struct MethodComparison {
  std::vector<EvalReport> reports;

  /// One column per configuration; rows are mAP@k and query counts.
  std::vector<std::vector<std::string>> cells(bool human) const {
    const std::size_t k = reports.empty() ? 0 : reports.front().config.k;
    std::vector<std::vector<std::string>> rows(4);
    rows[0].push_back(human ? "" : "metric");
    rows[1].push_back("mAP@" + std::to_string(k));
    rows[2].push_back("evaluated_queries");
    rows[3].push_back("skipped_queries");
    for (const auto& r : reports) {
      rows[0].push_back(method_label(r.config));
      rows[1].push_back(human ? format_fixed(100.0 * r.map_at_k, 2) : format_double(r.map_at_k));
      rows[2].push_back(std::to_string(r.evaluated_queries));
      rows[3].push_back(std::to_string(r.skipped_queries));
    }
    return rows;
  }

  std::string to_csv() const {
    std::string out;
    for (const auto& row : cells(false)) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
      out += '\n';
    }
    return out;
  }

  /// mAP shown in percent with two decimals.
  std::string to_text() const { return align_table(cells(true)); }
};

inline MethodComparison compare_methods(std::shared_ptr<const EmbeddingMatrix> embeddings,
                                        const DatasetManifest& manifest, std::span<const EvalConfig> configs,
                                        const WarningSink& warn = {}) {
  if (configs.empty()) throw ConfigError("compare_methods needs at least one configuration");
  for (const auto& c : configs) {
    if (c.k != configs[0].k || c.query_split != configs[0].query_split || c.db_split != configs[0].db_split) {
      throw ConfigError("compared configurations must share k and the query/database splits");
    }
  }
  MethodComparison table;
  for (const auto& c : configs) table.reports.push_back(evaluate(embeddings, manifest, c, warn));
  return table;
}

}  // namespace georet
