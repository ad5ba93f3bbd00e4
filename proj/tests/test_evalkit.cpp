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

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "georet/benchkit.hpp"
#include "georet/evalkit.hpp"
#include "oracles.hpp"

using namespace georet;
using Catch::Approx;

namespace {

double ap(std::vector<std::uint8_t> flags, std::size_t k = 20) { return ap_at_k(flags, k); }

struct MultiLabel {
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  DatasetManifest manifest;
  std::vector<std::set<unsigned>> labels;
  std::vector<std::size_t> queries, database;
};

// Random multi-label data: labels drawn from `vocab`, 1..max_labels each.
MultiLabel multi_label(std::size_t nq, std::size_t ndb, std::uint32_t dim, unsigned vocab, unsigned max_labels,
                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> nd;
  MultiLabel d;
  const std::size_t n = nq + ndb;
  std::vector<float> v(n * dim);
  for (auto& x : v) x = nd(gen);
  d.embeddings = std::make_shared<const EmbeddingMatrix>(EmbeddingMatrix::from_floats(n, dim, std::move(v)));
  std::vector<Record> recs;
  std::vector<std::string> names;
  for (unsigned i = 0; i < vocab; ++i) names.push_back("l" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) {
    std::set<unsigned> ls;
    const unsigned count = 1 + static_cast<unsigned>(gen() % max_labels);
    while (ls.size() < count) ls.insert(static_cast<unsigned>(gen() % vocab));
    d.labels.push_back(ls);
    const bool is_query = i < nq;
    (is_query ? d.queries : d.database).push_back(i);
    recs.push_back({"r" + std::to_string(i), i, is_query ? Split::kVal : Split::kTest, LabelSet(ls.begin(), ls.end())});
  }
  d.manifest = DatasetManifest(std::move(recs), std::move(names));
  return d;
}

}  // namespace

TEST_CASE("relevance is label overlap", "[evalkit]") {
  const LabelSet a = {1, 5}, b = {5, 9}, c = {2, 9}, s = {3};
  CHECK(relevance(a, b) == 1);
  CHECK(relevance(a, c) == 0);
  CHECK(relevance(s, s) == 1);
  CHECK(relevance(b, a) == relevance(a, b));
  CHECK_THROWS_AS(relevance(LabelSet{}, a), ValidationError);
}

TEST_CASE("ap_at_k examples", "[evalkit]") {
  CHECK(ap(std::vector<std::uint8_t>(20, 1)) == 1.0);
  CHECK(ap(std::vector<std::uint8_t>(20, 0)) == 0.0);
  CHECK(ap({1, 0, 1}) == Approx(5.0 / 6.0));
  CHECK(ap({}) == 0.0);
  CHECK_THROWS_AS(ap(std::vector<std::uint8_t>(21, 1)), ValidationError);
}

TEST_CASE("ap_at_k properties", "[evalkit][property]") {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t len = gen() % 20;
    std::vector<std::uint8_t> f(len);
    for (auto& x : f) x = gen() % 3 == 0;
    const double base = ap(f, 21);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    std::vector<int> as_int(f.begin(), f.end());
    CHECK(base == Approx(oracle::average_precision(as_int)).margin(1e-15));

    auto with_hit = f;
    with_hit.insert(with_hit.begin(), 1);
    CHECK(ap(with_hit, 21) >= base);
    auto with_miss = f;
    with_miss.insert(with_miss.begin(), 0);
    CHECK(ap(with_miss, 21) <= base);

    // Shuffle the tail after the last hit.
    const auto last = std::find(f.rbegin(), f.rend(), 1);
    if (last != f.rend()) {
      auto tail_start = last.base();
      std::shuffle(tail_start, f.end(), gen);
      CHECK(ap(f, 21) == base);
    }
  }
}

TEST_CASE("all-relevant database scores one", "[evalkit]") {
  std::vector<Record> recs;
  std::vector<float> v;
  for (std::size_t i = 0; i < 60; ++i) {
    recs.push_back({"x" + std::to_string(i), i, i < 20 ? Split::kVal : Split::kTest, LabelSet{0, static_cast<std::uint32_t>(1 + i % 3)}});
    v.push_back(static_cast<float>(i % 7));
    v.push_back(static_cast<float>(i % 5));
  }
  const DatasetManifest m(std::move(recs), {"a", "b", "c", "d"});
  const auto e = EmbeddingMatrix::from_floats(60, 2, std::move(v));
  const auto report = evaluate(e, m, EvalConfig{});
  CHECK(report.map_at_k == 1.0);
  CHECK(report.evaluated_queries == 20);
  CHECK(report.database_size == 40);
}

TEST_CASE("evaluate matches the brute-force oracle", "[evalkit][oracle]") {
  const auto d = multi_label(200, 2000, 32, 12, 5, 7);
  EvalConfig cfg;
  cfg.metric = Metric::kL1;
  const auto report = evaluate(d.embeddings, d.manifest, cfg);
  const double expect = oracle::brute_force_map(d.queries, d.database, d.labels, 20, [&](std::size_t a, std::size_t b) {
    const auto x = d.embeddings->float_row(a), y = d.embeddings->float_row(b);
    return oracle::l1(std::vector<float>(x.begin(), x.end()), std::vector<float>(y.begin(), y.end()));
  });
  CHECK(std::abs(report.map_at_k - expect) <= 1e-9);

  SECTION("binary codes under Hamming") {
    EvalConfig bin = cfg;
    bin.compression = CompressionSpec::binarize();
    const auto codes = binarize(*d.embeddings);
    const auto r = evaluate(d.embeddings, d.manifest, bin);
    CHECK(r.resolved_metric == Metric::kHamming);
    const double want = oracle::brute_force_map(d.queries, d.database, d.labels, 20, [&](std::size_t a, std::size_t b) {
      const auto x = codes.code_row(a), y = codes.code_row(b);
      return static_cast<long double>(oracle::hamming(oracle::bits_of({x.begin(), x.end()}, 32),
                                                      oracle::bits_of({y.begin(), y.end()}, 32)));
    });
    CHECK(std::abs(r.map_at_k - want) <= 1e-9);
  }
}

TEST_CASE("report bookkeeping", "[evalkit]") {
  const auto d = multi_label(50, 300, 8, 200, 1, 3);
  const auto r = evaluate(d.embeddings, d.manifest, EvalConfig{});
  CHECK(r.per_query.size() == 50);
  CHECK(r.evaluated_queries + r.skipped_queries == 50);
  CHECK(r.skipped_queries > 0);  // 200 single labels over 300 items leaves some unmatched
  double sum = 0;
  for (const auto& q : r.per_query) {
    CHECK(q.ap >= 0.0);
    CHECK(q.ap <= 1.0);
    CHECK(q.relevant_retrieved <= std::min<std::size_t>(20, q.relevant_in_db));
    if (q.skipped) CHECK(q.relevant_in_db == 0);
    else sum += q.ap;
  }
  CHECK(r.map_at_k == Approx(sum / static_cast<double>(r.evaluated_queries)));

  std::ostringstream csv;
  write_per_query_csv(r, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "query_id,row,ap,relevant_retrieved,relevant_in_db,skipped");
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 50);

  const auto j = report_to_json(r);
  CHECK(j["map_at_k"].get<double>() == r.map_at_k);
  CHECK(j["config"]["metric"] == "l1");
  CHECK(j["config"]["index"]["type"] == "flat");
}

TEST_CASE("evaluation invariants", "[evalkit][property]") {
  const auto d = multi_label(80, 600, 16, 10, 3, 11);
  EvalConfig base;

  SECTION("IVF with full probe equals flat") {
    for (Metric m : {Metric::kL1, Metric::kL2, Metric::kCosine}) {
      EvalConfig flat = base, ivf = base;
      flat.metric = ivf.metric = m;
      ivf.ivf = IvfParams{16, 16, 25, 5, 256};
      CHECK(evaluate(d.embeddings, d.manifest, flat).map_at_k == evaluate(d.embeddings, d.manifest, ivf).map_at_k);
    }
    EvalConfig bflat = base, bivf = base;
    bflat.compression = bivf.compression = CompressionSpec::trivial_hash(8);
    bivf.ivf = IvfParams{8, 8, 25, 5, 256};
    CHECK(evaluate(d.embeddings, d.manifest, bflat).map_at_k == evaluate(d.embeddings, d.manifest, bivf).map_at_k);
  }
  SECTION("positive scaling leaves mAP unchanged") {
    std::vector<float> scaled(d.embeddings->float_data().begin(), d.embeddings->float_data().end());
    for (auto& x : scaled) x *= 4.0f;  // power of two keeps float sums exact
    const auto s = EmbeddingMatrix::from_floats(d.embeddings->count(), 16, std::move(scaled));
    for (Metric m : {Metric::kL1, Metric::kL2, Metric::kCosine}) {
      EvalConfig c = base;
      c.metric = m;
      CHECK(evaluate(s, d.manifest, c).map_at_k == evaluate(d.embeddings, d.manifest, c).map_at_k);
    }
  }
  SECTION("relabeling rows leaves mAP unchanged") {
    // Reverse the row order of the matrix and remap the manifest.
    const std::size_t n = d.embeddings->count();
    std::vector<RowId> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = n - 1 - i;
    const auto permuted = d.embeddings->select_rows(perm);
    std::vector<Record> recs;
    for (const auto& r : d.manifest.records()) recs.push_back({r.id, n - 1 - r.row, r.split, r.labels});
    const DatasetManifest m2(std::move(recs), d.manifest.vocabulary());
    // Ties are broken by row id, so compare a metric without ties in practice.
    CHECK(evaluate(permuted, m2, base).map_at_k == Approx(evaluate(d.embeddings, d.manifest, base).map_at_k).epsilon(1e-12));
  }
  SECTION("threads do not change results") {
    EvalConfig a = base, b = base;
    b.threads = 4;
    const auto ra = evaluate(d.embeddings, d.manifest, a), rb = evaluate(d.embeddings, d.manifest, b);
    CHECK(ra.map_at_k == rb.map_at_k);
  }
  SECTION("database smaller than k") {
    const auto small = multi_label(5, 8, 4, 2, 1, 2);
    const auto r = evaluate(small.embeddings, small.manifest, EvalConfig{});
    for (const auto& q : r.per_query) CHECK(q.ap <= 1.0);
  }
}

TEST_CASE("evaluation errors", "[evalkit]") {
  const auto d = multi_label(10, 30, 4, 3, 1, 5);
  EvalConfig same;
  same.db_split = Split::kVal;
  CHECK_THROWS_AS(evaluate(d.embeddings, d.manifest, same), ConfigError);
  EvalConfig zero;
  zero.k = 0;
  CHECK_THROWS_AS(evaluate(d.embeddings, d.manifest, zero), ConfigError);
  EvalConfig bad_metric;
  bad_metric.metric = Metric::kHamming;
  CHECK_THROWS_AS(evaluate(d.embeddings, d.manifest, bad_metric), ValidationError);

  // Disjoint label vocabularies between splits: nothing is evaluable.
  std::vector<Record> recs;
  for (std::size_t i = 0; i < 10; ++i) recs.push_back({"z" + std::to_string(i), i, i < 5 ? Split::kVal : Split::kTest, LabelSet{i < 5 ? 0u : 1u}});
  const DatasetManifest disjoint(std::move(recs), {"a", "b"});
  const auto e = EmbeddingMatrix::from_floats(10, 1, std::vector<float>(10, 1.0f));
  CHECK_THROWS_AS(evaluate(e, disjoint, EvalConfig{}), EvaluationError);

  std::vector<std::string> warnings;
  EvalConfig from_train;
  from_train.query_split = Split::kTrain;
  try {
    evaluate(d.embeddings, d.manifest, from_train, [&](std::string_view w) { warnings.emplace_back(w); });
  } catch (const Error&) {
  }
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("method comparison tables", "[evalkit]") {
  const auto syn = generate_synthetic(600, 64, 10, 0.8, 3);
  auto emb = std::make_shared<const EmbeddingMatrix>(syn.embeddings);
  EvalConfig f, b, h;
  b.compression = CompressionSpec::binarize();
  h.compression = CompressionSpec::trivial_hash(16);
  const std::vector<EvalConfig> one = {f};
  const auto single = compare_methods(emb, syn.manifest, one);
  CHECK(single.reports.size() == 1);
  CHECK(single.reports[0].map_at_k == evaluate(emb, syn.manifest, f).map_at_k);

  const std::vector<EvalConfig> three = {f, b, h};
  const auto table = compare_methods(emb, syn.manifest, three);
  const auto csv = table.to_csv();
  CHECK(csv.rfind("metric,Embedding,Binary emb.,16-bit hash\n", 0) == 0);
  CHECK(csv.find("mAP@20,") != std::string::npos);
  CHECK(table.to_text().find("16-bit hash") != std::string::npos);

  const std::vector<EvalConfig> twice = {f, f};
  const auto dup = compare_methods(emb, syn.manifest, twice);
  CHECK(dup.reports[0].map_at_k == dup.reports[1].map_at_k);

  EvalConfig other_k = f;
  other_k.k = 10;
  const std::vector<EvalConfig> mixed = {f, other_k};
  CHECK_THROWS_AS(compare_methods(emb, syn.manifest, mixed), ConfigError);
}
