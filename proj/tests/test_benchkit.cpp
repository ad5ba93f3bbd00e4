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

#include <sstream>

#include "georet/benchkit.hpp"
#include "georet/evalkit.hpp"

using namespace georet;

namespace {

BenchConfig small_config() {
  BenchConfig c;
  c.db_sizes = {1000};
  c.variants = {{Dtype::kPackedBits, 64}};
  c.queries_per_size = 20;
  c.repeats = 1;
  c.warmup = 5;
  c.index.nlist = 16;
  c.index.nprobe = 4;
  c.source_dim = 128;
  c.num_classes = 10;
  return c;
}

}  // namespace

TEST_CASE("synthetic data layout", "[benchkit][synthetic]") {
  const auto s = generate_synthetic(103, 16, 5, 0.3, 9);
  CHECK(s.embeddings.count() == 103);
  CHECK(s.embeddings.dim() == 16);
  const auto& recs = s.manifest.records();
  REQUIRE(recs.size() == 103);
  CHECK(recs[0].id == "syn-0000000");
  CHECK(s.manifest.vocabulary()[4] == "class_004");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].row == i);
    CHECK(recs[i].labels == LabelSet{static_cast<std::uint32_t>(i % 5)});
  }
  // 100 full cycles of the split pattern give exactly 60/20/20.
  const auto even = generate_synthetic(1000, 4, 10, 0.3, 9);
  CHECK(even.manifest.split_count(Split::kTrain) == 600);
  CHECK(even.manifest.split_count(Split::kVal) == 200);
  CHECK(even.manifest.split_count(Split::kTest) == 200);
}

TEST_CASE("synthetic data is deterministic", "[benchkit][synthetic]") {
  const auto a = generate_synthetic(500, 32, 7, 0.5, 123);
  const auto b = generate_synthetic(500, 32, 7, 0.5, 123);
  const auto c = generate_synthetic(500, 32, 7, 0.5, 124);
  CHECK(a.embeddings == b.embeddings);
  CHECK_FALSE(a.embeddings == c.embeddings);
  std::ostringstream ma, mb, va, vb;
  write_manifest(a.manifest, ma, va);
  write_manifest(b.manifest, mb, vb);
  CHECK(ma.str() == mb.str());
  CHECK(va.str() == vb.str());
}

TEST_CASE("zero spread collapses records onto centers", "[benchkit][synthetic]") {
  const auto s = generate_synthetic(400, 24, 8, 0.0, 5);
  for (std::size_t i = 8; i < 400; ++i) {
    CHECK(std::ranges::equal(s.embeddings.float_row(i), s.embeddings.float_row(i % 8)));
  }
  double norm = 0;
  for (float x : s.embeddings.float_row(0)) norm += static_cast<double>(x) * x;
  CHECK(norm == Catch::Approx(1.0).epsilon(1e-6));
  // Each class has 10 database items, so k up to 9 still sees only exact matches.
  EvalConfig cfg;
  cfg.k = 9;
  CHECK(evaluate(s.embeddings, s.manifest, cfg).map_at_k == 1.0);
}

TEST_CASE("noise scale matches the spread", "[benchkit][synthetic]") {
  const auto flat = generate_synthetic(2000, 256, 1, 0.0, 3);
  const auto noisy = generate_synthetic(2000, 256, 1, 0.8, 3);
  double total = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    double n2 = 0;
    const auto a = noisy.embeddings.float_row(i), c = flat.embeddings.float_row(0);
    for (std::uint32_t j = 0; j < 256; ++j) n2 += (static_cast<double>(a[j]) - c[j]) * (a[j] - c[j]);
    total += std::sqrt(n2);
  }
  CHECK(total / 2000 == Catch::Approx(0.8).epsilon(0.02));
}

TEST_CASE("synthetic argument errors", "[benchkit][synthetic]") {
  CHECK_THROWS_AS(generate_synthetic(5, 4, 6, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(5, 4, 0, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(5, 0, 2, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(5, 4, 2, -1.0, 0), ConfigError);
}

TEST_CASE("variant parsing", "[benchkit]") {
  CHECK(parse_bench_variant("binary:64") == BenchVariant{Dtype::kPackedBits, 64});
  CHECK(parse_bench_variant("float:768") == BenchVariant{Dtype::kFloat32, 768});
  CHECK_THROWS_AS(parse_bench_variant("int:8"), ConfigError);
  CHECK_THROWS_AS(parse_bench_variant("binary"), ConfigError);
  CHECK_THROWS_AS(parse_bench_variant("binary:0"), ConfigError);
  CHECK_THROWS_AS(parse_bench_variant("binary:6x"), ConfigError);
}

TEST_CASE("minimal bench run", "[benchkit][bench]") {
  const auto report = run_bench(small_config());
  REQUIRE(report.rows.size() == 1);
  const auto& r = report.rows[0];
  CHECK(r.db_size == 1000);
  CHECK(r.length == 64);
  CHECK(r.samples == 20);
  CHECK(r.median_ms >= 0);
  CHECK(r.p95_ms >= r.median_ms);
  CHECK(r.mean_ms >= 0);
  CHECK(report.throughput.empty());
}

TEST_CASE("bench phases keep timing apart from setup", "[benchkit][bench]") {
  auto c = small_config();
  c.db_sizes = {500, 800};
  c.variants = {{Dtype::kPackedBits, 64}, {Dtype::kFloat32, 32}};
  c.clients = 2;
  std::vector<std::pair<BenchPhase, bool>> events;
  const auto report = run_bench(c, [&](BenchPhase p, bool begin) { events.emplace_back(p, begin); });
  CHECK(report.rows.size() == 4);
  CHECK(report.throughput.size() == 4);
  for (const auto& t : report.throughput) CHECK(t.queries == 2 * 20);

  const std::vector<BenchPhase> order = {BenchPhase::kGenerate, BenchPhase::kBuild, BenchPhase::kWarmup,
                                         BenchPhase::kMeasure, BenchPhase::kThroughput};
  REQUIRE(events.size() == 4 * order.size() * 2);
  for (std::size_t run = 0; run < 4; ++run) {
    for (std::size_t p = 0; p < order.size(); ++p) {
      const std::size_t at = run * order.size() * 2 + p * 2;
      CHECK(events[at] == std::pair{order[p], true});
      CHECK(events[at + 1] == std::pair{order[p], false});
    }
  }
}

TEST_CASE("report structure is reproducible", "[benchkit][bench]") {
  auto c = small_config();
  c.db_sizes = {300, 600};
  c.variants = {{Dtype::kPackedBits, 64}, {Dtype::kPackedBits, 128}, {Dtype::kFloat32, 128}};
  const auto a = run_bench(c), b = run_bench(c);
  REQUIRE(a.rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.rows[i].dtype == b.rows[i].dtype);
    CHECK(a.rows[i].length == b.rows[i].length);
    CHECK(a.rows[i].db_size == b.rows[i].db_size);
    CHECK(a.rows[i].samples == b.rows[i].samples);
  }
}

TEST_CASE("median latency grows with nprobe", "[benchkit][bench]") {
  auto c = small_config();
  c.db_sizes = {20000};
  c.variants = {{Dtype::kFloat32, 64}};
  c.source_dim = 64;
  c.index.nlist = 64;
  c.queries_per_size = 100;
  c.repeats = 3;
  c.warmup = 20;
  std::vector<double> medians;
  for (std::uint32_t p : {1u, 8u, 64u}) {
    c.index.nprobe = p;
    medians.push_back(run_bench(c).rows[0].median_ms);
  }
  CHECK(medians[0] <= medians[1]);
  CHECK(medians[1] <= medians[2]);
}

TEST_CASE("bench config validation", "[benchkit][bench]") {
  auto c = small_config();
  c.db_sizes = {1000, 500};
  CHECK_THROWS_AS(run_bench(c), ConfigError);
  c = small_config();
  c.repeats = 0;
  CHECK_THROWS_AS(run_bench(c), ConfigError);
  c = small_config();
  c.db_sizes = {10};
  CHECK_THROWS_AS(run_bench(c), ConfigError);
  c = small_config();
  c.variants = {{Dtype::kPackedBits, 48}};  // 128 / 48 leaves a remainder
  CHECK_THROWS_AS(run_bench(c), ConfigError);
  c = small_config();
  c.db_sizes = {std::size_t{1} << 40};
  CHECK_THROWS_AS(run_bench(c), ResourceError);
}

TEST_CASE("report emission", "[benchkit][report]") {
  BenchReport empty;
  CHECK(emit_report(empty, ReportFormat::kCsv) == std::string(kBenchCsvHeader) + "\n");

  BenchReport r;
  const BenchVariant vs[] = {{Dtype::kPackedBits, 64}, {Dtype::kPackedBits, 768}, {Dtype::kFloat32, 768}};
  double t = 0.125;
  for (const auto& v : vs) {
    for (std::size_t n : {10000u, 50000u, 100000u}) {
      r.rows.push_back({v.dtype, v.length, n, t, t * 3, t * 1.5 + 1e-9, 600});
      t *= 1.37;
    }
  }
  const auto csv = emit_report(r, ReportFormat::kCsv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  std::istringstream in(csv);
  CHECK(parse_bench_csv(in) == r.rows);

  const auto text = emit_report(r, ReportFormat::kText);
  CHECK(text.find("10K") != std::string::npos);
  CHECK(text.find("100K") != std::string::npos);
  CHECK(text.find("Float") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') >= 4);

  std::istringstream bad("dtype,length\n");
  CHECK_THROWS_AS(parse_bench_csv(bad), FormatError);
}
