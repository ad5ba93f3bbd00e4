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

// georet command-line tool: synth, ingest, compress, build-index, query,
// eval and bench over dataset bundles and GEMB/GIVF files.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "georet/benchkit.hpp"
#include "georet/bundle.hpp"
#include "georet/compress.hpp"
#include "georet/evalkit.hpp"
#include "georet/format.hpp"
#include "georet/index.hpp"
#include "georet/io.hpp"
#include "georet/vecstore.hpp"

namespace {

using namespace georet;

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool quiet = false;
  std::string output;
};

Globals g;

void note(const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

void warn(std::string_view msg) { std::cerr << "warning: " << msg << '\n'; }

Metric metric_arg(const std::string& text) {
  auto m = parse_metric(text);
  if (!m) throw ConfigError("unknown metric '" + text + "' (l1, l2, l2sq, cosine, hamming, jaccard)");
  return *m;
}

Split split_arg(const std::string& text) {
  auto s = parse_split(text);
  if (!s) throw ConfigError("unknown split '" + text + "' (train, val, test)");
  return *s;
}

std::string summarize(const DatasetManifest& m, const EmbeddingMatrix& e) {
  std::ostringstream out;
  out << m.records().size() << " records (" << m.split_count(Split::kTrain) << " train / "
      << m.split_count(Split::kVal) << " val / " << m.split_count(Split::kTest) << " test)\n";
  std::vector<std::size_t> per_label(m.vocabulary().size(), 0);
  std::size_t assignments = 0;
  for (const auto& r : m.records()) {
    for (auto l : r.labels) ++per_label[l];
    assignments += r.labels.size();
  }
  const auto used = std::count_if(per_label.begin(), per_label.end(), [](std::size_t n) { return n > 0; });
  out << m.vocabulary().size() << " labels (" << used << " used, "
      << format_fixed(m.records().empty() ? 0.0 : static_cast<double>(assignments) / m.records().size(), 2)
      << " per record)\n";
  out << e.count() << " x " << e.dim() << ' ' << to_string(e.dtype()) << " embeddings\n";
  return out.str();
}

// ---------------------------------------------------------------------------

struct SynthOpts {
  std::size_t count = 1000;
  std::uint32_t dim = 768;
  std::uint32_t classes = 20;
  double spread = 1.0;
  std::string out;
};

void run_synth(const SynthOpts& o, std::ostream& data) {
  const SyntheticData s = generate_synthetic(o.count, o.dim, o.classes, o.spread, g.seed);
  write_bundle(o.out, s.embeddings, s.manifest);
  data << summarize(s.manifest, s.embeddings);
  note("wrote bundle " + o.out);
}

struct IngestOpts {
  std::string embeddings, manifest, vocab, out;
};

void run_ingest(const IngestOpts& o, std::ostream& data) {
  const EmbeddingMatrix m = load_embeddings_file(o.embeddings);
  auto lines = open_input(o.manifest);
  auto vocab = open_input(o.vocab);
  DatasetManifest manifest;
  try {
    manifest = load_manifest(lines, vocab);
    manifest.check_rows(m.count());
  } catch (const ValidationError& e) {
    throw ValidationError(o.manifest + ": " + e.what());
  }
  write_bundle(o.out, m, manifest);
  data << summarize(manifest, m);
  note("wrote bundle " + o.out);
}

struct CompressOpts {
  std::string bundle;
  std::string method = "trivial-hash";
  std::optional<std::uint32_t> bits;
  std::string out;
};

CompressionSpec compression_spec(const std::string& method, std::optional<std::uint32_t> bits, std::uint32_t dim) {
  const auto m = parse_compression_method(method);
  if (!m) throw ConfigError("unknown compression method '" + method + "' (binarize, trivial-hash, lsh)");
  switch (*m) {
    case CompressionMethod::kBinarize:
      if (bits && *bits != dim) {
        throw ConfigError("binarize keeps one bit per component: --bits must be " + std::to_string(dim) +
                          " or omitted");
      }
      return CompressionSpec::binarize();
    case CompressionMethod::kTrivialHash: return CompressionSpec::trivial_hash(bits.value_or(64));
    case CompressionMethod::kLsh: return CompressionSpec::lsh(bits.value_or(64), g.seed);
  }
  throw ConfigError("unknown compression method");
}

void run_compress(const CompressOpts& o, std::ostream& data) {
  const Bundle b = load_bundle(o.bundle);
  const EmbeddingMatrix& in = *b.embeddings;
  if (!in.is_float()) throw ValidationError("bundle embeddings are already binary codes");
  const CompressionSpec spec = compression_spec(o.method, o.bits, in.dim());
  const std::uint32_t bits = spec.bits_for(in.dim());
  if (spec.method == CompressionMethod::kTrivialHash) {
    check_trivial_hash_bits(in.dim(), bits);
    note("trivial hash: " + std::to_string(in.dim()) + " components in groups of " +
         std::to_string(in.dim() / bits) + " -> " + std::to_string(bits) + " bits");
  }
  const EmbeddingMatrix codes = compress(in, spec, g.threads);
  const CompressionRatio ratio = compression_ratio(in, codes);

  nlohmann::ordered_json meta;
  meta["method"] = std::string(to_string(spec.method));
  meta["bits"] = bits;
  if (spec.method == CompressionMethod::kLsh) meta["seed"] = spec.seed;
  else meta["seed"] = nullptr;
  if (spec.method == CompressionMethod::kTrivialHash) meta["group_size"] = in.dim() / bits;
  meta["input_dim"] = in.dim();
  meta["count"] = in.count();
  meta["input_row_bytes"] = in.row_bytes();
  meta["output_row_bytes"] = codes.row_bytes();
  meta["ratio"] = std::to_string(ratio.numerator) + ":" + std::to_string(ratio.denominator);

  save_embeddings_file(codes, o.out);
  atomic_write_file(o.out + ".meta.json", [&](std::ostream& out) { out << meta.dump(2) << '\n'; });
  data << codes.count() << " rows -> " << bits << "-bit codes (" << in.row_bytes() << " -> " << codes.row_bytes()
       << " bytes/row, " << ratio.numerator << ":" << ratio.denominator << ")\n";
}

struct IndexOpts {
  std::string embeddings;
  std::string bundle;
  std::string split = "test";
  std::string type = "ivf";
  std::string metric = "l1";
  IvfParams ivf;
  std::string out;
};

void run_build_index(const IndexOpts& o, std::ostream& data) {
  auto db = std::make_shared<const EmbeddingMatrix>(load_embeddings_file(o.embeddings));
  std::vector<RowId> rows;
  if (!o.bundle.empty()) {
    const Bundle b = load_bundle(o.bundle);
    b.manifest.check_rows(db->count());
    const Split split = split_arg(o.split);
    for (const auto& r : b.manifest.records()) {
      if (r.split == split) rows.push_back(r.row);
    }
    if (rows.empty()) throw ValidationError("split '" + o.split + "' has no records");
  } else {
    rows.resize(db->count());
    std::iota(rows.begin(), rows.end(), RowId{0});
  }
  const Metric requested = metric_arg(o.metric);
  const Metric metric = resolve_metric(requested, db->dtype());
  if (metric != requested) note("metric " + std::string(to_string(requested)) + " on binary codes is " +
                                std::string(to_string(metric)));

  if (o.type == "flat") {
    const Index index = build_flat(db, std::move(rows), metric);
    save_index_file(index, o.out);
    data << "flat index over " << std::get<FlatIndex>(index).size() << " rows, metric " << to_string(metric) << '\n';
    return;
  }
  if (o.type != "ivf") throw ConfigError("--type must be flat or ivf, got '" + o.type + "'");
  IvfParams p = o.ivf;
  p.seed = g.seed;
  const Index index = build_ivf(db, std::move(rows), metric, p, g.threads);
  save_index_file(index, o.out);

  const auto& ivf = std::get<IvfIndex>(index);
  std::vector<std::size_t> sizes;
  for (const auto& l : ivf.lists()) sizes.push_back(l.size());
  std::sort(sizes.begin(), sizes.end());
  const auto empty = std::count(sizes.begin(), sizes.end(), std::size_t{0});
  data << "ivf index: " << p.nlist << " lists over " << ivf.size() << " rows, metric " << to_string(metric)
       << ", nprobe " << p.nprobe << '\n';
  data << "list sizes: min " << sizes.front() << ", median " << sizes[sizes.size() / 2] << ", max " << sizes.back()
       << ", empty " << empty << '\n';
}

struct QueryOpts {
  std::string index;
  std::string embeddings;
  std::string bundle;
  std::string query_file;
  std::optional<RowId> query_row;
  std::string query_vector;
  std::size_t k = 20;
  std::optional<std::uint32_t> nprobe;
};

// Whitespace/comma separated numbers; 0/1 values for a binary index.
VectorView parse_raw_vector(const std::string& path, Dtype dtype, std::vector<float>& floats,
                            std::vector<std::uint8_t>& bytes) {
  auto in = open_input(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream tokens(text);
  std::string tok;
  std::vector<double> values;
  while (tokens >> tok) values.push_back(parse_double(tok));
  if (values.empty()) throw ValidationError(path + ": no values in query vector");
  if (dtype == Dtype::kFloat32) {
    floats.assign(values.begin(), values.end());
    for (std::size_t i = 0; i < floats.size(); ++i) {
      if (!std::isfinite(floats[i])) throw ValidationError(path + ": component " + std::to_string(i) + " is not finite");
    }
    return VectorView::of_floats(floats);
  }
  const auto dim = static_cast<std::uint32_t>(values.size());
  bytes.assign(packed_row_bytes(dim), 0);
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) {
      throw ValidationError(path + ": binary query component " + std::to_string(i) + " must be 0 or 1");
    }
    if (values[i] == 1.0) set_bit(bytes, i);
  }
  return VectorView::of_bits(bytes, dim);
}

void run_query(const QueryOpts& o, std::ostream& data) {
  auto db = std::make_shared<const EmbeddingMatrix>(load_embeddings_file(o.embeddings));
  const Index index = load_index_file(o.index, db);
  std::optional<DatasetManifest> manifest;
  if (!o.bundle.empty()) {
    manifest = load_bundle(o.bundle).manifest;
    manifest->check_rows(db->count());
  }

  std::vector<float> floats;
  std::vector<std::uint8_t> bytes;
  std::optional<EmbeddingMatrix> source;
  VectorView query;
  if (!o.query_vector.empty()) {
    if (o.query_row) throw ConfigError("--query-row and --query-vector are mutually exclusive");
    query = parse_raw_vector(o.query_vector, db->dtype(), floats, bytes);
  } else {
    if (!o.query_row) throw ConfigError("give --query-row (with optional --query-file) or --query-vector");
    const EmbeddingMatrix* from = db.get();
    if (!o.query_file.empty()) {
      source = load_embeddings_file(o.query_file);
      from = &*source;
    }
    if (*o.query_row >= from->count()) {
      throw ValidationError("query row " + std::to_string(*o.query_row) + " out of range for " +
                            std::to_string(from->count()) + " rows");
    }
    query = from->row(*o.query_row);
  }
  if (o.nprobe && std::holds_alternative<FlatIndex>(index)) note("--nprobe ignored for a flat index");
  const RetrievalResult result = search(index, query, o.k, o.nprobe);
  data << "rank,row_id,record_id,distance\n";
  for (std::size_t i = 0; i < result.size(); ++i) {
    const auto& e = result.entries[i];
    const Record* rec = manifest ? manifest->find_row(e.row) : nullptr;
    data << i + 1 << ',' << e.row << ',' << (rec ? rec->id : std::string()) << ',' << format_double(e.distance)
         << '\n';
  }
}

struct EvalOpts {
  std::string bundle;
  std::vector<std::string> methods = {"none"};
  std::optional<std::uint32_t> bits;
  std::string metric = "l1";
  std::size_t k = 20;
  std::string query_split = "val";
  std::string db_split = "test";
  std::string index = "flat";
  IvfParams ivf;
  std::string report_dir;
  std::string format = "text";
};

std::string slug(const std::string& label) {
  std::string s;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!s.empty() && s.back() != '-') s += '-';
  }
  while (!s.empty() && s.back() == '-') s.pop_back();
  return s.empty() ? "method" : s;
}

void run_eval(const EvalOpts& o, std::ostream& data) {
  const Bundle b = load_bundle(o.bundle);
  EvalConfig base;
  base.k = o.k;
  base.metric = metric_arg(o.metric);
  base.query_split = split_arg(o.query_split);
  base.db_split = split_arg(o.db_split);
  base.threads = g.threads;
  if (o.index == "ivf") {
    IvfParams p = o.ivf;
    p.seed = g.seed;
    base.ivf = p;
  } else if (o.index != "flat") {
    throw ConfigError("--index must be flat or ivf, got '" + o.index + "'");
  }
  std::vector<EvalConfig> configs;
  for (const auto& m : o.methods) {
    EvalConfig c = base;
    // "method" or "method:bits"; a bare binarize ignores --bits.
    const auto colon = m.find(':');
    const std::string name = m.substr(0, colon);
    std::optional<std::uint32_t> bits;
    if (name != "binarize") bits = o.bits;
    if (colon != std::string::npos) {
      const std::string digits = m.substr(colon + 1);
      std::uint32_t n = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
        throw ConfigError("bad bit count in method '" + m + "'");
      }
      bits = n;
    }
    if (name != "none") c.compression = compression_spec(name, bits, b.embeddings->dim());
    else if (colon != std::string::npos) throw ConfigError("method none takes no bit count");
    configs.push_back(c);
  }
  const MethodComparison table = compare_methods(b.embeddings, b.manifest, configs, warn);

  if (!o.report_dir.empty()) {
    fs::create_directories(o.report_dir);
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    std::map<std::string, int> used;
    for (const auto& r : table.reports) {
      std::string name = slug(method_label(r.config));
      if (used[name]++) name += "-" + std::to_string(used[name]);
      nlohmann::ordered_json j = report_to_json(r);
      j["per_query_csv"] = "per_query_" + name + ".csv";
      all.push_back(std::move(j));
      atomic_write_file(fs::path(o.report_dir) / ("per_query_" + name + ".csv"),
                        [&](std::ostream& out) { write_per_query_csv(r, out); });
    }
    atomic_write_file(fs::path(o.report_dir) / "summary.json", [&](std::ostream& out) { out << all.dump(2) << '\n'; });
    atomic_write_file(fs::path(o.report_dir) / "comparison.csv", [&](std::ostream& out) { out << table.to_csv(); });
    note("wrote reports to " + o.report_dir);
  }
  if (o.format == "csv") data << table.to_csv();
  else if (o.format == "text") data << table.to_text();
  else throw ConfigError("--format must be text or csv");
}

struct BenchOpts {
  std::string sizes = "10000,50000,100000";
  std::string variants = "binary:64,binary:768,float:768";
  BenchConfig config;
  std::string csv;
  std::string format = "text";
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

void run_bench_cmd(BenchOpts o, std::ostream& data) {
  BenchConfig& c = o.config;
  c.db_sizes.clear();
  for (const auto& s : split_list(o.sizes)) {
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError("bad database size '" + s + "'");
    c.db_sizes.push_back(n);
  }
  c.variants.clear();
  for (const auto& v : split_list(o.variants)) c.variants.push_back(parse_bench_variant(v));
  c.seed = g.seed;
  c.build_threads = g.threads;
  if (o.format != "text" && o.format != "csv") throw ConfigError("--format must be text or csv");

  std::size_t run = 0;
  const std::size_t per_variant = std::max<std::size_t>(c.db_sizes.size(), 1);
  auto observe = [&](BenchPhase phase, bool begin) {
    if (!begin || g.quiet) return;
    static constexpr const char* kNames[] = {"generate", "build", "warmup", "measure", "throughput"};
    if (phase == BenchPhase::kGenerate) ++run;
    const std::size_t i = run - 1;
    if (i / per_variant >= c.variants.size()) return;
    const auto& v = c.variants[i / per_variant];
    std::cerr << "[bench] " << variant_type_name(v.dtype) << '/' << v.length << " @ "
              << size_label(c.db_sizes[i % per_variant]) << ": " << kNames[static_cast<int>(phase)] << '\n';
  };
  const BenchReport report = run_bench(c, observe);
  if (!o.csv.empty()) {
    atomic_write_file(o.csv, [&](std::ostream& out) { out << emit_report(report, ReportFormat::kCsv); });
  }
  if (o.format == "csv") {
    data << emit_report(report, ReportFormat::kCsv);
  } else {
    data << emit_report(report, ReportFormat::kText);
    data << "\nmedian latency per query; " << report.cores << " cores, " << report.memory_note << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"georet: compressed embedding retrieval over satellite image datasets"};
  app.require_subcommand(1);
  app.fallthrough();
  g.threads = default_thread_count();
  app.add_option("--seed", g.seed, "Seed for every stochastic step (k-means, LSH, synthesis)");
  app.add_option("--threads", g.threads, "Worker threads (default: GEORET_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress messages on stderr");
  app.add_option("--output", g.output, "Write the primary output to this file instead of stdout");

  std::function<void(std::ostream&)> action;

  SynthOpts synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic labeled bundle");
  s->add_option("--count", synth.count, "Number of records")->capture_default_str();
  s->add_option("--dim", synth.dim, "Embedding dimension")->capture_default_str();
  s->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
  s->add_option("--spread", synth.spread, "Expected noise norm around each unit-norm class center")
      ->capture_default_str();
  s->add_option("--out", synth.out, "Bundle directory")->required();
  s->callback([&] { action = [&](std::ostream& d) { run_synth(synth, d); }; });

  IngestOpts ingest;
  auto* in = app.add_subcommand("ingest", "Validate embeddings + manifest + vocabulary into a bundle");
  in->add_option("--embeddings", ingest.embeddings, "GEMB file")->required();
  in->add_option("--manifest", ingest.manifest, "JSON-lines manifest")->required();
  in->add_option("--vocab", ingest.vocab, "JSON vocabulary")->required();
  in->add_option("--out", ingest.out, "Bundle directory")->required();
  in->callback([&] { action = [&](std::ostream& d) { run_ingest(ingest, d); }; });

  CompressOpts comp;
  auto* c = app.add_subcommand("compress", "Compress bundle embeddings into binary codes");
  c->add_option("--bundle", comp.bundle, "Bundle directory")->required();
  c->add_option("--method", comp.method, "binarize | trivial-hash | lsh")->capture_default_str();
  c->add_option("--bits", comp.bits, "Code length (default 64; binarize uses the input dim)");
  c->add_option("--out", comp.out, "Output GEMB file (metadata goes to <out>.meta.json)")->required();
  c->callback([&] { action = [&](std::ostream& d) { run_compress(comp, d); }; });

  IndexOpts idx;
  auto* bi = app.add_subcommand("build-index", "Build a flat or IVF index and save it as GIVF");
  bi->add_option("--embeddings", idx.embeddings, "GEMB file holding the database vectors")->required();
  bi->add_option("--bundle", idx.bundle, "Bundle whose manifest selects the rows to index");
  bi->add_option("--split,--rows", idx.split, "Split to index when --bundle is given")->capture_default_str();
  bi->add_option("--type", idx.type, "flat | ivf")->capture_default_str();
  bi->add_option("--metric", idx.metric, "l1 | l2 | l2sq | cosine | hamming | jaccard")->capture_default_str();
  bi->add_option("--nlist", idx.ivf.nlist, "IVF list count")->capture_default_str();
  bi->add_option("--nprobe", idx.ivf.nprobe, "Lists probed per query by default")->capture_default_str();
  bi->add_option("--max-iterations", idx.ivf.max_iterations, "Clustering iterations")->capture_default_str();
  bi->add_option("--max-points-per-centroid", idx.ivf.max_points_per_centroid,
                 "Training sample cap per list (0 = all rows)")
      ->capture_default_str();
  bi->add_option("--out", idx.out, "Output GIVF file")->required();
  bi->callback([&] { action = [&](std::ostream& d) { run_build_index(idx, d); }; });

  QueryOpts q;
  auto* qu = app.add_subcommand("query", "Search an index; prints rank,row_id,record_id,distance");
  qu->add_option("--index", q.index, "GIVF file")->required();
  qu->add_option("--embeddings", q.embeddings, "GEMB file the index was built over")->required();
  qu->add_option("--bundle", q.bundle, "Bundle for record ids");
  qu->add_option("--query-row", q.query_row, "Row of --query-file (default: --embeddings) to use as the query");
  qu->add_option("--query-file", q.query_file, "GEMB file holding the query row");
  qu->add_option("--query-vector", q.query_vector, "Text file with the raw query values");
  qu->add_option("--k", q.k, "Results to return")->capture_default_str();
  qu->add_option("--nprobe", q.nprobe, "Lists to probe (default: the index's nprobe)");
  qu->callback([&] { action = [&](std::ostream& d) { run_query(q, d); }; });

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Compute mAP@k for one or more compression methods");
  e->add_option("--bundle", ev.bundle, "Bundle directory")->required();
  e->add_option("--method", ev.methods, "none | binarize | trivial-hash[:bits] | lsh[:bits] (repeatable)")->capture_default_str();
  e->add_option("--bits", ev.bits, "Code length for trivial-hash/lsh (default 64)");
  e->add_option("--metric", ev.metric, "Distance; l1 on codes is hamming")->capture_default_str();
  e->add_option("--k", ev.k, "Ranking depth")->capture_default_str();
  e->add_option("--query-split", ev.query_split, "Queries")->capture_default_str();
  e->add_option("--db-split", ev.db_split, "Database")->capture_default_str();
  e->add_option("--index", ev.index, "flat | ivf")->capture_default_str();
  e->add_option("--nlist", ev.ivf.nlist, "IVF list count")->capture_default_str();
  e->add_option("--nprobe", ev.ivf.nprobe, "IVF lists probed")->capture_default_str();
  e->add_option("--max-iterations", ev.ivf.max_iterations, "Clustering iterations")->capture_default_str();
  e->add_option("--report-dir", ev.report_dir, "Write summary.json, comparison.csv and per-query CSVs here");
  e->add_option("--format", ev.format, "text | csv")->capture_default_str();
  e->callback([&] { action = [&](std::ostream& d) { run_eval(ev, d); }; });

  BenchOpts bench;
  auto* be = app.add_subcommand("bench", "Time IVF searches across database sizes and vector types");
  be->add_option("--sizes", bench.sizes, "Comma-separated ascending database sizes")->capture_default_str();
  be->add_option("--variants", bench.variants, "Comma-separated type:length list")->capture_default_str();
  be->add_option("--queries", bench.config.queries_per_size, "Distinct queries per size")->capture_default_str();
  be->add_option("--repeats", bench.config.repeats, "Passes over the queries")->capture_default_str();
  be->add_option("--warmup", bench.config.warmup, "Unmeasured queries first")->capture_default_str();
  be->add_option("--k", bench.config.k, "Results per query")->capture_default_str();
  be->add_option("--nlist", bench.config.index.nlist, "IVF list count")->capture_default_str();
  be->add_option("--nprobe", bench.config.index.nprobe, "IVF lists probed")->capture_default_str();
  be->add_option("--source-dim", bench.config.source_dim, "Float dim that binary variants are derived from")
      ->capture_default_str();
  be->add_option("--classes", bench.config.num_classes, "Synthetic classes")->capture_default_str();
  be->add_option("--spread", bench.config.cluster_spread, "Synthetic noise norm")->capture_default_str();
  be->add_option("--clients", bench.config.clients, "Concurrent clients for a throughput run (0 = off)")
      ->capture_default_str();
  be->add_option("--csv", bench.csv, "Also write the CSV report here");
  be->add_option("--format", bench.format, "text | csv")->capture_default_str();
  be->callback([&] { action = [&](std::ostream& d) { run_bench_cmd(bench, d); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    std::ostringstream data;
    action(data);
    if (g.output.empty()) {
      std::cout << data.str() << std::flush;
    } else {
      atomic_write_file(g.output, [&](std::ostream& out) { out << data.str(); });
    }
  } catch (const georet::Error& err) {
    std::cerr << "georet: " << to_string(err.kind()) << ": " << err.what() << '\n';
    return err.kind() == ErrorKind::kConfig ? 2 : 1;
  } catch (const std::exception& err) {
    std::cerr << "georet: error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
