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

// Embedding matrices, dataset manifests and their on-disk formats.
//
// GEMB layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "GEMB"
//   4       2     version (1)
//   6       1     dtype (0 = Float32, 1 = PackedBits)
//   7       1     reserved (0)
//   8       8     count (rows)
//   16      4     dim (float components, or bits per code)
//   20      ...   payload, row-major
//
// Float32 rows are dim IEEE-754 binary32 values. PackedBits rows occupy
// ceil(dim / 8) bytes; bit j of a row lives in byte j / 8 under mask
// 0x80 >> (j % 8), and the unused low bits of the last byte are zero.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "georet/error.hpp"

namespace georet {

using RowId = std::uint64_t;

enum class Dtype : std::uint8_t { kFloat32 = 0, kPackedBits = 1 };

constexpr std::string_view to_string(Dtype dtype) {
  return dtype == Dtype::kFloat32 ? "float32" : "packed_bits";
}

// ---------------------------------------------------------------------------
// Bit packing

constexpr std::size_t packed_row_bytes(std::uint32_t bits) {
  return (static_cast<std::size_t>(bits) + 7) / 8;
}

constexpr bool get_bit(std::span<const std::uint8_t> row, std::size_t j) {
  return (row[j / 8] >> (7 - j % 8)) & 1u;
}

constexpr void set_bit(std::span<std::uint8_t> row, std::size_t j) {
  row[j / 8] |= static_cast<std::uint8_t>(0x80u >> (j % 8));
}

/// Packs one flag per bit (nonzero = 1) into MSB-first bytes.
inline std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> flags) {
  std::vector<std::uint8_t> out(packed_row_bytes(static_cast<std::uint32_t>(flags.size())), 0);
  for (std::size_t j = 0; j < flags.size(); ++j) {
    if (flags[j]) set_bit(out, j);
  }
  return out;
}

inline std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> row,
                                             std::uint32_t bits) {
  std::vector<std::uint8_t> flags(bits);
  for (std::size_t j = 0; j < bits; ++j) flags[j] = get_bit(row, j) ? 1 : 0;
  return flags;
}

/// Mask of the bits of the final byte that carry data (the rest must be 0).
constexpr std::uint8_t last_byte_mask(std::uint32_t bits) {
  const unsigned used = bits % 8;
  return used == 0 ? std::uint8_t{0xFF}
                   : static_cast<std::uint8_t>(0xFFu << (8 - used));
}

// ---------------------------------------------------------------------------
// Vector views

/// Non-owning view of one vector: either dim floats or a packed code of dim
/// bits. Exactly one of `floats` / `bytes` is populated.
struct VectorView {
  Dtype dtype = Dtype::kFloat32;
  std::uint32_t dim = 0;
  std::span<const float> floats;
  std::span<const std::uint8_t> bytes;

  static VectorView of_floats(std::span<const float> values) {
    return {Dtype::kFloat32, static_cast<std::uint32_t>(values.size()), values, {}};
  }
  static VectorView of_bits(std::span<const std::uint8_t> code, std::uint32_t bits) {
    return {Dtype::kPackedBits, bits, {}, code};
  }
};

// ---------------------------------------------------------------------------
// EmbeddingMatrix

/// Row-major dense float vectors or packed binary codes. Immutable once
/// built; the factories enforce the payload invariants (finite floats, zero
/// pad bits, payload size matching count and dim).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  static EmbeddingMatrix from_floats(std::size_t count, std::uint32_t dim,
                                     std::vector<float> values) {
    check_dim(dim);
    if (values.size() != count * static_cast<std::size_t>(dim)) {
      throw ValidationError("float payload holds " + std::to_string(values.size()) +
                            " values, expected " + std::to_string(count) + " x " +
                            std::to_string(dim));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw ValidationError("non-finite value at row " + std::to_string(i / dim) +
                              ", component " + std::to_string(i % dim));
      }
    }
    EmbeddingMatrix m;
    m.dtype_ = Dtype::kFloat32;
    m.count_ = count;
    m.dim_ = dim;
    m.floats_ = std::move(values);
    return m;
  }

  static EmbeddingMatrix from_bits(std::size_t count, std::uint32_t bits,
                                   std::vector<std::uint8_t> bytes) {
    check_dim(bits);
    const std::size_t row_bytes = packed_row_bytes(bits);
    if (bytes.size() != count * row_bytes) {
      throw ValidationError("packed payload holds " + std::to_string(bytes.size()) +
                            " bytes, expected " + std::to_string(count) + " x " +
                            std::to_string(row_bytes));
    }
    const std::uint8_t mask = last_byte_mask(bits);
    for (std::size_t r = 0; r < count; ++r) {
      if (bytes[(r + 1) * row_bytes - 1] & ~mask) {
        throw ValidationError("nonzero pad bits in packed row " + std::to_string(r));
      }
    }
    EmbeddingMatrix m;
    m.dtype_ = Dtype::kPackedBits;
    m.count_ = count;
    m.dim_ = bits;
    m.bytes_ = std::move(bytes);
    return m;
  }

  Dtype dtype() const { return dtype_; }
  std::size_t count() const { return count_; }
  std::uint32_t dim() const { return dim_; }
  bool is_float() const { return dtype_ == Dtype::kFloat32; }

  std::size_t row_bytes() const {
    return is_float() ? static_cast<std::size_t>(dim_) * sizeof(float)
                      : packed_row_bytes(dim_);
  }
  std::uint64_t payload_bytes() const { return count_ * row_bytes(); }

  std::span<const float> float_data() const { return floats_; }
  std::span<const std::uint8_t> code_data() const { return bytes_; }

  std::span<const float> float_row(std::size_t r) const {
    return std::span<const float>(floats_).subspan(r * dim_, dim_);
  }
  std::span<const std::uint8_t> code_row(std::size_t r) const {
    const std::size_t rb = packed_row_bytes(dim_);
    return std::span<const std::uint8_t>(bytes_).subspan(r * rb, rb);
  }

  VectorView row(std::size_t r) const {
    return is_float() ? VectorView::of_floats(float_row(r))
                      : VectorView::of_bits(code_row(r), dim_);
  }

  /// Copies the given rows, in order, into a new matrix.
  EmbeddingMatrix select_rows(std::span<const RowId> rows) const {
    EmbeddingMatrix m;
    m.dtype_ = dtype_;
    m.dim_ = dim_;
    m.count_ = rows.size();
    if (is_float()) {
      m.floats_.reserve(rows.size() * dim_);
      for (RowId r : rows) {
        auto src = float_row(r);
        m.floats_.insert(m.floats_.end(), src.begin(), src.end());
      }
    } else {
      m.bytes_.reserve(rows.size() * row_bytes());
      for (RowId r : rows) {
        auto src = code_row(r);
        m.bytes_.insert(m.bytes_.end(), src.begin(), src.end());
      }
    }
    return m;
  }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    if (a.dtype_ != b.dtype_ || a.count_ != b.count_ || a.dim_ != b.dim_) return false;
    // Bitwise comparison: -0.0 and 0.0 are different payloads.
    if (a.is_float()) {
      return a.floats_.size() == b.floats_.size() &&
             std::memcmp(a.floats_.data(), b.floats_.data(),
                         a.floats_.size() * sizeof(float)) == 0;
    }
    return a.bytes_ == b.bytes_;
  }

 private:
  static void check_dim(std::uint32_t dim) {
    if (dim == 0) throw ValidationError("embedding dim must be positive");
  }

  Dtype dtype_ = Dtype::kFloat32;
  std::size_t count_ = 0;
  std::uint32_t dim_ = 1;
  std::vector<float> floats_;
  std::vector<std::uint8_t> bytes_;
};

// ---------------------------------------------------------------------------
// GEMB serialization

inline constexpr std::array<char, 4> kGembMagic = {'G', 'E', 'M', 'B'};
inline constexpr std::uint16_t kGembVersion = 1;
inline constexpr std::size_t kGembHeaderBytes = 20;

namespace detail {

template <typename T>
void put_le(std::uint8_t* out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(u & 0xFF);
    if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const std::uint8_t* in) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) u = static_cast<U>(u << 8);
    u = static_cast<U>(u | in[i]);
  }
  return static_cast<T>(u);
}

/// Tracks bytes written so a failing sink can be reported precisely.
class CountingWriter {
 public:
  explicit CountingWriter(std::ostream& out) : out_(out) {}

  void write(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed after " + std::to_string(written_) + " bytes", written_);
    written_ += n;
  }

  std::uint64_t written() const { return written_; }

 private:
  std::ostream& out_;
  std::uint64_t written_ = 0;
};

/// Reads exactly n bytes or reports how many were available.
inline std::size_t read_some(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

inline void write_float_payload(CountingWriter& w, std::span<const float> values) {
  constexpr std::size_t kChunk = 16384;
  std::vector<std::uint8_t> buf;
  for (std::size_t off = 0; off < values.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, values.size() - off);
    if constexpr (std::endian::native == std::endian::little) {
      w.write(values.data() + off, n * sizeof(float));
    } else {
      buf.resize(n * 4);
      for (std::size_t i = 0; i < n; ++i) {
        put_le(buf.data() + 4 * i, std::bit_cast<std::uint32_t>(values[off + i]));
      }
      w.write(buf.data(), buf.size());
    }
  }
}

}  // namespace detail

/// Serializes `matrix` as GEMB and returns the number of bytes written.
inline std::uint64_t write_embeddings(const EmbeddingMatrix& matrix, std::ostream& out) {
  detail::CountingWriter w(out);
  std::array<std::uint8_t, kGembHeaderBytes> header{};
  std::memcpy(header.data(), kGembMagic.data(), 4);
  detail::put_le<std::uint16_t>(header.data() + 4, kGembVersion);
  header[6] = static_cast<std::uint8_t>(matrix.dtype());
  header[7] = 0;
  detail::put_le<std::uint64_t>(header.data() + 8, matrix.count());
  detail::put_le<std::uint32_t>(header.data() + 16, matrix.dim());
  w.write(header.data(), header.size());

  if (matrix.is_float()) {
    detail::write_float_payload(w, matrix.float_data());
  } else if (!matrix.code_data().empty()) {
    w.write(matrix.code_data().data(), matrix.code_data().size());
  }
  return w.written();
}

/// Parses one GEMB block from `in`, consuming exactly its bytes.
inline EmbeddingMatrix read_embeddings(std::istream& in) {
  std::array<std::uint8_t, kGembHeaderBytes> header{};
  const std::size_t got = detail::read_some(in, header.data(), header.size());
  if (got >= 4 && std::memcmp(header.data(), kGembMagic.data(), 4) != 0) {
    throw FormatError("bad magic: not a GEMB stream");
  }
  if (got < header.size()) {
    throw CorruptionError("truncated GEMB header: " + std::to_string(got) + " of " +
                          std::to_string(kGembHeaderBytes) + " bytes");
  }
  const auto version = detail::get_le<std::uint16_t>(header.data() + 4);
  if (version != kGembVersion) {
    throw FormatError("unsupported GEMB version " + std::to_string(version));
  }
  const std::uint8_t dtype_byte = header[6];
  if (dtype_byte > 1) {
    throw FormatError("unknown GEMB dtype " + std::to_string(dtype_byte));
  }
  if (header[7] != 0) throw FormatError("GEMB reserved byte is nonzero");
  const auto count = detail::get_le<std::uint64_t>(header.data() + 8);
  const auto dim = detail::get_le<std::uint32_t>(header.data() + 16);
  if (dim == 0) throw FormatError("GEMB dim is zero");

  const auto dtype = static_cast<Dtype>(dtype_byte);
  const std::uint64_t row_bytes =
      dtype == Dtype::kFloat32 ? std::uint64_t{dim} * 4 : packed_row_bytes(dim);
  if (count > (std::uint64_t{1} << 62) / row_bytes) {
    throw CorruptionError("GEMB header claims an impossible payload size");
  }
  const std::uint64_t payload = count * row_bytes;

  // Grow the buffer as data arrives so a lying header cannot force a huge
  // allocation up front.
  std::vector<std::uint8_t> raw;
  constexpr std::uint64_t kChunk = 1 << 20;
  while (raw.size() < payload) {
    const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, payload - raw.size()));
    const std::size_t old = raw.size();
    raw.resize(old + want);
    const std::size_t n = detail::read_some(in, raw.data() + old, want);
    if (n < want) {
      const std::uint64_t have = old + n;
      throw CorruptionError("truncated GEMB payload: header claims " + std::to_string(count) +
                            " rows (" + std::to_string(payload) + " bytes) but only " +
                            std::to_string(have) + " bytes (" +
                            std::to_string(have / row_bytes) + " full rows) are present");
    }
  }
  in.clear(in.rdstate() & ~std::ios::failbit);

  if (dtype == Dtype::kPackedBits) {
    return EmbeddingMatrix::from_bits(count, dim, std::move(raw));
  }
  std::vector<float> values(count * dim);
  if constexpr (std::endian::native == std::endian::little) {
    if (!values.empty()) std::memcpy(values.data(), raw.data(), raw.size());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(raw.data() + 4 * i));
    }
  }
  return EmbeddingMatrix::from_floats(count, dim, std::move(values));
}

// ---------------------------------------------------------------------------
// Dataset manifest

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

constexpr std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

using LabelSet = std::vector<std::uint32_t>;  // sorted, unique

struct Record {
  std::string id;
  RowId row = 0;
  Split split = Split::kTrain;
  LabelSet labels;
};

/// Records plus label vocabulary. Single-label datasets use singleton sets.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  /// Validates every invariant except row bounds (see check_rows).
  DatasetManifest(std::vector<Record> records, std::vector<std::string> vocabulary)
      : records_(std::move(records)), vocabulary_(std::move(vocabulary)) {
    std::set<std::string_view> names;
    for (const auto& name : vocabulary_) {
      if (!names.insert(name).second) throw ValidationError("duplicate vocabulary entry '" + name + "'");
    }
    std::unordered_map<std::string_view, std::size_t> ids;
    std::unordered_map<RowId, std::size_t> rows;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      auto& rec = records_[i];
      std::sort(rec.labels.begin(), rec.labels.end());
      rec.labels.erase(std::unique(rec.labels.begin(), rec.labels.end()), rec.labels.end());
      if (rec.labels.empty()) throw ValidationError("record '" + rec.id + "' has an empty label set");
      if (rec.labels.back() >= vocabulary_.size()) {
        throw ValidationError("record '" + rec.id + "': label index " +
                              std::to_string(rec.labels.back()) + " out of range for a " +
                              std::to_string(vocabulary_.size()) + "-name vocabulary");
      }
      if (!ids.emplace(rec.id, i).second) throw ValidationError("duplicate record id '" + rec.id + "'");
      if (!rows.emplace(rec.row, i).second) {
        throw ValidationError("duplicate row " + std::to_string(rec.row) + " (record '" + rec.id + "')");
      }
    }
    for (std::size_t i = 0; i < records_.size(); ++i) by_row_.emplace(records_[i].row, i);
  }

  const std::vector<Record>& records() const { return records_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t size() const { return records_.size(); }

  const Record* find_row(RowId row) const {
    auto it = by_row_.find(row);
    return it == by_row_.end() ? nullptr : &records_[it->second];
  }

  /// Throws unless every row index addresses a matrix of `count` rows.
  void check_rows(std::size_t count) const {
    for (const auto& rec : records_) {
      if (rec.row >= count) {
        throw ValidationError("record '" + rec.id + "': row index out of range (" +
                              std::to_string(rec.row) + " >= " + std::to_string(count) + ")");
      }
    }
  }

  std::size_t split_count(Split split) const {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                  [&](const Record& r) { return r.split == split; }));
  }

 private:
  std::vector<Record> records_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<RowId, std::size_t> by_row_;
};

inline std::vector<std::string> load_vocabulary(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("vocabulary must be a JSON array of strings");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_string()) throw ValidationError("vocabulary entry " + std::to_string(i) + " is not a string");
    names.push_back(doc[i].get<std::string>());
  }
  return names;
}

/// Parses a line-delimited JSON manifest ({"id", "row", "split", "labels"}
/// per line) against a vocabulary document. Blank lines are ignored.
inline DatasetManifest load_manifest(std::istream& lines, std::istream& vocabulary) {
  auto vocab = load_vocabulary(vocabulary);
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError("manifest line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw fail("expected a JSON object");
    Record rec;
    if (!obj.contains("id") || !obj["id"].is_string()) throw fail("missing string field 'id'");
    rec.id = obj["id"].get<std::string>();
    if (!obj.contains("row") || !obj["row"].is_number_unsigned()) {
      throw fail("record '" + rec.id + "': 'row' must be a non-negative integer");
    }
    rec.row = obj["row"].get<RowId>();
    if (!obj.contains("split") || !obj["split"].is_string()) throw fail("record '" + rec.id + "': missing 'split'");
    const auto split_text = obj["split"].get<std::string>();
    const auto split = parse_split(split_text);
    if (!split) throw fail("record '" + rec.id + "': unknown split '" + split_text + "' (expected train, val or test)");
    rec.split = *split;
    if (!obj.contains("labels") || !obj["labels"].is_array()) throw fail("record '" + rec.id + "': 'labels' must be an array");
    for (const auto& l : obj["labels"]) {
      if (!l.is_number_unsigned() || l.get<std::uint64_t>() > UINT32_MAX) {
        throw fail("record '" + rec.id + "': label indices must be non-negative integers");
      }
      rec.labels.push_back(l.get<std::uint32_t>());
    }
    records.push_back(std::move(rec));
  }
  try {
    return DatasetManifest(std::move(records), std::move(vocab));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
}

inline void write_manifest(const DatasetManifest& manifest, std::ostream& lines,
                           std::ostream& vocabulary) {
  for (const auto& rec : manifest.records()) {
    nlohmann::ordered_json obj;
    obj["id"] = rec.id;
    obj["row"] = rec.row;
    obj["split"] = std::string(to_string(rec.split));
    obj["labels"] = rec.labels;
    lines << obj.dump() << '\n';
  }
  vocabulary << nlohmann::json(manifest.vocabulary()).dump() << '\n';
  if (!lines || !vocabulary) throw IoError("failed writing manifest");
}

// ---------------------------------------------------------------------------
// Query / database split selection

struct QueryDatabasePair {
  std::vector<RowId> query_rows;
  std::vector<RowId> database_rows;
};

using WarningSink = std::function<void(std::string_view)>;

/// Rows of `query_split` and `db_split`, each ascending. The splits must
/// differ so that queries never share a region with the database.
/// Using the train split on either side is allowed but reported through
/// `warn`: train images are reserved for models that are fit later.
inline QueryDatabasePair select_pair(const DatasetManifest& manifest, Split query_split,
                                     Split db_split, const WarningSink& warn = {}) {
  if (query_split == db_split) {
    throw ConfigError("query split and database split are both '" +
                      std::string(to_string(query_split)) +
                      "'; they must differ to avoid geographic overlap");
  }
  if ((query_split == Split::kTrain || db_split == Split::kTrain) && warn) {
    warn("using the train split for retrieval; keep train images for fitting models "
         "(split train further for validation) and compare on val/test");
  }
  QueryDatabasePair pair;
  for (const auto& rec : manifest.records()) {
    if (rec.split == query_split) pair.query_rows.push_back(rec.row);
    if (rec.split == db_split) pair.database_rows.push_back(rec.row);
  }
  if (pair.query_rows.empty()) {
    throw ValidationError("split '" + std::string(to_string(query_split)) + "' has no records");
  }
  if (pair.database_rows.empty()) {
    throw ValidationError("split '" + std::string(to_string(db_split)) + "' has no records");
  }
  std::sort(pair.query_rows.begin(), pair.query_rows.end());
  std::sort(pair.database_rows.begin(), pair.database_rows.end());
  return pair;
}

}  // namespace georet
