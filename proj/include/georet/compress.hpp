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

// Float embedding -> binary code transforms.
//
//   binarize      one bit per component: 1 iff value >= 0
//   trivial_hash  consecutive groups of dim / bits components; 1 iff the
//                 group mean >= 0
//   lsh_hash      random hyperplanes: 1 iff dot(normal_i, row) >= 0
//
// Zero maps to 1 everywhere (closed half-space).

#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "georet/error.hpp"
#include "georet/parallel.hpp"
#include "georet/rng.hpp"
#include "georet/vecstore.hpp"

namespace georet {

enum class CompressionMethod { kBinarize, kTrivialHash, kLsh };

constexpr std::string_view to_string(CompressionMethod method) {
  switch (method) {
    case CompressionMethod::kBinarize: return "binarize";
    case CompressionMethod::kTrivialHash: return "trivial-hash";
    case CompressionMethod::kLsh: return "lsh";
  }
  return "?";
}

inline std::optional<CompressionMethod> parse_compression_method(std::string_view text) {
  if (text == "binarize") return CompressionMethod::kBinarize;
  if (text == "trivial-hash") return CompressionMethod::kTrivialHash;
  if (text == "lsh") return CompressionMethod::kLsh;
  return std::nullopt;
}

struct CompressionSpec {
  CompressionMethod method = CompressionMethod::kBinarize;
  std::uint32_t output_bits = 64;  // ignored by binarize
  std::uint64_t seed = 0;          // lsh only

  static CompressionSpec binarize() { return {CompressionMethod::kBinarize, 0, 0}; }
  static CompressionSpec trivial_hash(std::uint32_t bits) {
    return {CompressionMethod::kTrivialHash, bits, 0};
  }
  static CompressionSpec lsh(std::uint32_t bits, std::uint64_t seed) {
    return {CompressionMethod::kLsh, bits, seed};
  }

  /// Bits per code produced from `input_dim`-dimensional floats.
  std::uint32_t bits_for(std::uint32_t input_dim) const {
    return method == CompressionMethod::kBinarize ? input_dim : output_bits;
  }
};

namespace detail {

inline void require_float(const EmbeddingMatrix& m, std::string_view op) {
  if (!m.is_float()) {
    throw ValidationError(std::string(op) + " expects a float32 matrix, got packed bits");
  }
}

/// Builds a packed matrix by letting `fill(row, out_code)` set bits row by row.
template <typename Fill>
EmbeddingMatrix pack_rows(std::size_t count, std::uint32_t bits, unsigned threads, Fill&& fill) {
  const std::size_t rb = packed_row_bytes(bits);
  std::vector<std::uint8_t> out(count * rb, 0);
  parallel_for(count, threads, [&](std::size_t r) {
    fill(r, std::span<std::uint8_t>(out).subspan(r * rb, rb));
  });
  return EmbeddingMatrix::from_bits(count, bits, std::move(out));
}

}  // namespace detail

inline EmbeddingMatrix binarize(const EmbeddingMatrix& matrix, unsigned threads = 1) {
  detail::require_float(matrix, "binarize");
  const std::uint32_t dim = matrix.dim();
  return detail::pack_rows(matrix.count(), dim, threads, [&](std::size_t r, std::span<std::uint8_t> code) {
    const auto row = matrix.float_row(r);
    for (std::uint32_t j = 0; j < dim; ++j) {
      if (row[j] >= 0.0f) set_bit(code, j);
    }
  });
}

inline void check_trivial_hash_bits(std::uint32_t dim, std::uint32_t bits) {
  if (bits == 0 || dim % bits != 0) {
    throw ConfigError("trivial hash needs the hash length to divide the embedding dim: dim " +
                      std::to_string(dim) + ", bits " + std::to_string(bits) + ", remainder " +
                      (bits == 0 ? std::string("undefined") : std::to_string(dim % bits)));
  }
}

/// Averages each run of dim / bits consecutive components and keeps the sign.
inline EmbeddingMatrix trivial_hash(const EmbeddingMatrix& matrix, const CompressionSpec& spec,
                                    unsigned threads = 1) {
  detail::require_float(matrix, "trivial_hash");
  const std::uint32_t dim = matrix.dim();
  const std::uint32_t bits = spec.output_bits;
  check_trivial_hash_bits(dim, bits);
  const std::uint32_t group = dim / bits;
  return detail::pack_rows(matrix.count(), bits, threads, [&](std::size_t r, std::span<std::uint8_t> code) {
    const auto row = matrix.float_row(r);
    for (std::uint32_t i = 0; i < bits; ++i) {
      double sum = 0.0;
      for (std::uint32_t j = 0; j < group; ++j) sum += row[i * group + j];
      if (sum / group >= 0.0) set_bit(code, i);
    }
  });
}

/// Hyperplane normals for lsh_hash: `bits` rows of `dim` standard normals
/// drawn in row-major order from Rng(seed).
inline std::vector<double> lsh_hyperplanes(std::uint32_t bits, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> normals(static_cast<std::size_t>(bits) * dim);
  for (auto& v : normals) v = rng.normal();
  return normals;
}

inline EmbeddingMatrix lsh_hash(const EmbeddingMatrix& matrix, const CompressionSpec& spec,
                                unsigned threads = 1) {
  detail::require_float(matrix, "lsh_hash");
  if (spec.output_bits == 0) throw ConfigError("lsh needs at least one output bit");
  const std::uint32_t dim = matrix.dim();
  const std::uint32_t bits = spec.output_bits;
  const auto normals = lsh_hyperplanes(bits, dim, spec.seed);
  return detail::pack_rows(matrix.count(), bits, threads, [&](std::size_t r, std::span<std::uint8_t> code) {
    const auto row = matrix.float_row(r);
    for (std::uint32_t i = 0; i < bits; ++i) {
      const double* normal = normals.data() + static_cast<std::size_t>(i) * dim;
      double dot = 0.0;
      for (std::uint32_t j = 0; j < dim; ++j) dot += normal[j] * row[j];
      if (dot >= 0.0) set_bit(code, i);
    }
  });
}

inline EmbeddingMatrix compress(const EmbeddingMatrix& matrix, const CompressionSpec& spec,
                                unsigned threads = 1) {
  switch (spec.method) {
    case CompressionMethod::kBinarize: return binarize(matrix, threads);
    case CompressionMethod::kTrivialHash: return trivial_hash(matrix, spec, threads);
    case CompressionMethod::kLsh: return lsh_hash(matrix, spec, threads);
  }
  throw ConfigError("unknown compression method");
}

/// Expands codes back to floats: bit 1 -> one_value, bit 0 -> zero_value.
inline EmbeddingMatrix unpack_to_float(const EmbeddingMatrix& codes, float zero_value = -1.0f,
                                       float one_value = 1.0f) {
  if (codes.is_float()) throw ValidationError("unpack_to_float expects packed bits");
  const std::uint32_t dim = codes.dim();
  std::vector<float> values(codes.count() * dim);
  for (std::size_t r = 0; r < codes.count(); ++r) {
    const auto code = codes.code_row(r);
    for (std::uint32_t j = 0; j < dim; ++j) {
      values[r * dim + j] = get_bit(code, j) ? one_value : zero_value;
    }
  }
  return EmbeddingMatrix::from_floats(codes.count(), dim, std::move(values));
}

/// Exact payload-size ratio, reduced.
struct CompressionRatio {
  std::uint64_t numerator = 1;
  std::uint64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
  friend bool operator==(const CompressionRatio&, const CompressionRatio&) = default;
};

/// input payload bytes / output payload bytes. Computed per row so that
/// empty matrices still have a defined ratio.
inline CompressionRatio compression_ratio(const EmbeddingMatrix& input, const EmbeddingMatrix& output) {
  if (input.count() != output.count()) {
    throw ValidationError("compression_ratio: row counts differ (" + std::to_string(input.count()) +
                          " vs " + std::to_string(output.count()) + ")");
  }
  const std::uint64_t in = input.row_bytes();
  const std::uint64_t out = output.row_bytes();
  const std::uint64_t g = std::gcd(in, out);
  return {in / g, out / g};
}

}  // namespace georet
