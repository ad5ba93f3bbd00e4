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

// Dataset bundle: a directory holding one validated dataset.
//
//   embeddings.gemb   GEMB matrix
//   manifest.jsonl    one record per line
//   vocab.json        label names
//   SHA256SUMS        "<hex>  <file>" lines, `sha256sum -c` compatible
//
// Requires OpenSSL (libcrypto) for the checksums.

#pragma once

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "georet/error.hpp"
#include "georet/io.hpp"
#include "georet/vecstore.hpp"

namespace georet {

inline constexpr const char* kBundleEmbeddings = "embeddings.gemb";
inline constexpr const char* kBundleManifest = "manifest.jsonl";
inline constexpr const char* kBundleVocab = "vocab.json";
inline constexpr const char* kBundleChecksums = "SHA256SUMS";

inline std::string sha256_hex(const fs::path& path) {
  auto in = open_input(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 15];
  }
  return hex;
}

struct Bundle {
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  DatasetManifest manifest;
};

/// Writes the bundle into a temporary sibling directory and swaps it into
/// place, replacing any previous bundle at `dir`. Anything else already at
/// `dir` (a file, or a non-empty directory without SHA256SUMS) is left alone.
inline void write_bundle(const fs::path& dir, const EmbeddingMatrix& embeddings, const DatasetManifest& manifest) {
  manifest.check_rows(embeddings.count());
  fs::path target = fs::absolute(dir).lexically_normal();
  if (!target.has_filename()) target = target.parent_path();
  if (fs::exists(target)) {
    if (!fs::is_directory(target)) throw IoError("'" + target.string() + "' exists and is not a directory");
    if (!fs::is_empty(target) && !fs::exists(target / kBundleChecksums)) {
      throw IoError("refusing to replace '" + target.string() + "': it is not a bundle");
    }
  }
  const fs::path tmp = temp_sibling(target);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    {
      std::ofstream out(tmp / kBundleEmbeddings, std::ios::binary);
      write_embeddings(embeddings, out);
      std::ofstream lines(tmp / kBundleManifest, std::ios::binary);
      std::ofstream vocab(tmp / kBundleVocab, std::ios::binary);
      write_manifest(manifest, lines, vocab);
      if (!out || !lines || !vocab) throw IoError("failed writing bundle files");
    }
    {
      std::ofstream sums(tmp / kBundleChecksums, std::ios::binary);
      for (const char* name : {kBundleEmbeddings, kBundleManifest, kBundleVocab}) {
        sums << sha256_hex(tmp / name) << "  " << name << '\n';
      }
      if (!sums) throw IoError("failed writing checksums");
    }
    fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

/// Loads and fully validates a bundle; checksum mismatches are corruption.
inline Bundle load_bundle(const fs::path& dir, bool verify_checksums = true) {
  if (!fs::is_directory(dir)) throw IoError("bundle '" + dir.string() + "' is not a directory");
  if (verify_checksums) {
    auto sums = open_input(dir / kBundleChecksums);
    std::set<std::string> checked;
    std::string line;
    while (std::getline(sums, line)) {
      if (line.empty()) continue;
      const auto sep = line.find("  ");
      if (sep == std::string::npos) throw CorruptionError("malformed SHA256SUMS line: " + line);
      const std::string expected = line.substr(0, sep);
      const std::string name = line.substr(sep + 2);
      if (name != kBundleEmbeddings && name != kBundleManifest && name != kBundleVocab) {
        throw CorruptionError("SHA256SUMS lists unexpected file '" + name + "'");
      }
      if (sha256_hex(dir / name) != expected) {
        throw CorruptionError("checksum mismatch for " + (dir / name).string());
      }
      checked.insert(name);
    }
    if (checked.size() != 3) throw CorruptionError("SHA256SUMS does not cover every bundle file");
  }
  Bundle b;
  b.embeddings = std::make_shared<const EmbeddingMatrix>(load_embeddings_file(dir / kBundleEmbeddings));
  auto lines = open_input(dir / kBundleManifest);
  auto vocab = open_input(dir / kBundleVocab);
  b.manifest = load_manifest(lines, vocab);
  b.manifest.check_rows(b.embeddings->count());
  return b;
}

}  // namespace georet
