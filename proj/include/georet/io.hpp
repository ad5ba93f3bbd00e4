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

// File-level helpers: whole-file reads and atomic replacement writes.

#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>

#include "georet/error.hpp"
#include "georet/index.hpp"
#include "georet/vecstore.hpp"

namespace georet {

namespace fs = std::filesystem;

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

/// Sibling temporary path in the same directory, so rename() stays atomic.
inline fs::path temp_sibling(const fs::path& path) {
  return path.parent_path() / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
}

/// Writes through `fill` into a temporary sibling, then renames it over
/// `path`. On any failure the temporary is removed and `path` is untouched.
inline void atomic_write_file(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  const fs::path tmp = temp_sibling(path);
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
      fill(out);
      out.flush();
      if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

/// Reads a whole .gemb file; bytes after the payload are a corruption.
inline EmbeddingMatrix load_embeddings_file(const fs::path& path) {
  auto in = open_input(path);
  try {
    EmbeddingMatrix m = read_embeddings(in);
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptionError("trailing bytes after GEMB payload");
    return m;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    // Re-throw with the file name, keeping the error kind.
    const std::string msg = path.string() + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::kFormat: throw FormatError(msg);
      case ErrorKind::kCorruption: throw CorruptionError(msg);
      default: throw ValidationError(msg);
    }
  }
}

inline void save_embeddings_file(const EmbeddingMatrix& m, const fs::path& path) {
  atomic_write_file(path, [&](std::ostream& out) { write_embeddings(m, out); });
}

inline void save_index_file(const Index& index, const fs::path& path) {
  atomic_write_file(path, [&](std::ostream& out) { save_index(index, out); });
}

inline Index load_index_file(const fs::path& path, std::shared_ptr<const EmbeddingMatrix> database) {
  auto in = open_input(path);
  return load_index(in, std::move(database));
}

}  // namespace georet
