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

#include <fstream>

#include "georet/benchkit.hpp"
#include "georet/bundle.hpp"
#include "georet/io.hpp"

using namespace georet;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("georet-bundle-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void flip_byte(const fs::path& p, std::size_t at) {
  std::string s = slurp(p);
  s[at] = static_cast<char>(s[at] ^ 0x01);
  std::ofstream(p, std::ios::binary | std::ios::trunc) << s;
}

}  // namespace

TEST_CASE("sha256 of known content", "[bundle]") {
  TempDir t;
  std::ofstream(t.path / "abc", std::ios::binary) << "abc";
  CHECK(sha256_hex(t.path / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::ofstream(t.path / "empty", std::ios::binary);
  CHECK(sha256_hex(t.path / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("bundle round trip", "[bundle]") {
  TempDir t;
  const auto syn = generate_synthetic(120, 12, 6, 0.4, 2);
  const fs::path dir = t.path / "data";
  write_bundle(dir, syn.embeddings, syn.manifest);
  for (const char* f : {kBundleEmbeddings, kBundleManifest, kBundleVocab, kBundleChecksums}) CHECK(fs::exists(dir / f));

  const Bundle b = load_bundle(dir);
  CHECK(*b.embeddings == syn.embeddings);
  CHECK(b.manifest.records().size() == 120);
  CHECK(b.manifest.vocabulary() == syn.manifest.vocabulary());

  // Writing again is byte-identical and replaces the old bundle.
  const std::string first = slurp(dir / kBundleChecksums);
  write_bundle(dir, *b.embeddings, b.manifest);
  CHECK(slurp(dir / kBundleChecksums) == first);
  std::size_t entries = 0;
  for (auto& e : fs::directory_iterator(t.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);  // no temporaries left behind
}

TEST_CASE("bundle corruption is detected", "[bundle]") {
  TempDir t;
  const auto syn = generate_synthetic(50, 8, 5, 0.4, 3);
  const fs::path dir = t.path / "b";
  write_bundle(dir, syn.embeddings, syn.manifest);

  SECTION("payload bit flip") {
    flip_byte(dir / kBundleEmbeddings, 40);
    CHECK_THROWS_AS(load_bundle(dir), CorruptionError);
    CHECK_NOTHROW(load_bundle(dir, false));
  }
  SECTION("manifest edit") {
    flip_byte(dir / kBundleManifest, 3);
    CHECK_THROWS_AS(load_bundle(dir), CorruptionError);
  }
  SECTION("missing checksum entry") {
    std::ofstream(dir / kBundleChecksums, std::ios::trunc) << "";
    CHECK_THROWS_AS(load_bundle(dir), CorruptionError);
  }
  SECTION("missing file") {
    fs::remove(dir / kBundleVocab);
    CHECK_THROWS_AS(load_bundle(dir), IoError);
  }
  SECTION("not a directory") {
    CHECK_THROWS_AS(load_bundle(t.path / "nope"), IoError);
  }
}

TEST_CASE("bundle writes never clobber foreign data", "[bundle]") {
  TempDir t;
  const auto syn = generate_synthetic(20, 4, 2, 0.4, 3);
  std::ofstream(t.path / "keep.txt") << "precious";
  CHECK_THROWS_AS(write_bundle(t.path, syn.embeddings, syn.manifest), IoError);
  CHECK(slurp(t.path / "keep.txt") == "precious");
  std::ofstream(t.path / "file") << "x";
  CHECK_THROWS_AS(write_bundle(t.path / "file", syn.embeddings, syn.manifest), IoError);
}

TEST_CASE("manifest rows must fit the matrix", "[bundle]") {
  TempDir t;
  const auto syn = generate_synthetic(20, 4, 2, 0.4, 3);
  const auto fewer = syn.embeddings.select_rows(std::vector<RowId>{0, 1, 2});
  CHECK_THROWS_AS(write_bundle(t.path / "x", fewer, syn.manifest), ValidationError);
  CHECK_FALSE(fs::exists(t.path / "x"));
}

TEST_CASE("atomic file helpers", "[io]") {
  TempDir t;
  const auto m = generate_synthetic(10, 4, 2, 0.4, 3).embeddings;
  const fs::path p = t.path / "m.gemb";
  save_embeddings_file(m, p);
  CHECK(load_embeddings_file(p) == m);

  // A failing writer leaves the previous file intact.
  CHECK_THROWS(atomic_write_file(p, [](std::ostream& out) {
    out << "partial";
    throw IoError("boom");
  }));
  CHECK(load_embeddings_file(p) == m);
  std::size_t entries = 0;
  for (auto& e : fs::directory_iterator(t.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);

  std::ofstream(p, std::ios::binary | std::ios::app) << "z";
  CHECK_THROWS_AS(load_embeddings_file(p), CorruptionError);
  CHECK_THROWS_AS(load_embeddings_file(t.path / "missing.gemb"), IoError);
}
