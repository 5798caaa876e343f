// Copyright 2026 The Curette Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "curette/dataset.hpp"
#include "curette/orchestrator.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct CorpusShape {
  std::size_t images = 10;
  std::size_t min_captions = 1;
  std::size_t max_captions = 5;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 8;
  std::size_t vocabulary = 12;
};

/// Random corpus; image ids "img000..", caption ids "img000_c0..", sample
/// ids = caption ids.
curette::Dataset random_corpus(std::mt19937_64& rng, const CorpusShape& shape);

/// images x captions corpus with ids "s%0Nd" assigned in order (N = digits),
/// one caption per sample, caption text "w<k> ..." of fixed length.
curette::Dataset grid_corpus(std::size_t images, std::size_t captions_per_image, std::size_t digits = 4,
                             std::size_t tokens = 6);

/// Random caption text from a small vocabulary.
std::string random_text(std::mt19937_64& rng, std::size_t min_tokens, std::size_t max_tokens, std::size_t vocabulary);

/// Builtin-backend run over grid_corpus(200, 5): 1,000 samples s0000..s0999
/// scored by the synthetic loss oracle.
struct SyntheticHarness {
  curette::Dataset dataset;
  curette::RunConfig config;
};

SyntheticHarness synthetic_harness(const std::filesystem::path& snapshot_dir, int epochs,
                                   curette::PolicyConfig policy, std::uint64_t seed = 42);

/// Fresh builtin backends for `config` over `dataset`.
curette::Backends builtin_backends(const curette::RunConfig& config, const curette::Dataset& dataset);

/// Relative path -> bytes of every regular file under `dir`.
std::map<std::string, std::string> read_tree(const std::filesystem::path& dir);

}  // namespace fixtures
