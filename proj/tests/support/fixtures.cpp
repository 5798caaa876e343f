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

#include "fixtures.hpp"

#include <atomic>
#include <cstdio>
#include <unistd.h>

namespace fixtures {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("curette-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string random_text(std::mt19937_64& rng, std::size_t min_tokens, std::size_t max_tokens, std::size_t vocabulary) {
  std::uniform_int_distribution<std::size_t> len(min_tokens, max_tokens);
  std::uniform_int_distribution<std::size_t> word(0, vocabulary - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += "w" + std::to_string(word(rng));
  }
  return out;
}

curette::Dataset random_corpus(std::mt19937_64& rng, const CorpusShape& shape) {
  curette::Dataset::Parts parts;
  parts.derive_samples = true;
  std::uniform_int_distribution<std::size_t> ncap(shape.min_captions, shape.max_captions);
  for (std::size_t i = 0; i < shape.images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img%03zu", i);
    parts.images.emplace(id, curette::ImageAsset{id, std::string("/data/") + id + ".jpg", {}});
    auto& caps = parts.captions_by_image[id];
    const std::size_t k = ncap(rng);
    for (std::size_t j = 0; j < k; ++j) {
      caps.push_back(curette::Caption::make(std::string(id) + "_c" + std::to_string(j),
                                            random_text(rng, std::max<std::size_t>(1, shape.min_tokens),
                                                        shape.max_tokens, shape.vocabulary)));
    }
  }
  return curette::Dataset::from_parts(std::move(parts));
}

curette::Dataset grid_corpus(std::size_t images, std::size_t captions_per_image, std::size_t digits,
                             std::size_t tokens) {
  curette::Dataset::Parts parts;
  parts.derive_samples = true;
  std::size_t next = 0;
  for (std::size_t i = 0; i < images; ++i) {
    const std::string image_id = "img" + std::to_string(i);
    parts.images.emplace(image_id, curette::ImageAsset{image_id, "/data/" + image_id + ".jpg", {}});
    auto& caps = parts.captions_by_image[image_id];
    for (std::size_t j = 0; j < captions_per_image; ++j) {
      char id[32];
      std::snprintf(id, sizeof id, "s%0*zu", static_cast<int>(digits), next++);
      std::string text;
      for (std::size_t t = 0; t < tokens; ++t) text += (t ? " w" : "w") + std::to_string((i * 7 + j * 3 + t) % 23);
      caps.push_back(curette::Caption::make(id, text));
    }
  }
  return curette::Dataset::from_parts(std::move(parts));
}

SyntheticHarness synthetic_harness(const std::filesystem::path& snapshot_dir, int epochs,
                                   curette::PolicyConfig policy, std::uint64_t seed) {
  SyntheticHarness h;
  h.dataset = grid_corpus(200, 5, 4);
  h.config.epochs = epochs;
  h.config.policy = policy;
  h.config.snapshot_dir = snapshot_dir;
  h.config.rng_seed = seed;
  h.config.synthetic.rng_seed = seed;
  h.config.backends = {{"loss", "builtin:synthetic-loss"}, {"generator", "builtin:stub"}, {"embedder", "builtin:bow"}};
  return h;
}

curette::Backends builtin_backends(const curette::RunConfig& config, const curette::Dataset& dataset) {
  curette::BackendContext ctx;
  ctx.dataset = &dataset;
  ctx.rng_seed = config.rng_seed;
  ctx.synthetic = config.synthetic;
  ctx.prompt = config.prompt;
  ctx.client = config.client;
  return curette::make_backends(config.backends, ctx);
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    out[std::filesystem::relative(e.path(), dir).string()] = curette::read_file(e.path());
  }
  return out;
}

}  // namespace fixtures
