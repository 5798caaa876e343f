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

#include <cstdio>
#include <random>
#include <string>

#include "curette/dataset.hpp"

namespace bench {

inline std::string random_caption(std::mt19937_64& rng, int tokens) {
  static const char* kWords[] = {"a",     "dog",   "runs",  "on",    "the",   "grass", "man",   "rides",
                                 "red",   "bike",  "two",   "cats",  "sleep", "near",  "window", "child",
                                 "plays", "with",  "ball",  "in",    "park",  "woman", "holds", "umbrella"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  std::string out;
  for (int t = 0; t < tokens; ++t) out += (t ? " " : "") + std::string(kWords[pick(rng)]);
  return out;
}

/// images x 5 captions of ~11 tokens, Flickr-shaped.
inline curette::Dataset flickr_like(std::size_t images, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(6, 16);
  curette::Dataset::Parts parts;
  parts.derive_samples = true;
  for (std::size_t i = 0; i < images; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "f%06zu", i);
    parts.images.emplace(id, curette::ImageAsset{id, std::string("/flickr/") + id + ".jpg", {}});
    auto& caps = parts.captions_by_image[id];
    for (int j = 0; j < 5; ++j) caps.push_back(curette::Caption::make(id + std::string("_") + std::to_string(j), random_caption(rng, len(rng))));
  }
  return curette::Dataset::from_parts(std::move(parts));
}

}  // namespace bench
