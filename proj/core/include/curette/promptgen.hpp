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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/backends.hpp"
#include "curette/dataset.hpp"

namespace curette {

inline constexpr const char* kDefaultStyler =
    "national geographic, high quality photography, Canon EOS R3, Flickr";

struct StylerConfig {
  std::string text = kDefaultStyler;
};

struct PromptStrategy {
  enum class Kind { kConcat, kRepresentativeSelection, kSingleCaption };

  Kind kind = Kind::kConcat;
  std::size_t index = 0;  // kSingleCaption only

  static PromptStrategy concat() { return {Kind::kConcat, 0}; }
  static PromptStrategy representative() { return {Kind::kRepresentativeSelection, 0}; }
  static PromptStrategy single(std::size_t index) { return {Kind::kSingleCaption, index}; }

  bool operator==(const PromptStrategy&) const = default;
};

struct Prompt {
  std::string prompt_id;  // sha256_hex(text), first 16 hex digits
  std::string text;
  PromptStrategy strategy;
  bool styler_applied = false;
  std::vector<std::string> source_caption_ids;

  bool operator==(const Prompt&) const = default;
};

/// Strategy plus optional styler, as configured for a run.
struct PromptSpec {
  PromptStrategy strategy = PromptStrategy::concat();
  std::optional<StylerConfig> styler = StylerConfig{};
};

std::string prompt_id_for(const std::string& text);

/// Builds a text-to-image prompt from an image's captions.
///
/// Concat joins the caption texts with single spaces. Representative
/// selection embeds every caption, averages the non-zero vectors and picks
/// the caption with the highest cosine to the mean (lowest index on ties;
/// shortest caption if every vector is zero). SingleCaption returns caption
/// `index` verbatim. A styler appends ", " + styler text.
///
/// Throws EmptyCaptionList, EmbedderUnavailable, IndexOutOfRange.
Prompt build_prompt(std::span<const Caption> captions, const PromptStrategy& strategy,
                    const std::optional<StylerConfig>& styler, Embedder* embedder = nullptr);

inline Prompt build_prompt(std::span<const Caption> captions, const PromptSpec& spec, Embedder* embedder = nullptr) {
  return build_prompt(captions, spec.strategy, spec.styler, embedder);
}

nlohmann::json to_json(const PromptSpec& spec);
PromptSpec prompt_spec_from_json(const nlohmann::json& j);

}  // namespace curette
