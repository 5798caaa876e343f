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

#include "curette/promptgen.hpp"

#include <cmath>

#include "curette/error.hpp"
#include "curette/hash.hpp"

namespace curette {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t representative_index(std::span<const Caption> captions, Embedder& embedder) {
  std::vector<std::string> texts;
  for (const auto& c : captions) texts.push_back(c.text);
  const auto vectors = embedder.embed_batch(texts);
  if (vectors.size() != captions.size()) {
    throw Error(ErrorCode::kEmbedderUnavailable, "embedder returned the wrong number of vectors");
  }

  std::vector<double> mean(embedder.dimension(), 0.0);
  std::size_t used = 0;
  std::vector<double> norms;
  for (const auto& v : vectors) {
    const double n = std::sqrt(dot(v, v));
    norms.push_back(n);
    if (n == 0.0) continue;
    if (mean.size() < v.size()) mean.resize(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
    ++used;
  }
  if (used == 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < captions.size(); ++i) {
      if (captions[i].text.size() < captions[best].text.size()) best = i;
    }
    return best;
  }
  for (double& x : mean) x /= static_cast<double>(used);
  const double mean_norm = std::sqrt(dot(mean, mean));

  std::size_t best = captions.size();
  double best_cos = -2.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (norms[i] == 0.0) continue;
    const double cos = mean_norm == 0.0 ? 0.0 : dot(vectors[i], mean) / (norms[i] * mean_norm);
    if (cos > best_cos) {
      best_cos = cos;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::string prompt_id_for(const std::string& text) { return sha256_hex(text).substr(0, 16); }

Prompt build_prompt(std::span<const Caption> captions, const PromptStrategy& strategy,
                    const std::optional<StylerConfig>& styler, Embedder* embedder) {
  if (captions.empty()) throw Error(ErrorCode::kEmptyCaptionList, "cannot build a prompt from zero captions");
  Prompt p;
  p.strategy = strategy;
  switch (strategy.kind) {
    case PromptStrategy::Kind::kConcat:
      for (const auto& c : captions) {
        if (!p.text.empty()) p.text.push_back(' ');
        p.text += c.text;
        p.source_caption_ids.push_back(c.caption_id);
      }
      break;
    case PromptStrategy::Kind::kRepresentativeSelection: {
      if (embedder == nullptr) {
        throw Error(ErrorCode::kEmbedderUnavailable, "representative selection needs an embedder");
      }
      const auto& chosen = captions[representative_index(captions, *embedder)];
      p.text = chosen.text;
      p.source_caption_ids.push_back(chosen.caption_id);
      break;
    }
    case PromptStrategy::Kind::kSingleCaption:
      if (strategy.index >= captions.size()) {
        throw Error(ErrorCode::kIndexOutOfRange, "caption index " + std::to_string(strategy.index) + " of " +
                                                     std::to_string(captions.size()));
      }
      p.text = captions[strategy.index].text;
      p.source_caption_ids.push_back(captions[strategy.index].caption_id);
      break;
  }
  if (styler) {
    p.text += ", ";
    p.text += styler->text;
    p.styler_applied = true;
  }
  p.prompt_id = prompt_id_for(p.text);
  return p;
}

nlohmann::json to_json(const PromptSpec& spec) {
  nlohmann::json j;
  switch (spec.strategy.kind) {
    case PromptStrategy::Kind::kConcat: j["strategy"] = "concat"; break;
    case PromptStrategy::Kind::kRepresentativeSelection: j["strategy"] = "representative"; break;
    case PromptStrategy::Kind::kSingleCaption:
      j["strategy"] = "single";
      j["index"] = spec.strategy.index;
      break;
  }
  j["styler"] = spec.styler ? nlohmann::json(spec.styler->text) : nlohmann::json(nullptr);
  return j;
}

PromptSpec prompt_spec_from_json(const nlohmann::json& j) {
  PromptSpec spec;
  const std::string strategy = j.value("strategy", std::string("concat"));
  if (strategy == "concat") {
    spec.strategy = PromptStrategy::concat();
  } else if (strategy == "representative" || strategy == "sbert") {
    spec.strategy = PromptStrategy::representative();
  } else if (strategy == "single") {
    spec.strategy = PromptStrategy::single(j.value("index", std::size_t{0}));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown prompt strategy '" + strategy + "'");
  }
  const auto styler = j.find("styler");
  if (styler == j.end() || (styler->is_boolean() && styler->get<bool>())) {
    spec.styler = StylerConfig{};
  } else if (styler->is_string()) {
    spec.styler = StylerConfig{styler->get<std::string>()};
  } else {
    spec.styler = std::nullopt;
  }
  return spec;
}

}  // namespace curette
