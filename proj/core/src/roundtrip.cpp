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

#include "curette/roundtrip.hpp"

#include <algorithm>
#include <sstream>

#include <spdlog/spdlog.h>

#include "curette/error.hpp"
#include "curette/hash.hpp"

namespace curette {

using metrics::CaptionSet;

nlohmann::json to_json(const RoundTripConfig& config) {
  std::vector<std::string> names;
  for (const auto m : config.metrics) names.emplace_back(metrics::metric_name(m));
  return {{"name", config.name},
          {"prompt", to_json(config.prompt)},
          {"metrics", names},
          {"seed", config.seed},
          {"cache_dir", config.cache_dir.string()},
          {"upper_bound", config.upper_bound},
          {"generator", config.generator},
          {"captioner", config.captioner}};
}

RoundTripConfig roundtrip_config_from_json(const nlohmann::json& j) {
  RoundTripConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("prompt")) c.prompt = prompt_spec_from_json(j.at("prompt"));
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : j.at("metrics")) c.metrics.insert(metrics::parse_metric(m.get<std::string>()));
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.cache_dir = j.value("cache_dir", c.cache_dir.string());
    c.upper_bound = j.value("upper_bound", true);
    c.generator = j.value("generator", std::string());
    c.captioner = j.value("captioner", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("round-trip config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const RoundTripReport& report) {
  nlohmann::json j{{"config", report.config},
                   {"report", metrics::to_json(report.report)},
                   {"skipped", report.skipped},
                   {"skip_count", report.skipped.size()}};
  j["upper_bound"] = report.upper_bound ? metrics::to_json(*report.upper_bound) : nlohmann::json(nullptr);
  return j;
}

std::uint64_t roundtrip_seed(std::uint64_t seed, std::string_view image_id) {
  return hash64({seed, std::string_view("roundtrip"), image_id});
}

RoundTripReport run_roundtrip(const Dataset& dataset, const RoundTripConfig& config,
                              const RoundTripBackends& backends) {
  if (backends.generator == nullptr) throw Error(ErrorCode::kBackendUnavailable, "no image generator configured");
  if (backends.captioner == nullptr) throw Error(ErrorCode::kBackendUnavailable, "no captioner configured");

  std::vector<GenerationRequest> requests;
  CaptionSet references;
  for (const auto& [image_id, captions] : dataset.captions_by_image()) {
    if (captions.empty()) continue;
    const Prompt prompt = build_prompt(captions, config.prompt, backends.embedder);
    const std::uint64_t seed = roundtrip_seed(config.seed, image_id);
    requests.push_back({prompt.text, prompt.prompt_id, seed,
                        (config.cache_dir / (prompt.prompt_id + "_" + hex64(seed) + ".png")).string(), image_id});
    auto& refs = references[image_id];
    for (const auto& c : captions) refs.push_back(c.text);
  }
  if (requests.empty()) throw Error(ErrorCode::kEmptyDataset, "no captioned images to evaluate");

  const auto outcomes = backends.generator->generate(requests);
  if (outcomes.size() != requests.size()) {
    throw Error(ErrorCode::kBackendUnavailable, "generator returned the wrong number of outcomes");
  }

  RoundTripReport out;
  out.config = to_json(config);
  std::vector<std::string> kept;
  std::vector<std::string> generated_uris;
  std::vector<std::string> original_uris;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& image_id = requests[i].image_id;
    if (!outcomes[i].ok) {
      spdlog::warn("GenerationFailed: image '{}': {}: {}", image_id, outcomes[i].error_code, outcomes[i].message);
      out.skipped.push_back(image_id);
      references.erase(image_id);
      continue;
    }
    kept.push_back(image_id);
    generated_uris.push_back(outcomes[i].image_uri);
    original_uris.push_back(dataset.find_image(image_id)->uri);
  }
  if (kept.empty()) throw Error(ErrorCode::kGenerationFailed, "every image failed to generate");

  const auto caption_all = [&](const std::vector<std::string>& uris) {
    auto predicted = backends.captioner->caption_batch(uris);
    if (predicted.size() != uris.size()) {
      throw Error(ErrorCode::kBackendUnavailable, "captioner returned the wrong number of captions");
    }
    CaptionSet candidates;
    for (std::size_t i = 0; i < kept.size(); ++i) candidates[kept[i]] = {std::move(predicted[i])};
    return candidates;
  };

  out.report = metrics::score_corpus(caption_all(generated_uris), references, config.metrics);
  if (config.upper_bound) out.upper_bound = metrics::score_corpus(caption_all(original_uris), references, config.metrics);
  return out;
}

std::vector<ComparisonRow> compare_configs(const Dataset& dataset, const std::vector<ConfigRun>& runs,
                                           metrics::Metric rank_metric) {
  if (runs.empty()) throw Error(ErrorCode::kInvalidArgument, "compare_configs needs at least one config");
  const std::string metric(metrics::metric_name(rank_metric));
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    ComparisonRow row;
    row.index = i;
    row.name = runs[i].config.name;
    try {
      row.report = run_roundtrip(dataset, runs[i].config, runs[i].backends);
      const auto it = row.report->report.corpus.find(metric);
      if (it != row.report->report.corpus.end()) row.score = it->second;
    } catch (const Error& e) {
      spdlog::error("round-trip config '{}' failed: {}", row.name, e.what());
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.score.has_value() != b.score.has_value()) return a.score.has_value();
    if (a.score && *a.score != *b.score) return *a.score > *b.score;
    return a.index < b.index;
  });
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows, metrics::Metric rank_metric) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,name,status," << metrics::metric_name(rank_metric) << ",skipped\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    out << r + 1 << ',' << row.name << ',' << (row.report ? "ok" : "failed") << ',';
    if (row.score) out << *row.score;
    out << ',';
    if (row.report) out << row.report->skipped.size();
    out << '\n';
  }
  return out.str();
}

}  // namespace curette
