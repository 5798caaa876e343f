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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/backends.hpp"
#include "curette/capmetrics.hpp"
#include "curette/dataset.hpp"
#include "curette/promptgen.hpp"

namespace curette {

// Round-trip evaluation: captions -> generated image -> predicted caption,
// scored against the original captions.

struct RoundTripConfig {
  std::string name = "default";
  PromptSpec prompt;
  std::set<metrics::Metric> metrics = metrics::all_metrics();
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir = "generated";
  bool upper_bound = true;
  /// Backend descriptions, recorded in the report for audit only.
  std::string generator;
  std::string captioner;
};

nlohmann::json to_json(const RoundTripConfig& config);
RoundTripConfig roundtrip_config_from_json(const nlohmann::json& j);

struct RoundTripBackends {
  ImageGenerator* generator = nullptr;
  Captioner* captioner = nullptr;
  Embedder* embedder = nullptr;  // representative-selection prompts only
};

struct RoundTripReport {
  metrics::MetricReport report;
  std::optional<metrics::MetricReport> upper_bound;
  std::vector<std::string> skipped;  // image_ids whose generation failed
  nlohmann::json config;
};

nlohmann::json to_json(const RoundTripReport& report);

/// Seed for the image generated from `image_id`: hash64(seed, "roundtrip", id).
std::uint64_t roundtrip_seed(std::uint64_t seed, std::string_view image_id);

/// One synthetic image per image (prompt from all of its captions), one
/// predicted caption per synthetic image. Images whose generation fails are
/// skipped and left out of both the report and the upper bound.
/// Throws BackendUnavailable when a backend is missing or dead.
RoundTripReport run_roundtrip(const Dataset& dataset, const RoundTripConfig& config,
                              const RoundTripBackends& backends);

struct ConfigRun {
  RoundTripConfig config;
  RoundTripBackends backends;
};

struct ComparisonRow {
  std::size_t index = 0;  // position in the input list
  std::string name;
  std::optional<RoundTripReport> report;
  std::string error;      // set when the config failed
  std::optional<double> score;
};

/// Runs every config and ranks the successful ones by `rank_metric`
/// (descending, ties by input order); failed configs come last.
std::vector<ComparisonRow> compare_configs(const Dataset& dataset, const std::vector<ConfigRun>& runs,
                                           metrics::Metric rank_metric = metrics::Metric::kBleu4);

/// "rank,name,status,<metric>,skipped" table.
std::string comparison_csv(const std::vector<ComparisonRow>& rows, metrics::Metric rank_metric);

}  // namespace curette
