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
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace curette::analysis {

enum class LossGroup { kHigh, kLow };

std::string_view to_string(LossGroup g);
LossGroup parse_loss_group(std::string_view s);

struct AnnotationRecord {
  std::string image_id;
  std::string annotator_id;
  LossGroup loss_group = LossGroup::kHigh;
  std::set<std::string> categories;
  std::optional<double> loss;
};

/// 25 generation-error categories; the first four are the ones named in the
/// human study (colour, count, deformation, object errors).
std::vector<std::string> default_taxonomy();
/// JSON array of strings. Throws ParseError / SchemaError.
std::vector<std::string> parse_taxonomy(std::string_view json_text);

/// CSV with header image_id,annotator_id,loss_group,categories[,loss].
/// categories are ';'-joined (may be empty). Throws ParseError.
std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text);

struct ImageErrors {
  std::string image_id;
  LossGroup loss_group = LossGroup::kHigh;
  std::size_t annotators = 0;
  std::size_t selections = 0;
  double mean_errors = 0.0;  // selections / annotators
  std::optional<double> loss;
};

struct AnnotationSummary {
  std::map<std::string, std::size_t> category_counts;  // every taxonomy entry, zeros included
  std::vector<ImageErrors> images;                     // by image_id
  std::vector<std::string> excluded_images;            // fewer than min_annotators
  std::map<std::string, double> group_mean_errors;     // "high"/"low" -> mean of per-image means
  /// Rank correlation of per-image loss vs. mean error count (images with a
  /// loss only); absent with < 2 such images or a constant side.
  std::optional<double> spearman;
};

/// Throws UnknownCategory, DuplicateAnnotator (same image/annotator twice),
/// InvalidArgument (inconsistent loss_group or loss for one image).
AnnotationSummary aggregate_annotations(std::span<const AnnotationRecord> records,
                                        std::span<const std::string> taxonomy, std::size_t min_annotators = 3);

nlohmann::json to_json(const AnnotationSummary& s);
/// "category,count"
std::string category_csv(const AnnotationSummary& s);
/// "image_id,loss_group,annotators,mean_errors,loss"
std::string image_errors_csv(const AnnotationSummary& s);

/// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// One row per run dir: run,policy,rule,value,mode,final_samples,<metrics...>
/// from <dir>/report.json and the externally computed <dir>/metrics.json
/// (a MetricReport). Throws IncompleteRun naming the dir.
std::string sweep_report(std::span<const std::filesystem::path> run_dirs);

}  // namespace curette::analysis
