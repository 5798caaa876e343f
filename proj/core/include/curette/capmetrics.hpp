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

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace curette::metrics {

/// Output of the canonical tokenizer: lowercase tokens over [a-z0-9'].
using Tokens = std::vector<std::string>;

/// Lowercases, maps every byte outside [a-z0-9'] to a space, then splits on
/// whitespace. Never yields empty tokens.
Tokens tokenize(std::string_view text);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Cumulative BLEU-1..4 for one candidate (index 0 holds BLEU-1).
///
/// Clipped n-gram precisions, +1 smoothing on n >= 2, brevity penalty
/// against the closest reference length (ties go to the shorter one).
std::array<double, 4> bleu_sentence(const Tokens& candidate, std::span<const Tokens> references);

/// Per-sample BLEU-max_n; shorthand for bleu_sentence(...)[max_n - 1].
double bleu(const Tokens& candidate, std::span<const Tokens> references, int max_n = 4);

/// Corpus BLEU-1..4: clipped counts and lengths are summed over the corpus
/// before the geometric mean. Unsmoothed; a 0/0 precision scores 0.
std::array<double, 4> bleu_corpus(std::span<const Tokens> candidates,
                                  std::span<const std::vector<Tokens>> references);

inline constexpr double kRougeBeta = 1.2;

/// LCS F-measure (beta = 1.2), max over references.
double rouge_l(const Tokens& candidate, std::span<const Tokens> references);

/// Exact-match METEOR variant (no stemming, synonyms or paraphrases).
/// Not comparable to published METEOR numbers.
double meteor_lite(const Tokens& candidate, std::span<const Tokens> references);

/// CIDEr for every image of a corpus, in input order. IDF comes from the
/// references of the whole corpus; each image scores 10 x the mean over
/// n = 1..4 of the cosine between its candidate TF-IDF vector and the mean
/// of its reference TF-IDF vectors. No length penalty (plain CIDEr, not
/// CIDEr-D).
std::vector<double> cider(std::span<const Tokens> candidates,
                          std::span<const std::vector<Tokens>> references);

enum class Metric { kBleu1, kBleu2, kBleu3, kBleu4, kRougeL, kCider, kMeteorLite };

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);
std::set<Metric> all_metrics();

/// image_id -> caption strings.
using CaptionSet = std::map<std::string, std::vector<std::string>>;

struct MetricReport {
  std::map<std::string, double> corpus;
  /// metric name -> image_id -> score.
  std::map<std::string, std::map<std::string, double>> per_sample;

  bool operator==(const MetricReport&) const = default;
};

/// Scores one candidate per image against that image's references.
///
/// Corpus values: BLEU is corpus BLEU; ROUGE-L, METEOR-lite and CIDEr are
/// means of the per-image scores. Per-image BLEU is smoothed.
/// Throws KeyMismatch when the key sets differ, NoReferences when an image
/// has no reference, InvalidArgument when an image has != 1 candidate.
MetricReport score_corpus(const CaptionSet& candidates, const CaptionSet& references,
                          const std::set<Metric>& metrics);

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);
/// Rows "metric,image_id,score"; corpus rows use image_id "*".
std::string to_csv(const MetricReport& report);

}  // namespace curette::metrics
