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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/backends.hpp"
#include "curette/dataset.hpp"
#include "curette/loss_ledger.hpp"
#include "curette/promptgen.hpp"

namespace curette {

enum class CaptionMode { kKeepCaption, kRepartnerCaption };

struct NewImage {
  std::string image_id;
  std::string uri;
  std::string prompt_id;
  std::uint64_t seed = 0;

  bool operator==(const NewImage&) const = default;
};

struct RemoveAction {
  std::string sample_id;
  bool operator==(const RemoveAction&) const = default;
};

struct ReplaceCapAction {
  std::string sample_id;
  std::string old_caption_id;
  std::string new_caption_id;  // sibling caption now referenced by the sample
  bool operator==(const ReplaceCapAction&) const = default;
};

/// The sample is re-pointed to a freshly synthesized image. new_caption_id
/// equals old_caption_id when the caption moves with the sample; otherwise it
/// names a copy of source_caption_id created under the new image.
struct ReplaceImgAction {
  std::string sample_id;
  std::string old_image_id;
  NewImage new_image;
  CaptionMode caption_mode = CaptionMode::kKeepCaption;
  std::string old_caption_id;
  std::string source_caption_id;
  std::string new_caption_id;
  bool operator==(const ReplaceImgAction&) const = default;
};

/// Few-shot augmentation: a new sample pairing a synthesized image with a
/// copy of an existing caption.
struct AugmentAction {
  std::string sample_id;
  std::string source_sample_id;
  std::string source_caption_id;
  std::string new_caption_id;
  NewImage new_image;
  bool operator==(const AugmentAction&) const = default;
};

struct CurationAction {
  int epoch = 0;
  std::variant<RemoveAction, ReplaceCapAction, ReplaceImgAction, AugmentAction> kind;

  const std::string& sample_id() const;
  bool operator==(const CurationAction&) const = default;
};

nlohmann::json to_json(const CurationAction& action);
CurationAction action_from_json(const nlohmann::json& j);
nlohmann::json actions_to_json(std::span<const CurationAction> actions);
std::vector<CurationAction> actions_from_json(const nlohmann::json& j);

struct DatasetSnapshot {
  int epoch = 0;
  Dataset dataset;
  std::vector<CurationAction> actions;  // the edits that derived this snapshot

  bool operator==(const DatasetSnapshot&) const = default;
};

/// Writes `<stem>.json` (corpus plus "epoch") and `<stem>.actions.json`.
void save_snapshot(const DatasetSnapshot& snapshot, const std::filesystem::path& corpus_path);
DatasetSnapshot load_snapshot(const std::filesystem::path& corpus_path);
std::filesystem::path actions_path_for(const std::filesystem::path& corpus_path);

/// Applies an action log in order. Captions left without samples are dropped,
/// then images left without captions. Throws UnknownSample / SchemaError when
/// the log does not fit the dataset.
Dataset replay_actions(const Dataset& dataset, std::span<const CurationAction> actions);

struct CurationIssue {
  enum class Kind { kSingleCaption, kNoCandidate, kPinned, kGenerationFailed };
  Kind kind;
  std::string sample_id;
  std::string message;
};

std::string_view to_string(CurationIssue::Kind kind);

struct CurationResult {
  DatasetSnapshot snapshot;
  std::vector<CurationIssue> issues;
};

/// Everything ReplaceImg-style operations need to synthesize images.
struct GenerationContext {
  ImageGenerator* generator = nullptr;
  Embedder* embedder = nullptr;  // only for representative-selection prompts
  PromptSpec prompt;
  std::filesystem::path cache_dir = "generated";
  std::uint64_t rng_seed = 0;
  /// Reuse `<cache_dir>/<prompt_id>_<seed>.png` when it already exists.
  bool use_cache = true;
};

/// hash64(rng_seed, sample_id, epoch): generation seed for one sample/epoch.
std::uint64_t generation_seed(std::uint64_t rng_seed, std::string_view sample_id, int epoch);

/// The sibling caption a flagged sample should switch to: lowest latest
/// loss among the other captions of its image, then fewest tokens, then list
/// order. Captions whose samples are all in `flagged` are not candidates.
std::optional<std::string> choose_replacement_caption(const Dataset& dataset, const Sample& sample,
                                                      const LossLedger& ledger,
                                                      const std::set<std::string>& flagged);

/// Drops the selected samples. Throws UnknownSample.
CurationResult apply_remove(const DatasetSnapshot& from, std::span<const std::string> selection);

/// Re-points each selected sample to a better sibling caption. Samples whose
/// image has a single caption (or no usable sibling) are skipped and logged.
CurationResult apply_replace_cap(const DatasetSnapshot& from, std::span<const std::string> selection,
                                 const LossLedger& ledger);

struct ReplaceImgOptions {
  CaptionMode caption_mode = CaptionMode::kKeepCaption;
  bool pin_replacements = true;
};

/// Re-points each selected sample to a newly synthesized image. Failed
/// generations leave the sample untouched and are logged; a dead backend
/// throws BackendUnavailable and nothing is applied.
CurationResult apply_replace_img(const DatasetSnapshot& from, std::span<const std::string> selection,
                                 const LossLedger& ledger, const ReplaceImgOptions& options,
                                 const GenerationContext& gen);

struct StaticMode {
  enum class Kind { kPerImageCount, kCoinFlip };
  Kind kind = Kind::kPerImageCount;
  std::size_t captions_replaced = 1;  // kPerImageCount, 1..4
  double p = 0.5;                     // kCoinFlip

  static StaticMode per_image_count(std::size_t k) { return {Kind::kPerImageCount, k, 0.0}; }
  static StaticMode coin_flip(double p) { return {Kind::kCoinFlip, 0, p}; }
};

nlohmann::json to_json(const StaticMode& mode);
StaticMode static_mode_from_json(const nlohmann::json& j);

/// Whether CoinFlip replaces `sample_id`: unit(hash64(seed, "coin", id)) < p.
bool coin_flip_replaces(std::uint64_t rng_seed, std::string_view sample_id, double p);

/// One-shot transform before training; the result is an epoch-0 snapshot
/// whose actions are the replacements. PerImageCount replaces the first k
/// captions (list order) of every image; CoinFlip replaces each sample
/// independently. Throws InvalidArgument on unmet preconditions.
CurationResult apply_static_replace(const Dataset& dataset, const StaticMode& mode, const GenerationContext& gen);

/// Appends n_extra synthesized shots: extra shot j prompts with the caption of
/// shot (j mod K) (plus the styler, if configured) and reuses that caption's
/// text for the new sample.
CurationResult few_shot_augment(const Dataset& shots, std::size_t n_extra, const GenerationContext& gen);

}  // namespace curette
