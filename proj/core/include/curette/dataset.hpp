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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace curette {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Provenance {
  enum class Kind { kOriginal, kSynthesized };

  Kind kind = Kind::kOriginal;
  std::string prompt_id;  // Synthesized only
  std::uint64_t seed = 0;  // Synthesized only

  static Provenance original() { return {}; }
  static Provenance synthesized(std::string prompt_id, std::uint64_t seed) {
    return {Kind::kSynthesized, std::move(prompt_id), seed};
  }
  bool is_synthesized() const { return kind == Kind::kSynthesized; }

  bool operator==(const Provenance&) const = default;
};

struct ImageAsset {
  std::string image_id;
  std::string uri;
  Provenance provenance;

  bool operator==(const ImageAsset&) const = default;
};

struct Caption {
  std::string caption_id;
  std::string text;
  std::size_t token_count = 0;  // always recomputed from text

  static Caption make(std::string caption_id, std::string text);

  bool operator==(const Caption&) const = default;
};

struct Sample {
  std::string sample_id;
  std::string image_id;
  std::string caption_id;

  bool operator==(const Sample&) const = default;
};

/// Image-captioning corpus. Immutable once built; edits produce a new Dataset
/// through from_parts(), which re-validates every invariant.
class Dataset {
 public:
  /// Raw, unvalidated contents. Images are keyed by image_id; caption lists
  /// keep their order.
  struct Parts {
    Split split = Split::kTrain;
    std::map<std::string, ImageAsset> images;
    std::map<std::string, std::vector<Caption>> captions_by_image;
    /// When empty and derive_samples is set, one sample per caption is
    /// derived with sample_id = caption_id.
    std::vector<Sample> samples;
    bool derive_samples = false;
  };

  Dataset() = default;

  /// Validates and normalizes (samples sorted by sample_id, token counts
  /// recomputed). Throws SchemaError naming the offending record.
  static Dataset from_parts(Parts parts);

  Parts parts() const;

  Split split() const { return split_; }
  const std::map<std::string, ImageAsset>& images() const { return images_; }
  const std::map<std::string, std::vector<Caption>>& captions_by_image() const { return captions_; }
  const std::vector<Sample>& samples() const { return samples_; }

  bool empty() const { return samples_.empty(); }
  std::size_t sample_count() const { return samples_.size(); }
  std::size_t image_count() const { return images_.size(); }

  const Sample* find_sample(std::string_view sample_id) const;
  const ImageAsset* find_image(std::string_view image_id) const;
  /// Captions of an image in list order; empty span for unknown ids.
  const std::vector<Caption>& captions_of(std::string_view image_id) const;
  const Caption* find_caption(std::string_view caption_id) const;
  /// Samples pointing at a caption, in sample_id order.
  std::vector<const Sample*> samples_with_caption(std::string_view caption_id) const;
  const Caption& caption_of(const Sample& sample) const;
  const ImageAsset& image_of(const Sample& sample) const;

  bool operator==(const Dataset& other) const;

 private:
  Split split_ = Split::kTrain;
  std::map<std::string, ImageAsset> images_;
  std::map<std::string, std::vector<Caption>> captions_;
  std::vector<Sample> samples_;
  // caption_id -> (image_id, index in that image's list)
  std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> caption_index_;
  std::map<std::string, std::size_t, std::less<>> sample_index_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> caption_samples_;
};

/// Corpus JSON (see README for the schema). Throws ParseError / SchemaError.
Dataset dataset_from_json(const nlohmann::json& j);
/// `split_override` replaces the document's "split" when present.
Dataset parse_dataset(std::string_view text, std::optional<Split> split_override = std::nullopt);
nlohmann::json to_json(const Dataset& dataset);

Dataset load_dataset(const std::filesystem::path& path, std::optional<Split> split = std::nullopt);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct LengthStats {
  std::map<std::size_t, std::size_t> histogram;  // token_count -> captions
  double mean = 0.0;                             // rounded to 2 decimals
  std::size_t max = 0;
  /// Token counts above the mean, with their caption ids.
  std::vector<std::pair<std::string, std::size_t>> above_mean;
};

/// Token-count distribution over the captions referenced by samples.
/// Throws EmptyDataset.
LengthStats caption_length_stats(const Dataset& dataset);

// Writes via a temporary sibling and rename. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace curette
