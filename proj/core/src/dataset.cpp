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

#include "curette/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "curette/capmetrics.hpp"
#include "curette/error.hpp"

namespace curette {
namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::kSchemaError, what); }

const std::vector<Caption>& no_captions() {
  static const std::vector<Caption> empty;
  return empty;
}

std::string require_string(const nlohmann::json& obj, const char* field, const std::string& where) {
  const auto it = obj.find(field);
  if (it == obj.end()) schema_error(where + ": missing field '" + field + "'");
  if (!it->is_string()) schema_error(where + ": field '" + field + "' must be a string");
  return it->get<std::string>();
}

Provenance provenance_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where + ": provenance must be an object");
  const std::string kind = require_string(j, "kind", where + " provenance");
  if (kind == "original") return Provenance::original();
  if (kind == "synthesized") {
    const auto seed = j.find("seed");
    if (seed == j.end() || !seed->is_number_unsigned()) {
      schema_error(where + ": synthesized provenance needs an unsigned 'seed'");
    }
    return Provenance::synthesized(require_string(j, "prompt_id", where + " provenance"),
                                   seed->get<std::uint64_t>());
  }
  schema_error(where + ": unknown provenance kind '" + kind + "'");
}

nlohmann::json provenance_to_json(const Provenance& p) {
  if (!p.is_synthesized()) return {{"kind", "original"}};
  return {{"kind", "synthesized"}, {"prompt_id", p.prompt_id}, {"seed", p.seed}};
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kSchemaError, "unknown split '" + std::string(name) + "'");
}

Caption Caption::make(std::string caption_id, std::string text) {
  Caption c{std::move(caption_id), std::move(text), 0};
  c.token_count = metrics::tokenize(c.text).size();
  return c;
}

Dataset Dataset::from_parts(Parts parts) {
  Dataset d;
  d.split_ = parts.split;

  for (const auto& [key, image] : parts.images) {
    if (key != image.image_id) schema_error("image '" + image.image_id + "' keyed as '" + key + "'");
    if (image.image_id.empty()) schema_error("image with empty image_id");
    if (image.uri.empty()) schema_error("image '" + image.image_id + "': empty uri");
    if (image.provenance.is_synthesized() && image.provenance.prompt_id.empty()) {
      schema_error("image '" + image.image_id + "': synthesized provenance without prompt_id");
    }
  }

  for (auto& [image_id, captions] : parts.captions_by_image) {
    if (!parts.images.contains(image_id)) {
      const std::string cid = captions.empty() ? std::string("<none>") : captions.front().caption_id;
      schema_error("caption '" + cid + "' references missing image '" + image_id + "'");
    }
    for (std::size_t i = 0; i < captions.size(); ++i) {
      auto& c = captions[i];
      if (c.caption_id.empty()) schema_error("image '" + image_id + "': caption with empty caption_id");
      if (blank(c.text)) schema_error("caption '" + c.caption_id + "': empty text");
      c.token_count = metrics::tokenize(c.text).size();
      const auto [it, inserted] = d.caption_index_.emplace(c.caption_id, std::make_pair(image_id, i));
      if (!inserted) schema_error("duplicate caption_id '" + c.caption_id + "'");
    }
  }

  if (parts.derive_samples && parts.samples.empty()) {
    for (const auto& [image_id, captions] : parts.captions_by_image) {
      for (const auto& c : captions) parts.samples.push_back({c.caption_id, image_id, c.caption_id});
    }
  }

  std::set<std::string> referenced_captions;
  for (const auto& s : parts.samples) {
    if (s.sample_id.empty()) schema_error("sample with empty sample_id");
    if (!parts.images.contains(s.image_id)) {
      schema_error("sample '" + s.sample_id + "' (caption '" + s.caption_id + "') references missing image '" +
                   s.image_id + "'");
    }
    const auto it = d.caption_index_.find(s.caption_id);
    if (it == d.caption_index_.end()) {
      schema_error("sample '" + s.sample_id + "' references missing caption '" + s.caption_id + "'");
    }
    if (it->second.first != s.image_id) {
      schema_error("sample '" + s.sample_id + "': caption '" + s.caption_id + "' belongs to image '" +
                   it->second.first + "', not '" + s.image_id + "'");
    }
    referenced_captions.insert(s.caption_id);
  }
  for (const auto& [cid, _] : d.caption_index_) {
    if (!referenced_captions.contains(cid)) schema_error("caption '" + cid + "' has no sample");
  }

  std::sort(parts.samples.begin(), parts.samples.end(),
            [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
  for (std::size_t i = 0; i < parts.samples.size(); ++i) {
    const auto [it, inserted] = d.sample_index_.emplace(parts.samples[i].sample_id, i);
    if (!inserted) schema_error("duplicate sample_id '" + parts.samples[i].sample_id + "'");
    d.caption_samples_[parts.samples[i].caption_id].push_back(i);
  }

  d.images_ = std::move(parts.images);
  d.captions_ = std::move(parts.captions_by_image);
  d.samples_ = std::move(parts.samples);
  return d;
}

Dataset::Parts Dataset::parts() const {
  Parts p;
  p.split = split_;
  p.images = images_;
  p.captions_by_image = captions_;
  p.samples = samples_;
  return p;
}

const Sample* Dataset::find_sample(std::string_view sample_id) const {
  const auto it = sample_index_.find(sample_id);
  return it == sample_index_.end() ? nullptr : &samples_[it->second];
}

const ImageAsset* Dataset::find_image(std::string_view image_id) const {
  const auto it = images_.find(std::string(image_id));
  return it == images_.end() ? nullptr : &it->second;
}

const std::vector<Caption>& Dataset::captions_of(std::string_view image_id) const {
  const auto it = captions_.find(std::string(image_id));
  return it == captions_.end() ? no_captions() : it->second;
}

const Caption* Dataset::find_caption(std::string_view caption_id) const {
  const auto it = caption_index_.find(caption_id);
  if (it == caption_index_.end()) return nullptr;
  return &captions_.at(it->second.first)[it->second.second];
}

std::vector<const Sample*> Dataset::samples_with_caption(std::string_view caption_id) const {
  std::vector<const Sample*> out;
  if (const auto it = caption_samples_.find(caption_id); it != caption_samples_.end()) {
    for (const auto i : it->second) out.push_back(&samples_[i]);
  }
  return out;
}

const Caption& Dataset::caption_of(const Sample& sample) const {
  const Caption* c = find_caption(sample.caption_id);
  if (c == nullptr) throw Error(ErrorCode::kUnknownSample, "caption '" + sample.caption_id + "'");
  return *c;
}

const ImageAsset& Dataset::image_of(const Sample& sample) const {
  const ImageAsset* img = find_image(sample.image_id);
  if (img == nullptr) throw Error(ErrorCode::kUnknownSample, "image '" + sample.image_id + "'");
  return *img;
}

bool Dataset::operator==(const Dataset& other) const {
  return split_ == other.split_ && images_ == other.images_ && captions_ == other.captions_ &&
         samples_ == other.samples_;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object()) schema_error("corpus root must be an object");
  Dataset::Parts parts;
  parts.split = parse_split(require_string(j, "split", "corpus"));
  const auto images = j.find("images");
  if (images == j.end() || !images->is_array()) schema_error("corpus: missing 'images' array");

  for (std::size_t i = 0; i < images->size(); ++i) {
    const auto& img = (*images)[i];
    const std::string where = "images[" + std::to_string(i) + "]";
    if (!img.is_object()) schema_error(where + ": must be an object");
    ImageAsset asset;
    asset.image_id = require_string(img, "image_id", where);
    asset.uri = require_string(img, "uri", "image '" + asset.image_id + "'");
    const auto prov = img.find("provenance");
    if (prov != img.end()) asset.provenance = provenance_from_json(*prov, "image '" + asset.image_id + "'");
    if (parts.images.contains(asset.image_id)) schema_error("duplicate image_id '" + asset.image_id + "'");

    const auto caps = img.find("captions");
    if (caps == img.end() || !caps->is_array()) {
      schema_error("image '" + asset.image_id + "': missing 'captions' array");
    }
    std::vector<Caption> captions;
    for (std::size_t k = 0; k < caps->size(); ++k) {
      const auto& c = (*caps)[k];
      const std::string cwhere = "image '" + asset.image_id + "' captions[" + std::to_string(k) + "]";
      if (!c.is_object()) schema_error(cwhere + ": must be an object");
      const std::string cid = require_string(c, "caption_id", cwhere);
      captions.push_back(Caption::make(cid, require_string(c, "text", "caption '" + cid + "'")));
    }
    parts.captions_by_image.emplace(asset.image_id, std::move(captions));
    parts.images.emplace(asset.image_id, std::move(asset));
  }

  const auto samples = j.find("samples");
  if (samples == j.end()) {
    parts.derive_samples = true;
  } else {
    if (!samples->is_array()) schema_error("corpus: 'samples' must be an array");
    for (std::size_t i = 0; i < samples->size(); ++i) {
      const auto& s = (*samples)[i];
      const std::string where = "samples[" + std::to_string(i) + "]";
      if (!s.is_object()) schema_error(where + ": must be an object");
      const std::string sid = require_string(s, "sample_id", where);
      parts.samples.push_back({sid, require_string(s, "image_id", "sample '" + sid + "'"),
                               require_string(s, "caption_id", "sample '" + sid + "'")});
    }
  }

  return Dataset::from_parts(std::move(parts));
}

Dataset parse_dataset(std::string_view text, std::optional<Split> split_override) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (split_override && j.is_object()) j["split"] = std::string(to_string(*split_override));
  return dataset_from_json(j);
}

nlohmann::json to_json(const Dataset& dataset) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& [id, asset] : dataset.images()) {
    nlohmann::json caps = nlohmann::json::array();
    for (const auto& c : dataset.captions_of(id)) {
      caps.push_back({{"caption_id", c.caption_id}, {"text", c.text}});
    }
    images.push_back({{"image_id", asset.image_id},
                      {"uri", asset.uri},
                      {"provenance", provenance_to_json(asset.provenance)},
                      {"captions", std::move(caps)}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : dataset.samples()) {
    samples.push_back({{"sample_id", s.sample_id}, {"image_id", s.image_id}, {"caption_id", s.caption_id}});
  }
  return {{"split", std::string(to_string(dataset.split()))},
          {"images", std::move(images)},
          {"samples", std::move(samples)}};
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<Split> split) {
  return parse_dataset(read_file(path), split);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(dataset).dump() + "\n");
}

LengthStats caption_length_stats(const Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "caption_length_stats on empty dataset");
  LengthStats stats;
  std::size_t total = 0, count = 0;
  for (const auto& [_, captions] : dataset.captions_by_image()) {
    for (const auto& c : captions) {
      ++stats.histogram[c.token_count];
      total += c.token_count;
      ++count;
      stats.max = std::max(stats.max, c.token_count);
    }
  }
  const double raw_mean = static_cast<double>(total) / static_cast<double>(count);
  stats.mean = std::round(raw_mean * 100.0) / 100.0;
  for (const auto& [_, captions] : dataset.captions_by_image()) {
    for (const auto& c : captions) {
      if (static_cast<double>(c.token_count) > raw_mean) stats.above_mean.emplace_back(c.caption_id, c.token_count);
    }
  }
  std::sort(stats.above_mean.begin(), stats.above_mean.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return stats;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename to '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace curette
