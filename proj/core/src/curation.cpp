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

#include "curette/curation.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <spdlog/spdlog.h>

#include "curette/error.hpp"
#include "curette/hash.hpp"

namespace curette {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

nlohmann::json new_image_to_json(const NewImage& img) {
  return {{"image_id", img.image_id}, {"uri", img.uri}, {"prompt_id", img.prompt_id}, {"seed", img.seed}};
}

NewImage new_image_from_json(const nlohmann::json& j) {
  return {j.at("image_id").get<std::string>(), j.at("uri").get<std::string>(), j.at("prompt_id").get<std::string>(),
          j.at("seed").get<std::uint64_t>()};
}

void require_known(const Dataset& dataset, std::span<const std::string> selection) {
  for (const auto& id : selection) {
    if (dataset.find_sample(id) == nullptr) throw Error(ErrorCode::kUnknownSample, "sample '" + id + "'");
  }
}

std::size_t references_to(const Dataset& dataset, const std::string& caption_id) {
  return dataset.samples_with_caption(caption_id).size();
}

void log_issue(const CurationIssue& issue) {
  // Pinned skips are routine under the default policy.
  const auto level = issue.kind == CurationIssue::Kind::kPinned ? spdlog::level::debug : spdlog::level::warn;
  spdlog::log(level, "{}: sample '{}': {}", to_string(issue.kind), issue.sample_id, issue.message);
}

// Mutable view over Dataset parts used by replay.
struct Workspace {
  Dataset::Parts parts;
  std::map<std::string, Sample> samples;
  std::map<std::string, std::string> caption_owner;  // caption_id -> image_id
  std::set<std::string> touched_captions;
  std::set<std::string> touched_images;

  explicit Workspace(const Dataset& d) : parts(d.parts()) {
    for (const auto& s : parts.samples) samples.emplace(s.sample_id, s);
    for (const auto& [image_id, caps] : parts.captions_by_image) {
      for (const auto& c : caps) caption_owner.emplace(c.caption_id, image_id);
    }
  }

  Sample& sample(const std::string& id) {
    const auto it = samples.find(id);
    if (it == samples.end()) throw Error(ErrorCode::kUnknownSample, "sample '" + id + "'");
    return it->second;
  }

  const Caption& caption(const std::string& caption_id) {
    const auto owner = caption_owner.find(caption_id);
    if (owner == caption_owner.end()) throw Error(ErrorCode::kSchemaError, "unknown caption '" + caption_id + "'");
    for (const auto& c : parts.captions_by_image[owner->second]) {
      if (c.caption_id == caption_id) return c;
    }
    throw Error(ErrorCode::kSchemaError, "caption index out of sync for '" + caption_id + "'");
  }

  void add_image(const NewImage& img) {
    if (parts.images.contains(img.image_id)) {
      throw Error(ErrorCode::kSchemaError, "image '" + img.image_id + "' already exists");
    }
    parts.images.emplace(img.image_id,
                         ImageAsset{img.image_id, img.uri, Provenance::synthesized(img.prompt_id, img.seed)});
    parts.captions_by_image[img.image_id];
  }

  void add_caption_copy(const std::string& source_id, const std::string& new_id, const std::string& image_id) {
    if (caption_owner.contains(new_id)) throw Error(ErrorCode::kSchemaError, "caption '" + new_id + "' already exists");
    Caption copy = caption(source_id);
    copy.caption_id = new_id;
    parts.captions_by_image[image_id].push_back(std::move(copy));
    caption_owner[new_id] = image_id;
  }

  void move_caption(const std::string& caption_id, const std::string& to_image) {
    const std::string from_image = caption_owner.at(caption_id);
    auto& from = parts.captions_by_image[from_image];
    const auto it = std::find_if(from.begin(), from.end(), [&](const Caption& c) { return c.caption_id == caption_id; });
    Caption moved = *it;
    from.erase(it);
    parts.captions_by_image[to_image].push_back(std::move(moved));
    caption_owner[caption_id] = to_image;
    touched_images.insert(from_image);
  }

  Dataset finish() {
    std::set<std::string> referenced;
    for (const auto& [_, s] : samples) referenced.insert(s.caption_id);
    for (const auto& cid : touched_captions) {
      if (referenced.contains(cid)) continue;
      const auto owner = caption_owner.find(cid);
      if (owner == caption_owner.end()) continue;
      auto& list = parts.captions_by_image[owner->second];
      std::erase_if(list, [&](const Caption& c) { return c.caption_id == cid; });
      touched_images.insert(owner->second);
      caption_owner.erase(owner);
    }
    for (const auto& image_id : touched_images) {
      const auto it = parts.captions_by_image.find(image_id);
      if (it != parts.captions_by_image.end() && it->second.empty()) {
        parts.captions_by_image.erase(it);
        parts.images.erase(image_id);
      }
    }
    parts.samples.clear();
    for (auto& [_, s] : samples) parts.samples.push_back(std::move(s));
    parts.derive_samples = false;
    return Dataset::from_parts(std::move(parts));
  }
};

struct PlannedReplacement {
  const Sample* sample;
  GenerationRequest request;
  CaptionMode mode;
  std::string source_caption_id;
  std::string new_caption_id;
};

// Plans and runs image replacements for `ids` (already validated); returns
// the actions for successful generations.
std::vector<CurationAction> replace_images(const Dataset& dataset, std::span<const std::string> ids,
                                           const LossLedger* ledger, const ReplaceImgOptions& options,
                                           const GenerationContext& gen, int epoch,
                                           std::vector<CurationIssue>& issues) {
  if (gen.generator == nullptr) throw Error(ErrorCode::kBackendUnavailable, "no image generator configured");
  const std::set<std::string> flagged(ids.begin(), ids.end());
  std::map<std::string, Prompt> prompt_by_image;
  std::vector<PlannedReplacement> plans;

  for (const auto& id : ids) {
    const Sample& sample = *dataset.find_sample(id);
    const ImageAsset& image = dataset.image_of(sample);
    if (options.pin_replacements && image.provenance.is_synthesized()) {
      issues.push_back({CurationIssue::Kind::kPinned, id, "already points at synthesized image '" + image.image_id + "'"});
      log_issue(issues.back());
      continue;
    }
    auto prompt_it = prompt_by_image.find(image.image_id);
    if (prompt_it == prompt_by_image.end()) {
      prompt_it = prompt_by_image.emplace(image.image_id,
                                          build_prompt(dataset.captions_of(image.image_id), gen.prompt, gen.embedder))
                      .first;
    }
    const Prompt& prompt = prompt_it->second;
    const std::uint64_t seed = generation_seed(gen.rng_seed, id, epoch);
    const std::string new_image_id = "syn-" + hex64(seed);

    PlannedReplacement plan{&sample, {}, CaptionMode::kKeepCaption, sample.caption_id, sample.caption_id};
    if (options.caption_mode == CaptionMode::kRepartnerCaption && ledger != nullptr) {
      if (auto sibling = choose_replacement_caption(dataset, sample, *ledger, flagged)) {
        plan.mode = CaptionMode::kRepartnerCaption;
        plan.source_caption_id = *sibling;
        plan.new_caption_id = *sibling + "@" + new_image_id;
      }
    }
    if (plan.mode == CaptionMode::kKeepCaption && references_to(dataset, sample.caption_id) > 1) {
      plan.new_caption_id = sample.caption_id + "@" + new_image_id;
    }
    plan.request = GenerationRequest{prompt.text, prompt.prompt_id, seed,
                                     (gen.cache_dir / (prompt.prompt_id + "_" + hex64(seed) + ".png")).string(),
                                     image.image_id};
    plans.push_back(std::move(plan));
  }

  std::vector<GenerationOutcome> outcomes(plans.size());
  std::vector<GenerationRequest> pending;
  std::vector<std::size_t> pending_index;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    std::error_code ec;
    const auto& uri = plans[i].request.out_uri;
    if (gen.use_cache && std::filesystem::is_regular_file(uri, ec) && std::filesystem::file_size(uri, ec) > 0) {
      outcomes[i] = GenerationOutcome::success(uri);
    } else {
      pending.push_back(plans[i].request);
      pending_index.push_back(i);
    }
  }
  if (!pending.empty()) {
    auto generated = gen.generator->generate(pending);
    if (generated.size() != pending.size()) {
      throw Error(ErrorCode::kBackendUnavailable, "generator returned the wrong number of outcomes");
    }
    for (std::size_t k = 0; k < pending.size(); ++k) outcomes[pending_index[k]] = std::move(generated[k]);
  }

  std::vector<CurationAction> actions;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i];
    if (!outcomes[i].ok) {
      issues.push_back({CurationIssue::Kind::kGenerationFailed, plan.sample->sample_id,
                        outcomes[i].error_code + ": " + outcomes[i].message});
      log_issue(issues.back());
      continue;
    }
    ReplaceImgAction a;
    a.sample_id = plan.sample->sample_id;
    a.old_image_id = plan.sample->image_id;
    a.new_image = NewImage{"syn-" + hex64(plan.request.seed), outcomes[i].image_uri, plan.request.prompt_id,
                           plan.request.seed};
    a.caption_mode = plan.mode;
    a.old_caption_id = plan.sample->caption_id;
    a.source_caption_id = plan.source_caption_id;
    a.new_caption_id = plan.new_caption_id;
    actions.push_back({epoch, std::move(a)});
  }
  return actions;
}

}  // namespace

const std::string& CurationAction::sample_id() const {
  return std::visit([](const auto& a) -> const std::string& { return a.sample_id; }, kind);
}

std::string_view to_string(CurationIssue::Kind kind) {
  switch (kind) {
    case CurationIssue::Kind::kSingleCaption: return "SkippedSingleCaption";
    case CurationIssue::Kind::kNoCandidate: return "SkippedNoCandidate";
    case CurationIssue::Kind::kPinned: return "SkippedPinned";
    case CurationIssue::Kind::kGenerationFailed: return "GenerationFailed";
  }
  return "Unknown";
}

nlohmann::json to_json(const CurationAction& action) {
  nlohmann::json j{{"epoch", action.epoch}};
  std::visit(Overloaded{
                 [&](const RemoveAction& a) {
                   j["kind"] = "remove";
                   j["sample_id"] = a.sample_id;
                 },
                 [&](const ReplaceCapAction& a) {
                   j["kind"] = "replace_cap";
                   j["sample_id"] = a.sample_id;
                   j["old_caption_id"] = a.old_caption_id;
                   j["new_caption_id"] = a.new_caption_id;
                 },
                 [&](const ReplaceImgAction& a) {
                   j["kind"] = "replace_img";
                   j["sample_id"] = a.sample_id;
                   j["old_image_id"] = a.old_image_id;
                   j["new_image_id"] = a.new_image.image_id;
                   if (a.caption_mode == CaptionMode::kKeepCaption) {
                     j["caption_mode"] = {{"kind", "keep"}};
                   } else {
                     j["caption_mode"] = {{"kind", "repartner"}, {"new_caption_id", a.new_caption_id}};
                   }
                   j["old_caption_id"] = a.old_caption_id;
                   j["source_caption_id"] = a.source_caption_id;
                   j["new_caption_id"] = a.new_caption_id;
                   j["new_image"] = new_image_to_json(a.new_image);
                 },
                 [&](const AugmentAction& a) {
                   j["kind"] = "augment";
                   j["sample_id"] = a.sample_id;
                   j["source_sample_id"] = a.source_sample_id;
                   j["source_caption_id"] = a.source_caption_id;
                   j["new_caption_id"] = a.new_caption_id;
                   j["new_image_id"] = a.new_image.image_id;
                   j["new_image"] = new_image_to_json(a.new_image);
                 },
             },
             action.kind);
  return j;
}

CurationAction action_from_json(const nlohmann::json& j) {
  CurationAction action;
  try {
    action.epoch = j.at("epoch").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    const std::string sample_id = j.at("sample_id").get<std::string>();
    if (kind == "remove") {
      action.kind = RemoveAction{sample_id};
    } else if (kind == "replace_cap") {
      action.kind = ReplaceCapAction{sample_id, j.at("old_caption_id").get<std::string>(),
                                     j.at("new_caption_id").get<std::string>()};
    } else if (kind == "replace_img") {
      ReplaceImgAction a;
      a.sample_id = sample_id;
      a.old_image_id = j.at("old_image_id").get<std::string>();
      a.new_image = new_image_from_json(j.at("new_image"));
      a.caption_mode = j.at("caption_mode").at("kind").get<std::string>() == "repartner"
                           ? CaptionMode::kRepartnerCaption
                           : CaptionMode::kKeepCaption;
      a.old_caption_id = j.at("old_caption_id").get<std::string>();
      a.source_caption_id = j.at("source_caption_id").get<std::string>();
      a.new_caption_id = j.at("new_caption_id").get<std::string>();
      action.kind = std::move(a);
    } else if (kind == "augment") {
      action.kind = AugmentAction{sample_id, j.at("source_sample_id").get<std::string>(),
                                  j.at("source_caption_id").get<std::string>(),
                                  j.at("new_caption_id").get<std::string>(), new_image_from_json(j.at("new_image"))};
    } else {
      throw Error(ErrorCode::kSchemaError, "unknown action kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("curation action: ") + e.what());
  }
  return action;
}

nlohmann::json actions_to_json(std::span<const CurationAction> actions) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : actions) out.push_back(to_json(a));
  return out;
}

std::vector<CurationAction> actions_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kSchemaError, "action log must be a JSON array");
  std::vector<CurationAction> out;
  for (const auto& a : j) out.push_back(action_from_json(a));
  return out;
}

std::filesystem::path actions_path_for(const std::filesystem::path& corpus_path) {
  auto p = corpus_path;
  p.replace_extension(".actions.json");
  return p;
}

void save_snapshot(const DatasetSnapshot& snapshot, const std::filesystem::path& corpus_path) {
  auto corpus = to_json(snapshot.dataset);
  corpus["epoch"] = snapshot.epoch;
  write_file_atomic(corpus_path, corpus.dump() + "\n");
  write_file_atomic(actions_path_for(corpus_path), actions_to_json(snapshot.actions).dump() + "\n");
}

DatasetSnapshot load_snapshot(const std::filesystem::path& corpus_path) {
  nlohmann::json corpus;
  try {
    corpus = nlohmann::json::parse(read_file(corpus_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, corpus_path.string() + ": " + e.what());
  }
  DatasetSnapshot snap;
  snap.epoch = corpus.value("epoch", 0);
  snap.dataset = dataset_from_json(corpus);
  nlohmann::json actions;
  try {
    actions = nlohmann::json::parse(read_file(actions_path_for(corpus_path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, actions_path_for(corpus_path).string() + ": " + e.what());
  }
  snap.actions = actions_from_json(actions);
  return snap;
}

Dataset replay_actions(const Dataset& dataset, std::span<const CurationAction> actions) {
  if (actions.empty()) return dataset;
  Workspace ws(dataset);
  for (const auto& action : actions) {
    std::visit(Overloaded{
                   [&](const RemoveAction& a) {
                     const Sample s = ws.sample(a.sample_id);
                     ws.samples.erase(a.sample_id);
                     ws.touched_captions.insert(s.caption_id);
                   },
                   [&](const ReplaceCapAction& a) {
                     Sample& s = ws.sample(a.sample_id);
                     if (s.caption_id != a.old_caption_id) {
                       throw Error(ErrorCode::kSchemaError, "replace_cap for '" + a.sample_id + "' expects caption '" +
                                                                a.old_caption_id + "'");
                     }
                     const auto owner = ws.caption_owner.find(a.new_caption_id);
                     if (owner == ws.caption_owner.end() || owner->second != s.image_id) {
                       throw Error(ErrorCode::kSchemaError,
                                   "replace_cap: '" + a.new_caption_id + "' is not a caption of '" + s.image_id + "'");
                     }
                     ws.touched_captions.insert(s.caption_id);
                     s.caption_id = a.new_caption_id;
                   },
                   [&](const ReplaceImgAction& a) {
                     Sample& s = ws.sample(a.sample_id);
                     if (s.image_id != a.old_image_id || s.caption_id != a.old_caption_id) {
                       throw Error(ErrorCode::kSchemaError, "replace_img for '" + a.sample_id + "' does not match");
                     }
                     ws.add_image(a.new_image);
                     if (a.new_caption_id == a.old_caption_id) {
                       ws.move_caption(a.old_caption_id, a.new_image.image_id);
                     } else {
                       ws.add_caption_copy(a.source_caption_id, a.new_caption_id, a.new_image.image_id);
                       ws.touched_captions.insert(a.old_caption_id);
                     }
                     ws.touched_images.insert(a.old_image_id);
                     s.image_id = a.new_image.image_id;
                     s.caption_id = a.new_caption_id;
                   },
                   [&](const AugmentAction& a) {
                     ws.sample(a.source_sample_id);
                     if (ws.samples.contains(a.sample_id)) {
                       throw Error(ErrorCode::kSchemaError, "augment: sample '" + a.sample_id + "' already exists");
                     }
                     ws.add_image(a.new_image);
                     ws.add_caption_copy(a.source_caption_id, a.new_caption_id, a.new_image.image_id);
                     ws.samples.emplace(a.sample_id, Sample{a.sample_id, a.new_image.image_id, a.new_caption_id});
                   },
               },
               action.kind);
  }
  return ws.finish();
}

std::uint64_t generation_seed(std::uint64_t rng_seed, std::string_view sample_id, int epoch) {
  return hash64({rng_seed, sample_id, static_cast<std::uint64_t>(epoch)});
}

std::optional<std::string> choose_replacement_caption(const Dataset& dataset, const Sample& sample,
                                                      const LossLedger& ledger,
                                                      const std::set<std::string>& flagged) {
  const auto& captions = dataset.captions_of(sample.image_id);
  struct Candidate {
    double loss;
    std::size_t tokens;
    std::size_t order;
    const std::string* id;
  };
  std::optional<Candidate> best;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto& c = captions[i];
    if (c.caption_id == sample.caption_id) continue;
    double loss = std::numeric_limits<double>::infinity();
    bool usable = false;
    for (const Sample* other : dataset.samples_with_caption(c.caption_id)) {
      if (flagged.contains(other->sample_id)) continue;
      usable = true;
      if (const auto l = ledger.latest_loss(other->sample_id)) loss = std::min(loss, *l);
    }
    if (!usable) continue;
    const Candidate cand{loss, c.token_count, i, &c.caption_id};
    const auto better = [](const Candidate& a, const Candidate& b) {
      if (a.loss != b.loss) return a.loss < b.loss;
      if (a.tokens != b.tokens) return a.tokens < b.tokens;
      return a.order < b.order;
    };
    if (!best || better(cand, *best)) best = cand;
  }
  if (!best) return std::nullopt;
  return *best->id;
}

CurationResult apply_remove(const DatasetSnapshot& from, std::span<const std::string> selection) {
  require_known(from.dataset, selection);
  CurationResult result;
  result.snapshot.epoch = from.epoch + 1;
  std::set<std::string> seen;
  for (const auto& id : selection) {
    if (seen.insert(id).second) result.snapshot.actions.push_back({result.snapshot.epoch, RemoveAction{id}});
  }
  result.snapshot.dataset = replay_actions(from.dataset, result.snapshot.actions);
  return result;
}

CurationResult apply_replace_cap(const DatasetSnapshot& from, std::span<const std::string> selection,
                                 const LossLedger& ledger) {
  require_known(from.dataset, selection);
  CurationResult result;
  result.snapshot.epoch = from.epoch + 1;
  const std::set<std::string> flagged(selection.begin(), selection.end());
  std::set<std::string> seen;
  for (const auto& id : selection) {
    if (!seen.insert(id).second) continue;
    const Sample& sample = *from.dataset.find_sample(id);
    if (from.dataset.captions_of(sample.image_id).size() < 2) {
      result.issues.push_back({CurationIssue::Kind::kSingleCaption, id, "image '" + sample.image_id + "' has one caption"});
      log_issue(result.issues.back());
      continue;
    }
    const auto replacement = choose_replacement_caption(from.dataset, sample, ledger, flagged);
    if (!replacement) {
      result.issues.push_back({CurationIssue::Kind::kNoCandidate, id, "every sibling caption is also flagged"});
      log_issue(result.issues.back());
      continue;
    }
    result.snapshot.actions.push_back(
        {result.snapshot.epoch, ReplaceCapAction{id, sample.caption_id, *replacement}});
  }
  result.snapshot.dataset = replay_actions(from.dataset, result.snapshot.actions);
  return result;
}

CurationResult apply_replace_img(const DatasetSnapshot& from, std::span<const std::string> selection,
                                 const LossLedger& ledger, const ReplaceImgOptions& options,
                                 const GenerationContext& gen) {
  require_known(from.dataset, selection);
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (const auto& id : selection) {
    if (seen.insert(id).second) unique.push_back(id);
  }
  CurationResult result;
  result.snapshot.epoch = from.epoch + 1;
  result.snapshot.actions =
      replace_images(from.dataset, unique, &ledger, options, gen, result.snapshot.epoch, result.issues);
  result.snapshot.dataset = replay_actions(from.dataset, result.snapshot.actions);
  return result;
}

nlohmann::json to_json(const StaticMode& mode) {
  if (mode.kind == StaticMode::Kind::kPerImageCount) {
    return {{"kind", "per_image_count"}, {"captions_replaced", mode.captions_replaced}};
  }
  return {{"kind", "coin_flip"}, {"p", mode.p}};
}

StaticMode static_mode_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "per_image_count") return StaticMode::per_image_count(j.at("captions_replaced").get<std::size_t>());
  if (kind == "coin_flip") return StaticMode::coin_flip(j.at("p").get<double>());
  throw Error(ErrorCode::kInvalidArgument, "unknown static mode '" + kind + "'");
}

bool coin_flip_replaces(std::uint64_t rng_seed, std::string_view sample_id, double p) {
  return unit_interval(hash64({rng_seed, std::string_view("coin"), sample_id})) < p;
}

CurationResult apply_static_replace(const Dataset& dataset, const StaticMode& mode, const GenerationContext& gen) {
  std::vector<std::string> chosen;
  if (mode.kind == StaticMode::Kind::kPerImageCount) {
    const std::size_t k = mode.captions_replaced;
    if (k < 1 || k > 4) throw Error(ErrorCode::kInvalidArgument, "captions_replaced must be in 1..4");
    std::map<std::string, std::vector<std::string>> samples_by_caption;
    for (const auto& s : dataset.samples()) samples_by_caption[s.caption_id].push_back(s.sample_id);
    for (const auto& [image_id, captions] : dataset.captions_by_image()) {
      if (captions.size() < k + 1) {
        throw Error(ErrorCode::kInvalidArgument, "image '" + image_id + "' has " + std::to_string(captions.size()) +
                                                     " captions; PerImageCount " + std::to_string(k) + " needs " +
                                                     std::to_string(k + 1));
      }
      for (std::size_t i = 0; i < k; ++i) {
        for (const auto& sid : samples_by_caption[captions[i].caption_id]) chosen.push_back(sid);
      }
    }
  } else {
    if (!(mode.p >= 0.0 && mode.p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "coin-flip p must be in [0, 1]");
    for (const auto& s : dataset.samples()) {
      if (coin_flip_replaces(gen.rng_seed, s.sample_id, mode.p)) chosen.push_back(s.sample_id);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  CurationResult result;
  result.snapshot.epoch = 0;
  if (!chosen.empty()) {
    result.snapshot.actions = replace_images(dataset, chosen, nullptr, ReplaceImgOptions{CaptionMode::kKeepCaption, false},
                                             gen, 0, result.issues);
  }
  result.snapshot.dataset = replay_actions(dataset, result.snapshot.actions);
  return result;
}

CurationResult few_shot_augment(const Dataset& shots, std::size_t n_extra, const GenerationContext& gen) {
  CurationResult result;
  result.snapshot.epoch = 0;
  if (n_extra == 0) {
    result.snapshot.dataset = shots;
    return result;
  }
  if (shots.empty()) throw Error(ErrorCode::kInvalidArgument, "few-shot augmentation needs at least one shot");
  if (gen.generator == nullptr) throw Error(ErrorCode::kBackendUnavailable, "no image generator configured");

  const auto& samples = shots.samples();
  struct Extra {
    const Sample* source;
    const Caption* caption;
    std::string sample_id;
    std::string caption_id;
    GenerationRequest request;
  };
  std::vector<Extra> extras;
  for (std::size_t j = 0; j < n_extra; ++j) {
    const Sample& src = samples[j % samples.size()];
    const Caption& cap = shots.caption_of(src);
    const Prompt prompt =
        build_prompt(std::span<const Caption>(&cap, 1), PromptStrategy::single(0), gen.prompt.styler, nullptr);
    Extra e{&src, &cap, src.sample_id + "#aug" + std::to_string(j), cap.caption_id + "#aug" + std::to_string(j), {}};
    if (shots.find_sample(e.sample_id) != nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "augmented sample id '" + e.sample_id + "' collides");
    }
    const std::uint64_t seed = generation_seed(gen.rng_seed, e.sample_id, 0);
    e.request = GenerationRequest{prompt.text, prompt.prompt_id, seed,
                                  (gen.cache_dir / (prompt.prompt_id + "_" + hex64(seed) + ".png")).string(),
                                  src.image_id};
    extras.push_back(std::move(e));
  }

  std::vector<GenerationRequest> requests;
  for (const auto& e : extras) requests.push_back(e.request);
  const auto outcomes = gen.generator->generate(requests);
  if (outcomes.size() != requests.size()) {
    throw Error(ErrorCode::kBackendUnavailable, "generator returned the wrong number of outcomes");
  }
  for (std::size_t j = 0; j < extras.size(); ++j) {
    const auto& e = extras[j];
    if (!outcomes[j].ok) {
      result.issues.push_back({CurationIssue::Kind::kGenerationFailed, e.sample_id,
                               outcomes[j].error_code + ": " + outcomes[j].message});
      log_issue(result.issues.back());
      continue;
    }
    result.snapshot.actions.push_back(
        {0, AugmentAction{e.sample_id, e.source->sample_id, e.caption->caption_id, e.caption_id,
                          NewImage{"syn-" + hex64(e.request.seed), outcomes[j].image_uri, e.request.prompt_id,
                                   e.request.seed}}});
  }
  result.snapshot.dataset = replay_actions(shots, result.snapshot.actions);
  return result;
}

}  // namespace curette
