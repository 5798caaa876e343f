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

#include <doctest.h>

#include <random>
#include <tuple>

#include "curette/curation.hpp"
#include "curette/hash.hpp"
#include "../oracle/frozen_values.hpp"
#include "../support/fixtures.hpp"
#include "test_support.hpp"

using namespace curette;
using testing_support::code_of;

namespace {

LossLedger ledger_for(const Dataset& d, const std::map<std::string, double>& losses, int epoch = 1) {
  LossLedger ledger;
  std::vector<LossRecord> recs;
  for (const auto& s : d.samples()) {
    const auto it = losses.find(s.sample_id);
    recs.push_back({s.sample_id, epoch, it == losses.end() ? 1.0 : it->second});
  }
  ledger.record_epoch(std::move(recs), epoch);
  return ledger;
}

GenerationContext stub_context(StubGenerator& gen, const fixtures::TempDir& dir, std::uint64_t seed = 1) {
  GenerationContext ctx;
  ctx.generator = &gen;
  ctx.cache_dir = dir.path() / "gen";
  ctx.rng_seed = seed;
  return ctx;
}

std::size_t synthesized_samples(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& s : d.samples()) n += d.image_of(s).provenance.is_synthesized();
  return n;
}

// Image "I" with five captions; c1 is 12 tokens, c3 is 8.
Dataset replace_cap_corpus() {
  Dataset::Parts parts;
  parts.derive_samples = true;
  parts.images["I"] = ImageAsset{"I", "/I.jpg", {}};
  parts.captions_by_image["I"] = {
      Caption::make("c1", "one two three four five six seven eight nine ten eleven twelve"),
      Caption::make("c2", "a flagged caption"),
      Caption::make("c3", "one two three four five six seven eight"),
      Caption::make("c4", "short"),
      Caption::make("c5", "also short"),
  };
  parts.images["J"] = ImageAsset{"J", "/J.jpg", {}};
  parts.captions_by_image["J"] = {Caption::make("j1", "lonely caption")};
  return Dataset::from_parts(parts);
}

}  // namespace

TEST_CASE("remove") {
  const auto d = fixtures::grid_corpus(2, 5, 1);
  DatasetSnapshot snap{0, d, {}};
  const std::vector<std::string> sel{"s3"};
  const auto r = apply_remove(snap, sel);
  CHECK(r.snapshot.epoch == 1);
  CHECK(r.snapshot.dataset.sample_count() == 9);
  CHECK(!r.snapshot.dataset.find_sample("s3"));
  CHECK(!r.snapshot.dataset.find_caption("s3"));
  REQUIRE(r.snapshot.actions.size() == 1);
  CHECK(std::get<RemoveAction>(r.snapshot.actions[0].kind).sample_id == "s3");

  const std::vector<std::string> whole{"s0", "s1", "s2", "s3", "s4"};
  const auto gone = apply_remove(snap, whole);
  CHECK(!gone.snapshot.dataset.find_image("img0"));
  CHECK(gone.snapshot.dataset.image_count() == 1);

  const std::vector<std::string> unknown{"zz"};
  CHECK(code_of([&] { apply_remove(snap, unknown); }) == ErrorCode::kUnknownSample);
}

TEST_CASE("remove 1% of 155k") {
  const auto d = fixtures::grid_corpus(31000, 5, 6, 2);
  REQUIRE(d.sample_count() == 155000);
  std::map<std::string, double> losses;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& s : d.samples()) losses[s.sample_id] = u(rng);
  const auto ledger = ledger_for(d, losses);
  const auto sel = ledger.select_difficult(1, SelectionRule::top_fraction(0.01));
  CHECK(sel.size() == 1550);
  const auto r = apply_remove(DatasetSnapshot{0, d, {}}, sel);
  CHECK(r.snapshot.dataset.sample_count() == 155000 - 1550);
}

TEST_CASE("replace_cap picks the lowest-loss, then shortest sibling") {
  const auto d = replace_cap_corpus();
  const std::map<std::string, double> losses{{"c1", 0.4}, {"c2", 3.0}, {"c3", 0.4}, {"c4", 0.7}, {"c5", 0.9}};
  const auto ledger = ledger_for(d, losses);

  // exhaustive oracle over the four siblings: (loss, tokens, list index)
  std::tuple<double, std::size_t, std::size_t, std::string> best{1e9, 0, 0, ""};
  const auto& caps = d.captions_of("I");
  for (std::size_t i = 0; i < caps.size(); ++i) {
    if (caps[i].caption_id == "c2") continue;
    const std::tuple<double, std::size_t, std::size_t, std::string> t{losses.at(caps[i].caption_id),
                                                                      caps[i].token_count, i, caps[i].caption_id};
    if (t < best) best = t;
  }
  CHECK(std::get<3>(best) == "c3");

  const std::vector<std::string> sel{"c2"};
  const auto r = apply_replace_cap(DatasetSnapshot{0, d, {}}, sel, ledger);
  const auto* s = r.snapshot.dataset.find_sample("c2");
  REQUIRE(s);
  CHECK(s->caption_id == std::get<3>(best));
  CHECK(s->image_id == "I");
  CHECK(r.snapshot.dataset.sample_count() == d.sample_count());
  CHECK(r.snapshot.dataset.image_count() == d.image_count());
  REQUIRE(r.snapshot.actions.size() == 1);
  const auto& a = std::get<ReplaceCapAction>(r.snapshot.actions[0].kind);
  CHECK(a.old_caption_id == "c2");
  CHECK(a.new_caption_id == "c3");
  CHECK(!r.snapshot.dataset.find_caption("c2"));  // no sample references it any more
}

TEST_CASE("replace_cap skips single-caption images") {
  const auto d = replace_cap_corpus();
  const auto ledger = ledger_for(d, {});
  const std::vector<std::string> sel{"j1"};
  const auto r = apply_replace_cap(DatasetSnapshot{0, d, {}}, sel, ledger);
  CHECK(r.snapshot.dataset == d);
  CHECK(r.snapshot.actions.empty());
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].kind == CurationIssue::Kind::kSingleCaption);
  CHECK(r.issues[0].sample_id == "j1");
}

TEST_CASE("replace_img keep caption") {
  fixtures::TempDir dir("replimg");
  StubGenerator gen;
  const auto d = fixtures::grid_corpus(3, 5, 2);
  const auto ledger = ledger_for(d, {});
  const std::vector<std::string> sel{"s01"};
  const auto r = apply_replace_img(DatasetSnapshot{0, d, {}}, sel, ledger, {}, stub_context(gen, dir));
  const auto* s = r.snapshot.dataset.find_sample("s01");
  REQUIRE(s);
  CHECK(s->image_id != "img0");
  CHECK(s->caption_id == "s01");
  const auto& img = r.snapshot.dataset.image_of(*s);
  CHECK(img.provenance.is_synthesized());
  CHECK(img.provenance.seed == generation_seed(1, "s01", 1));
  CHECK(std::filesystem::file_size(img.uri) > 0);
  CHECK(r.snapshot.dataset.sample_count() == d.sample_count());
  CHECK(r.snapshot.dataset.image_count() == d.image_count() + 1);
  CHECK(replay_actions(d, r.snapshot.actions) == r.snapshot.dataset);

  // pinned: an already-synthesized sample is not replaced again
  const auto ledger2 = ledger_for(r.snapshot.dataset, {}, 2);
  const auto again = apply_replace_img(r.snapshot, sel, ledger2, {}, stub_context(gen, dir));
  CHECK(again.snapshot.actions.empty());
  REQUIRE(again.issues.size() == 1);
  CHECK(again.issues[0].kind == CurationIssue::Kind::kPinned);
  // ...but can still be removed
  CHECK(apply_remove(r.snapshot, sel).snapshot.dataset.sample_count() == d.sample_count() - 1);
}

TEST_CASE("replace_img repartner caption") {
  fixtures::TempDir dir("repartner");
  StubGenerator gen;
  const auto d = replace_cap_corpus();
  const auto ledger = ledger_for(d, {{"c1", 0.4}, {"c2", 3.0}, {"c3", 0.4}, {"c4", 0.7}, {"c5", 0.9}});
  const std::vector<std::string> sel{"c2"};
  ReplaceImgOptions opts;
  opts.caption_mode = CaptionMode::kRepartnerCaption;
  const auto r = apply_replace_img(DatasetSnapshot{0, d, {}}, sel, ledger, opts, stub_context(gen, dir));
  const auto* s = r.snapshot.dataset.find_sample("c2");
  REQUIRE(s);
  CHECK(s->image_id != "I");
  CHECK(r.snapshot.dataset.caption_of(*s).text == d.find_caption("c3")->text);
  CHECK(r.snapshot.dataset.sample_count() == d.sample_count());
  CHECK(replay_actions(d, r.snapshot.actions) == r.snapshot.dataset);
}

TEST_CASE("failing generator leaves the snapshot untouched") {
  fixtures::TempDir dir("failing");
  FailingGenerator gen;
  const auto d = fixtures::grid_corpus(2, 3, 2);
  const auto ledger = ledger_for(d, {});
  GenerationContext ctx;
  ctx.generator = &gen;
  ctx.cache_dir = dir.path();
  const std::vector<std::string> sel{"s00", "s04"};
  const auto r = apply_replace_img(DatasetSnapshot{0, d, {}}, sel, ledger, {}, ctx);
  CHECK(r.snapshot.dataset == d);
  CHECK(r.snapshot.actions.empty());
  REQUIRE(r.issues.size() == 2);
  for (const auto& i : r.issues) CHECK(i.kind == CurationIssue::Kind::kGenerationFailed);

  GenerationContext none;
  CHECK(code_of([&] { apply_replace_img(DatasetSnapshot{0, d, {}}, sel, ledger, {}, none); }) ==
        ErrorCode::kBackendUnavailable);
}

TEST_CASE("static replace per image count") {
  fixtures::TempDir dir("static");
  StubGenerator gen;
  const auto d = fixtures::grid_corpus(10, 5, 3, 3);
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto r = apply_static_replace(d, StaticMode::per_image_count(k), stub_context(gen, dir));
    CHECK(r.snapshot.epoch == 0);
    CHECK(synthesized_samples(r.snapshot.dataset) == k * 10);
    CHECK(r.snapshot.dataset.sample_count() == 50);
    // the first k captions of every image are the ones replaced
    for (const auto& [image_id, caps] : d.captions_by_image()) {
      for (std::size_t j = 0; j < caps.size(); ++j) {
        const auto* s = r.snapshot.dataset.find_sample(caps[j].caption_id);
        CHECK(r.snapshot.dataset.image_of(*s).provenance.is_synthesized() == (j < k));
      }
    }
  }
  CHECK(code_of([&] { apply_static_replace(d, StaticMode::per_image_count(5), stub_context(gen, dir)); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] {
          apply_static_replace(fixtures::grid_corpus(2, 2, 2), StaticMode::per_image_count(2), stub_context(gen, dir));
        }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { apply_static_replace(d, StaticMode::coin_flip(1.5), stub_context(gen, dir)); }) ==
        ErrorCode::kInvalidArgument);
  const auto zero = apply_static_replace(d, StaticMode::coin_flip(0.0), stub_context(gen, dir));
  CHECK(zero.snapshot.dataset == d);
  CHECK(zero.snapshot.actions.empty());
}

TEST_CASE("coin flip count matches the independent derivation") {
  std::size_t replaced = 0;
  for (std::size_t i = 0; i < frozen::kCoinSamples; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%05zu", i);
    replaced += coin_flip_replaces(frozen::kCoinSeed, id, 0.5);
  }
  CHECK(replaced == frozen::kCoinReplaced);
}

TEST_CASE("few-shot augmentation") {
  fixtures::TempDir dir("fewshot");
  StubGenerator gen;
  auto ctx = stub_context(gen, dir);
  const auto shots = fixtures::grid_corpus(16, 1, 2);
  const auto r = few_shot_augment(shots, 4, ctx);
  CHECK(r.snapshot.dataset.sample_count() == 20);
  CHECK(few_shot_augment(shots, 0, ctx).snapshot.dataset == shots);

  const auto doubled = few_shot_augment(shots, 16, ctx);
  CHECK(doubled.snapshot.dataset.sample_count() == 32);
  std::map<std::string, int> uses;
  for (const auto& a : doubled.snapshot.actions) {
    const auto& aug = std::get<AugmentAction>(a.kind);
    ++uses[aug.source_sample_id];
    const auto* s = doubled.snapshot.dataset.find_sample(aug.sample_id);
    CHECK(doubled.snapshot.dataset.caption_of(*s).text == shots.find_caption(aug.source_caption_id)->text);
    CHECK(read_png_text(doubled.snapshot.dataset.image_of(*s).uri).at("prompt").rfind(
              shots.find_caption(aug.source_caption_id)->text, 0) == 0);
  }
  CHECK(uses.size() == 16);
  for (const auto& [_, n] : uses) CHECK(n == 1);
  std::map<std::string, int> texts;
  for (const auto& s : doubled.snapshot.dataset.samples()) ++texts[doubled.snapshot.dataset.caption_of(s).text];
  for (const auto& [_, n] : texts) CHECK(n == 2);
  CHECK(replay_actions(shots, doubled.snapshot.actions) == doubled.snapshot.dataset);
}

TEST_CASE("snapshot save and load") {
  fixtures::TempDir dir("snap");
  const auto d = fixtures::grid_corpus(3, 2, 2);
  const std::vector<std::string> sel{"s02"};
  const auto r = apply_remove(DatasetSnapshot{0, d, {}}, sel);
  save_snapshot(r.snapshot, dir / "epoch_0001.json");
  CHECK(std::filesystem::exists(actions_path_for(dir / "epoch_0001.json")));
  const auto back = load_snapshot(dir / "epoch_0001.json");
  CHECK(back == r.snapshot);
  CHECK(back.actions.size() == 1);
  CHECK(code_of([&] { load_snapshot(dir / "missing.json"); }) == ErrorCode::kIoError);
}

TEST_CASE("action json round trip") {
  fixtures::TempDir dir("actions");
  StubGenerator gen;
  const auto d = fixtures::grid_corpus(4, 3, 2);
  const auto ledger = ledger_for(d, {});
  const std::vector<std::string> sel{"s00", "s05"};
  ReplaceImgOptions opts;
  opts.caption_mode = CaptionMode::kRepartnerCaption;
  std::vector<CurationAction> all;
  for (const auto& a : apply_replace_img(DatasetSnapshot{0, d, {}}, sel, ledger, opts, stub_context(gen, dir)).snapshot.actions)
    all.push_back(a);
  for (const auto& a : apply_replace_cap(DatasetSnapshot{0, d, {}}, sel, ledger).snapshot.actions) all.push_back(a);
  for (const auto& a : apply_remove(DatasetSnapshot{0, d, {}}, sel).snapshot.actions) all.push_back(a);
  for (const auto& a : few_shot_augment(d, 2, stub_context(gen, dir)).snapshot.actions) all.push_back(a);
  CHECK(actions_from_json(actions_to_json(all)) == all);
  CHECK(code_of([] { action_from_json({{"epoch", 1}, {"kind", "teleport"}}); }) == ErrorCode::kSchemaError);
}

TEST_CASE("replay rejects logs that do not fit") {
  const auto d = fixtures::grid_corpus(2, 2, 2);
  std::vector<CurationAction> log{{1, RemoveAction{"nope"}}};
  CHECK(code_of([&] { replay_actions(d, log); }) == ErrorCode::kUnknownSample);
  CHECK(replay_actions(d, {}) == d);
}

TEST_CASE("cardinality contracts on random corpora") {
  fixtures::TempDir dir("cardinality");
  StubGenerator gen;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const auto d = fixtures::random_corpus(rng, {});
    std::map<std::string, double> losses;
    std::uniform_real_distribution<double> u(0, 2);
    for (const auto& s : d.samples()) losses[s.sample_id] = u(rng);
    const auto ledger = ledger_for(d, losses);
    const auto sel = ledger.select_difficult(1, SelectionRule::top_fraction(0.3));
    const DatasetSnapshot snap{0, d, {}};

    const auto rm = apply_remove(snap, sel);
    CHECK(rm.snapshot.dataset.sample_count() == d.sample_count() - sel.size());
    for (const auto& id : sel) CHECK(!rm.snapshot.dataset.find_sample(id));

    const auto rc = apply_replace_cap(snap, sel, ledger);
    CHECK(rc.snapshot.dataset.sample_count() == d.sample_count());
    CHECK(rc.snapshot.dataset.image_count() == d.image_count());
    CHECK(rc.snapshot.actions.size() + rc.issues.size() == sel.size());
    CHECK(replay_actions(d, rc.snapshot.actions) == rc.snapshot.dataset);

    const auto ri = apply_replace_img(snap, sel, ledger, {}, stub_context(gen, dir, trial));
    CHECK(ri.snapshot.dataset.sample_count() == d.sample_count());
    CHECK(ri.snapshot.actions.size() == sel.size());
    CHECK(replay_actions(d, ri.snapshot.actions) == ri.snapshot.dataset);
  }
}
