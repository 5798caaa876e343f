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

#include <cstdlib>

#include "curette/hash.hpp"
#include "curette/orchestrator.hpp"
#include "../support/fixtures.hpp"
#include "test_support.hpp"

using namespace curette;
using testing_support::code_of;

namespace {

PolicyConfig remove_2sigma() {
  PolicyConfig p;
  p.kind = PolicyKind::kRemove;
  p.rule = SelectionRule::sigma_threshold(2.0);
  return p;
}

}  // namespace

TEST_CASE("config json round trip and hash") {
  fixtures::TempDir dir("cfg");
  auto h = fixtures::synthetic_harness(dir / "run", 3, remove_2sigma());
  h.config.mode.kind = RunMode::Kind::kStaticPre;
  h.config.mode.static_mode = StaticMode::coin_flip(0.3);
  h.config.cache_dir = dir / "cache";
  const auto back = run_config_from_json(to_json(h.config));
  CHECK(to_json(back) == to_json(h.config));
  CHECK(config_hash(back) == config_hash(h.config));
  // run-local fields never change the hash
  auto moved = h.config;
  moved.snapshot_dir = "/elsewhere";
  moved.stop_after = 1;
  CHECK(config_hash(moved) == config_hash(h.config));
  auto other = h.config;
  other.rng_seed = 43;
  CHECK(config_hash(other) != config_hash(h.config));
  CHECK(h.config.effective_cache_dir() == dir / "cache");
  CHECK(RunConfig{.snapshot_dir = "/r"}.effective_cache_dir() == std::filesystem::path("/r/generated"));
}

TEST_CASE("backend command resolution") {
  const std::map<std::string, std::string> configured{{"loss", "configured-loss"}};
  ::unsetenv("CURETTE_BACKEND_CMD");
  ::unsetenv("CURETTE_BACKEND_CMD_LOSS");
  CHECK(resolve_backend_command("loss", configured) == "configured-loss");
  CHECK(resolve_backend_command("generator", configured).empty());
  ::setenv("CURETTE_BACKEND_CMD", "shared", 1);
  CHECK(resolve_backend_command("generator", configured) == "shared");
  CHECK(resolve_backend_command("loss", configured) == "configured-loss");
  ::setenv("CURETTE_BACKEND_CMD_LOSS", "override", 1);
  CHECK(resolve_backend_command("loss", configured) == "override");
  ::unsetenv("CURETTE_BACKEND_CMD");
  ::unsetenv("CURETTE_BACKEND_CMD_LOSS");

  BackendContext ctx;
  CHECK(code_of([&] { make_backends({{"generator", "builtin:nope"}}, ctx); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("remove at 2 sigma cleans the noisy set") {
  fixtures::TempDir dir("remove");
  auto h = fixtures::synthetic_harness(dir / "run", 3, remove_2sigma());
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  const auto r = run(h.config, h.dataset, backends);
  REQUIRE(r.completed);
  REQUIRE(r.snapshots.size() == 4);
  const auto& noisy = static_cast<SyntheticLossOracle&>(*backends.loss).noisy_samples();
  CHECK(noisy.size() == 50);
  std::size_t survivors = 0;
  for (const auto& id : noisy) survivors += r.snapshots.back().dataset.find_sample(id) != nullptr;
  CHECK(survivors <= 5);
  for (int t = 2; t <= 3; ++t) CHECK(r.ledger.stats(t).mean < r.ledger.stats(t - 1).mean);
  // nested, decreasing sample sets
  for (int t = 1; t <= 3; ++t) {
    for (const auto& s : r.snapshots[t].dataset.samples()) CHECK(r.snapshots[t - 1].dataset.find_sample(s.sample_id));
  }
  const auto report = nlohmann::json::parse(read_file(dir / "run" / "report.json"));
  CHECK(report["epochs"].size() == 4);  // epoch 0 plus three curated epochs
  CHECK(report["final_samples"] == r.snapshots.back().dataset.sample_count());
  CHECK(report == r.report);
}

TEST_CASE("empty selection leaves the snapshot unchanged") {
  fixtures::TempDir dir("noop");
  PolicyConfig p;
  p.kind = PolicyKind::kReplaceCap;
  p.rule = SelectionRule::top_fraction(0.0);
  auto h = fixtures::synthetic_harness(dir / "run", 1, p);
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  const auto r = run(h.config, h.dataset, backends);
  CHECK(r.snapshots[1].dataset == r.snapshots[0].dataset);
  CHECK(r.snapshots[1].actions.empty());
}

TEST_CASE("static pre-pass then plain loss recording") {
  fixtures::TempDir dir("staticpre");
  auto h = fixtures::synthetic_harness(dir / "run", 2, remove_2sigma());
  h.config.mode.kind = RunMode::Kind::kStaticPre;
  h.config.mode.static_mode = StaticMode::per_image_count(2);
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  const auto r = run(h.config, h.dataset, backends);
  std::size_t synthesized = 0;
  for (const auto& s : r.snapshots[0].dataset.samples()) {
    synthesized += r.snapshots[0].dataset.image_of(s).provenance.is_synthesized();
  }
  CHECK(synthesized == 400);
  CHECK(r.snapshots[0].actions.size() == 400);
  for (int t = 1; t <= 2; ++t) {
    CHECK(r.snapshots[t].dataset == r.snapshots[0].dataset);
    CHECK(r.snapshots[t].actions.empty());
    CHECK(r.ledger.has_epoch(t));
  }
}

TEST_CASE("few-shot mode starts from K + n_extra samples") {
  fixtures::TempDir dir("fewshot");
  auto h = fixtures::synthetic_harness(dir / "run", 1, remove_2sigma());
  h.config.mode.kind = RunMode::Kind::kFewShot;
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  const auto r = run(h.config, h.dataset, backends);
  CHECK(r.snapshots[0].dataset.sample_count() == 20);
  CHECK(replay_actions(h.dataset, r.snapshots[0].actions) == r.snapshots[0].dataset);
  CHECK(select_shots(h.dataset, 16, 42) == select_shots(h.dataset, 16, 42));
  CHECK(code_of([&] { select_shots(h.dataset, 0, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("replace_img run persists replayable epochs") {
  fixtures::TempDir dir("replimg");
  PolicyConfig p;
  p.kind = PolicyKind::kReplaceImg;
  p.rule = SelectionRule::top_fraction(0.05);
  auto h = fixtures::synthetic_harness(dir / "run", 3, p);
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  const auto r = run(h.config, h.dataset, backends);
  for (int t = 1; t <= 3; ++t) {
    CHECK(r.snapshots[t].dataset.sample_count() == 1000);
    const auto loaded = load_snapshot(dir / "run" / (epoch_stem(t) + ".json"));
    CHECK(loaded == r.snapshots[t]);
    CHECK(replay_actions(r.snapshots[t - 1].dataset, loaded.actions) == loaded.dataset);
  }
}

TEST_CASE("resume matches an uninterrupted run") {
  fixtures::TempDir dir("resume");
  PolicyConfig p;
  p.kind = PolicyKind::kReplaceImg;
  p.rule = SelectionRule::sigma_threshold(1.5);
  auto full = fixtures::synthetic_harness(dir / "full", 5, p);
  full.config.cache_dir = dir / "cache";
  auto b1 = fixtures::builtin_backends(full.config, full.dataset);
  run(full.config, full.dataset, b1);

  auto part = full;
  part.config.snapshot_dir = dir / "part";
  part.config.stop_after = 2;
  auto b2 = fixtures::builtin_backends(part.config, part.dataset);
  const auto stopped = run(part.config, part.dataset, b2);
  CHECK(!stopped.completed);
  CHECK(stopped.snapshots.size() == 3);
  CHECK(!std::filesystem::exists(dir / "part" / "report.json"));

  part.config.stop_after.reset();
  auto b3 = fixtures::builtin_backends(part.config, load_run_source(dir / "part"));
  const auto resumed = resume(part.config, b3);
  CHECK(resumed.completed);
  CHECK(fixtures::read_tree(dir / "full") == fixtures::read_tree(dir / "part"));

  // resuming a finished run just rewrites the same report
  auto b4 = fixtures::builtin_backends(part.config, load_run_source(dir / "part"));
  CHECK(resume(part.config, b4).report == resumed.report);
}

TEST_CASE("resume refusals") {
  fixtures::TempDir dir("refuse");
  auto h = fixtures::synthetic_harness(dir / "run", 2, remove_2sigma());
  auto backends = fixtures::builtin_backends(h.config, h.dataset);
  h.config.stop_after = 1;
  run(h.config, h.dataset, backends);
  h.config.stop_after.reset();

  auto changed = h.config;
  changed.epochs = 4;
  CHECK(code_of([&] { resume(changed, backends); }) == ErrorCode::kCorruptState);

  auto empty = h.config;
  empty.snapshot_dir = dir / "empty";
  std::filesystem::create_directories(empty.snapshot_dir);
  CHECK(code_of([&] { resume(empty, backends); }) == ErrorCode::kCorruptState);

  // a tampered snapshot no longer matches its action log
  const auto snap1 = dir / "run" / (epoch_stem(1) + ".json");
  auto j = nlohmann::json::parse(read_file(snap1));
  j["images"].erase(j["images"].begin());
  write_file_atomic(snap1, j.dump());
  CHECK(code_of([&] { resume(h.config, backends); }) == ErrorCode::kCorruptState);

  CHECK(code_of([&] { run(h.config, h.dataset, backends); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("dead loss backend aborts with the last snapshot intact") {
  fixtures::TempDir dir("dead");
  auto h = fixtures::synthetic_harness(dir / "run", 2, remove_2sigma());
  h.config.backends["loss"] = "exit 0";
  CHECK(code_of([&] { fixtures::builtin_backends(h.config, h.dataset); }) == ErrorCode::kBackendUnavailable);

  Backends none;
  CHECK(code_of([&] { run(h.config, h.dataset, none); }) == ErrorCode::kBackendUnavailable);
  CHECK(std::filesystem::exists(dir / "run" / (epoch_stem(0) + ".sealed")));
  CHECK(!std::filesystem::exists(dir / "run" / (epoch_stem(1) + ".sealed")));
}
