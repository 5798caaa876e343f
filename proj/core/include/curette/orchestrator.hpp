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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curette/backends.hpp"
#include "curette/curation.hpp"
#include "curette/dataset.hpp"
#include "curette/loss_ledger.hpp"
#include "curette/promptgen.hpp"
#include "curette/protocol.hpp"

namespace curette {

enum class PolicyKind { kRemove, kReplaceCap, kReplaceImg };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kRemove;
  SelectionRule rule = SelectionRule::top_fraction(0.01);
  CaptionMode caption_mode = CaptionMode::kKeepCaption;
  bool pin_replacements = true;
};

struct RunMode {
  enum class Kind { kDynamic, kStaticPre, kFewShot };
  Kind kind = Kind::kDynamic;
  StaticMode static_mode;    // kStaticPre
  std::size_t shots = 16;    // kFewShot: K
  std::size_t n_extra = 4;   // kFewShot
};

struct RunConfig {
  int epochs = 5;
  PolicyConfig policy;
  RunMode mode;
  /// role -> backend command. Roles: loss, generator, captioner, embedder,
  /// scorer. "builtin:<name>" selects an in-process synthetic backend.
  std::map<std::string, std::string> backends;
  std::filesystem::path snapshot_dir;
  std::uint64_t rng_seed = 0;
  PromptSpec prompt;
  /// Generated images land here; defaults to <snapshot_dir>/generated.
  std::optional<std::filesystem::path> cache_dir;
  SyntheticLossConfig synthetic;  // builtin:synthetic-loss (its seed is rng_seed)
  protocol::ClientOptions client;
  /// Stop after sealing this epoch (simulates an interruption). Not part of
  /// the config hash.
  std::optional<int> stop_after;

  std::filesystem::path effective_cache_dir() const;
};

/// snapshot_dir and stop_after are run-local and never serialized here.
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
/// sha256 of the serialized config; resume refuses a different hash.
std::string config_hash(const RunConfig& config);

struct Backends {
  std::shared_ptr<LossOracle> loss;
  std::shared_ptr<ImageGenerator> generator;
  std::shared_ptr<Captioner> captioner;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<PairScorer> scorer;
};

struct BackendContext {
  const Dataset* dataset = nullptr;  // universe for the synthetic oracle, lookups for identity/echo
  std::uint64_t rng_seed = 0;
  SyntheticLossConfig synthetic;
  PromptSpec prompt;                 // echo captioner: prompt_id -> first caption
  protocol::ClientOptions client;
};

/// Command for `role`: CURETTE_BACKEND_CMD_<ROLE> beats the configured value,
/// which beats CURETTE_BACKEND_CMD. Empty when none is set.
std::string resolve_backend_command(const std::string& role, const std::map<std::string, std::string>& configured);

/// Builds every role that has a command. Builtins: synthetic-loss, stub,
/// identity, failing, echo, constant:<text>, bow, hash-scorer. Anything else
/// is a shell command speaking curette/1; roles sharing a command share one
/// process, and a role the process does not advertise is left empty.
Backends make_backends(const std::map<std::string, std::string>& configured, const BackendContext& context);

struct RunResult {
  std::vector<DatasetSnapshot> snapshots;  // index == epoch
  LossLedger ledger;
  std::vector<std::vector<CurationIssue>> issues;  // per epoch
  bool completed = false;
  nlohmann::json report;  // null unless completed
};

/// Runs the epoch loop and persists every epoch under config.snapshot_dir:
///   run.json, source.json, epoch_NNNN.json (+ .actions.json),
///   epoch_NNNN.ledger.ndjson, epoch_NNNN.histogram.csv, epoch_NNNN.sealed,
///   and after the last epoch loss_distribution.csv and report.json.
/// The directory must not already hold a run.
RunResult run(const RunConfig& config, const Dataset& dataset, Backends& backends);

/// Continues a persisted run from its highest sealed epoch. Throws
/// CorruptState on a missing/empty dir, a config hash mismatch, or artifacts
/// that do not replay.
RunResult resume(const RunConfig& config, Backends& backends);

/// The input dataset persisted by run() (source.json).
Dataset load_run_source(const std::filesystem::path& snapshot_dir);

/// Deterministic few-shot subset: the K samples with the smallest
/// hash64(seed, "shot", sample_id).
Dataset select_shots(const Dataset& dataset, std::size_t k, std::uint64_t seed);

std::string epoch_stem(int epoch);

}  // namespace curette
