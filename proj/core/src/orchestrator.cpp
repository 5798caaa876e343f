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

#include "curette/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>

#include <spdlog/spdlog.h>

#include "curette/error.hpp"
#include "curette/hash.hpp"

namespace curette {
namespace fs = std::filesystem;

namespace {

constexpr const char* kRoles[] = {"loss", "generator", "captioner", "embedder", "scorer"};

std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kRemove: return "remove";
    case PolicyKind::kReplaceCap: return "replace_cap";
    case PolicyKind::kReplaceImg: return "replace_img";
  }
  return "remove";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "remove") return PolicyKind::kRemove;
  if (name == "replace_cap") return PolicyKind::kReplaceCap;
  if (name == "replace_img") return PolicyKind::kReplaceImg;
  throw Error(ErrorCode::kInvalidArgument, "unknown policy '" + name + "'");
}

nlohmann::json gaussian_json(const Gaussian& g) { return {{"mean", g.mean}, {"std", g.stddev}}; }

Gaussian gaussian_from(const nlohmann::json& j, Gaussian fallback) {
  return {j.value("mean", fallback.mean), j.value("std", fallback.stddev)};
}

nlohmann::json stats_json(const EpochStats& s) {
  return {{"epoch", s.epoch}, {"mean", s.mean}, {"std", s.stddev}, {"count", s.count}, {"max", s.max}};
}

std::string histogram_csv(const EpochStats& s) {
  std::string out = "epoch,bin_low,bin_high,count\n";
  char buf[128];
  for (const auto& b : s.histogram) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%zu\n", s.epoch, b.low, b.high, b.count);
    out += buf;
  }
  return out;
}

nlohmann::json issues_json(const std::vector<CurationIssue>& issues) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& i : issues) {
    out.push_back({{"kind", to_string(i.kind)}, {"sample_id", i.sample_id}, {"message", i.message}});
  }
  return out;
}

std::vector<CurationIssue> issues_from_json(const nlohmann::json& j) {
  static const std::map<std::string, CurationIssue::Kind> kinds{
      {"SkippedSingleCaption", CurationIssue::Kind::kSingleCaption},
      {"SkippedNoCandidate", CurationIssue::Kind::kNoCandidate},
      {"SkippedPinned", CurationIssue::Kind::kPinned},
      {"GenerationFailed", CurationIssue::Kind::kGenerationFailed}};
  std::vector<CurationIssue> out;
  for (const auto& i : j) {
    const auto kind = kinds.find(i.at("kind").get<std::string>());
    if (kind == kinds.end()) throw Error(ErrorCode::kCorruptState, "unknown issue kind in sealed marker");
    out.push_back({kind->second, i.at("sample_id").get<std::string>(), i.at("message").get<std::string>()});
  }
  return out;
}

std::string action_kind(const CurationAction& a) {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RemoveAction>) return "remove";
        if constexpr (std::is_same_v<T, ReplaceCapAction>) return "replace_cap";
        if constexpr (std::is_same_v<T, ReplaceImgAction>) return "replace_img";
        return "augment";
      },
      a.kind);
}

std::vector<LossQuery> queries_for(const Dataset& d) {
  std::vector<LossQuery> out;
  out.reserve(d.sample_count());
  for (const auto& s : d.samples()) out.push_back({s.sample_id, d.image_of(s).uri, d.caption_of(s).text});
  return out;
}

// Final report assembled purely from persisted state so that resumed and
// uninterrupted runs produce the same bytes.
nlohmann::json build_report(const RunConfig& config, const RunResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  std::map<std::string, std::size_t> cumulative{{"remove", 0}, {"replace_cap", 0}, {"replace_img", 0}, {"augment", 0}};
  std::map<std::string, std::size_t> issue_totals;
  for (std::size_t t = 0; t < r.snapshots.size(); ++t) {
    std::map<std::string, std::size_t> counts;
    for (const auto& a : r.snapshots[t].actions) {
      ++counts[action_kind(a)];
      ++cumulative[action_kind(a)];
    }
    for (const auto& i : r.issues[t]) ++issue_totals[std::string(to_string(i.kind))];
    nlohmann::json e{{"epoch", t},
                     {"samples", r.snapshots[t].dataset.sample_count()},
                     {"images", r.snapshots[t].dataset.image_count()},
                     {"actions", counts},
                     {"issues", r.issues[t].size()}};
    if (t > 0) {
      const auto& stats = r.ledger.stats(static_cast<int>(t));
      e["loss"] = stats_json(stats);
      e["above_2sigma"] = r.ledger.count_above_sigma(static_cast<int>(t), 2.0);
    }
    epochs.push_back(std::move(e));
  }
  return {{"config", to_json(config)},
          {"config_hash", config_hash(config)},
          {"epochs", epochs},
          {"cumulative_actions", cumulative},
          {"issues", issue_totals},
          {"final_samples", r.snapshots.back().dataset.sample_count()},
          {"loss_distribution", "loss_distribution.csv"}};
}

class RunDir {
 public:
  explicit RunDir(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) const { return dir_ / name; }
  fs::path snapshot(int t) const { return path(epoch_stem(t) + ".json"); }
  fs::path sealed(int t) const { return path(epoch_stem(t) + ".sealed"); }

  void persist_epoch(int t, const DatasetSnapshot& snap, const LossLedger& ledger,
                     const std::vector<CurationIssue>& issues) const {
    save_snapshot(snap, snapshot(t));
    if (ledger.has_epoch(t)) {
      write_file_atomic(path(epoch_stem(t) + ".ledger.ndjson"), ledger.to_ndjson(t));
      write_file_atomic(path(epoch_stem(t) + ".histogram.csv"), histogram_csv(ledger.stats(t)));
    }
    const nlohmann::json marker{{"epoch", t}, {"samples", snap.dataset.sample_count()}, {"issues", issues_json(issues)}};
    write_file_atomic(sealed(t), marker.dump() + "\n");
  }

  void finish(const RunConfig& config, RunResult& r) const {
    std::vector<int> epochs = r.ledger.epochs();
    write_file_atomic(path("loss_distribution.csv"), r.ledger.export_loss_distribution(epochs));
    r.report = build_report(config, r);
    write_file_atomic(path("report.json"), r.report.dump(2) + "\n");
    r.completed = true;
  }

 private:
  fs::path dir_;
};

// Epochs first..T of the loop, starting from r.snapshots.back().
void run_epochs(const RunConfig& config, Backends& backends, RunResult& r, int first) {
  const RunDir dir(config.snapshot_dir);
  if (!backends.loss) throw Error(ErrorCode::kBackendUnavailable, "no loss backend configured");
  GenerationContext gen{backends.generator.get(), backends.embedder.get(), config.prompt,
                        config.effective_cache_dir(), config.rng_seed, true};

  for (int t = first; t <= config.epochs; ++t) {
    const DatasetSnapshot& prev = r.snapshots.back();
    if (prev.dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "epoch " + std::to_string(t) + ": no samples left");
    const auto queries = queries_for(prev.dataset);
    const auto losses = backends.loss->loss_batch(t - 1, queries);
    if (losses.size() != queries.size()) {
      throw Error(ErrorCode::kBackendUnavailable, "loss backend returned the wrong number of losses");
    }
    std::vector<LossRecord> records;
    records.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) records.push_back({queries[i].sample_id, t, losses[i]});

    CurationResult step;
    try {
      r.ledger.record_epoch(std::move(records), t, std::span<const Sample>(prev.dataset.samples()));
      if (config.mode.kind != RunMode::Kind::kDynamic) {
        step.snapshot = {t, prev.dataset, {}};
      } else {
        const auto selection = r.ledger.select_difficult(t, config.policy.rule);
        switch (config.policy.kind) {
          case PolicyKind::kRemove: step = apply_remove(prev, selection); break;
          case PolicyKind::kReplaceCap: step = apply_replace_cap(prev, selection, r.ledger); break;
          case PolicyKind::kReplaceImg:
            step = apply_replace_img(prev, selection, r.ledger,
                                     {config.policy.caption_mode, config.policy.pin_replacements}, gen);
            break;
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kBackendUnavailable) throw;
      throw Error(e.code(), "epoch " + std::to_string(t) + ": " + e.detail());
    }
    spdlog::info("epoch {}: mean loss {:.4f}, {} actions, {} samples", t, r.ledger.stats(t).mean,
                 step.snapshot.actions.size(), step.snapshot.dataset.sample_count());
    dir.persist_epoch(t, step.snapshot, r.ledger, step.issues);
    r.snapshots.push_back(std::move(step.snapshot));
    r.issues.push_back(std::move(step.issues));
    if (config.stop_after && t == *config.stop_after && t < config.epochs) {
      spdlog::info("stopping after epoch {}", t);
      return;
    }
  }
  dir.finish(config, r);
}

}  // namespace

fs::path RunConfig::effective_cache_dir() const { return cache_dir ? *cache_dir : snapshot_dir / "generated"; }

std::string epoch_stem(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
  return buf;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json mode;
  switch (c.mode.kind) {
    case RunMode::Kind::kDynamic: mode = {{"kind", "dynamic"}}; break;
    case RunMode::Kind::kStaticPre: mode = {{"kind", "static_pre"}, {"static", to_json(c.mode.static_mode)}}; break;
    case RunMode::Kind::kFewShot: mode = {{"kind", "few_shot"}, {"shots", c.mode.shots}, {"n_extra", c.mode.n_extra}}; break;
  }
  nlohmann::json j{
      {"epochs", c.epochs},
      {"policy",
       {{"kind", policy_name(c.policy.kind)},
        {"rule", to_json(c.policy.rule)},
        {"caption_mode", c.policy.caption_mode == CaptionMode::kKeepCaption ? "keep" : "repartner"},
        {"pin_replacements", c.policy.pin_replacements}}},
      {"mode", mode},
      {"backends", c.backends},
      {"rng_seed", c.rng_seed},
      {"prompt", to_json(c.prompt)},
      {"synthetic",
       {{"noisy_fraction", c.synthetic.noisy_fraction},
        {"clean", gaussian_json(c.synthetic.clean)},
        {"noisy", gaussian_json(c.synthetic.noisy)},
        {"decay", c.synthetic.decay}}},
      {"client",
       {{"batch_size", c.client.batch_size},
        {"max_in_flight", c.client.max_in_flight},
        {"retries", c.client.retries},
        {"generate_timeout_ms", c.client.generate_timeout.count()},
        {"timeout_ms", c.client.default_timeout.count()}}}};
  j["cache_dir"] = c.cache_dir ? nlohmann::json(c.cache_dir->string()) : nlohmann::json(nullptr);
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    if (c.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      c.policy.kind = parse_policy(p.value("kind", std::string("remove")));
      if (p.contains("rule")) c.policy.rule = selection_rule_from_json(p.at("rule"));
      const std::string mode = p.value("caption_mode", std::string("keep"));
      if (mode != "keep" && mode != "repartner") throw Error(ErrorCode::kInvalidArgument, "unknown caption_mode '" + mode + "'");
      c.policy.caption_mode = mode == "keep" ? CaptionMode::kKeepCaption : CaptionMode::kRepartnerCaption;
      c.policy.pin_replacements = p.value("pin_replacements", true);
    }
    if (j.contains("mode")) {
      const auto& m = j.at("mode");
      const std::string kind = m.value("kind", std::string("dynamic"));
      if (kind == "dynamic") {
        c.mode.kind = RunMode::Kind::kDynamic;
      } else if (kind == "static_pre") {
        c.mode.kind = RunMode::Kind::kStaticPre;
        c.mode.static_mode = static_mode_from_json(m.at("static"));
      } else if (kind == "few_shot") {
        c.mode.kind = RunMode::Kind::kFewShot;
        c.mode.shots = m.value("shots", c.mode.shots);
        c.mode.n_extra = m.value("n_extra", c.mode.n_extra);
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + kind + "'");
      }
    }
    if (j.contains("backends")) c.backends = j.at("backends").get<std::map<std::string, std::string>>();
    for (const auto& [role, _] : c.backends) {
      if (std::find(std::begin(kRoles), std::end(kRoles), role) == std::end(kRoles)) {
        throw Error(ErrorCode::kInvalidArgument, "unknown backend role '" + role + "'");
      }
    }
    if (j.contains("snapshot_dir")) c.snapshot_dir = j.at("snapshot_dir").get<std::string>();
    c.rng_seed = j.value("rng_seed", std::uint64_t{0});
    if (j.contains("prompt")) c.prompt = prompt_spec_from_json(j.at("prompt"));
    if (j.contains("cache_dir") && j.at("cache_dir").is_string()) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      c.synthetic.noisy_fraction = s.value("noisy_fraction", c.synthetic.noisy_fraction);
      if (s.contains("clean")) c.synthetic.clean = gaussian_from(s.at("clean"), c.synthetic.clean);
      if (s.contains("noisy")) c.synthetic.noisy = gaussian_from(s.at("noisy"), c.synthetic.noisy);
      c.synthetic.decay = s.value("decay", c.synthetic.decay);
    }
    if (j.contains("client")) {
      const auto& cl = j.at("client");
      c.client.batch_size = cl.value("batch_size", c.client.batch_size);
      c.client.max_in_flight = cl.value("max_in_flight", c.client.max_in_flight);
      c.client.retries = cl.value("retries", c.client.retries);
      if (c.client.retries < 0 || c.client.retries > 1) throw Error(ErrorCode::kInvalidArgument, "retries must be 0 or 1");
      c.client.generate_timeout = std::chrono::milliseconds(
          cl.value("generate_timeout_ms", static_cast<std::int64_t>(c.client.generate_timeout.count())));
      c.client.default_timeout =
          std::chrono::milliseconds(cl.value("timeout_ms", static_cast<std::int64_t>(c.client.default_timeout.count())));
    }
    if (j.contains("stop_after")) c.stop_after = j.at("stop_after").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("run config: ") + e.what());
  }
  c.synthetic.rng_seed = c.rng_seed;
  return c;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

std::string resolve_backend_command(const std::string& role, const std::map<std::string, std::string>& configured) {
  std::string var = "CURETTE_BACKEND_CMD_";
  for (const char ch : role) var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  if (const char* v = std::getenv(var.c_str()); v != nullptr && *v != '\0') return v;
  if (const auto it = configured.find(role); it != configured.end() && !it->second.empty()) return it->second;
  if (const char* v = std::getenv("CURETTE_BACKEND_CMD"); v != nullptr && *v != '\0') return v;
  return {};
}

Backends make_backends(const std::map<std::string, std::string>& configured, const BackendContext& ctx) {
  Backends b;
  std::map<std::string, std::shared_ptr<protocol::Client>> clients;
  const auto client_for = [&](const std::string& command) {
    auto& c = clients[command];
    if (!c) c = std::make_shared<protocol::Client>(std::make_unique<protocol::ProcessTransport>(command), ctx.client);
    return c;
  };
  const auto need_dataset = [&](const std::string& name) -> const Dataset& {
    if (ctx.dataset == nullptr) throw Error(ErrorCode::kInvalidArgument, name + " needs a dataset");
    return *ctx.dataset;
  };

  for (const std::string role : kRoles) {
    const std::string command = resolve_backend_command(role, configured);
    if (command.empty()) continue;
    if (command.rfind("builtin:", 0) == 0) {
      const std::string name = command.substr(8);
      const auto wrong_role = [&] {
        return Error(ErrorCode::kInvalidArgument, "builtin backend '" + name + "' cannot serve role '" + role + "'");
      };
      if (role == "loss") {
        if (name != "synthetic-loss") throw wrong_role();
        SyntheticLossConfig sc = ctx.synthetic;
        sc.rng_seed = ctx.rng_seed;
        const auto universe = queries_for(need_dataset(name));
        b.loss = std::make_shared<SyntheticLossOracle>(sc, universe);
      } else if (role == "generator") {
        if (name == "stub") {
          b.generator = std::make_shared<StubGenerator>();
        } else if (name == "failing") {
          b.generator = std::make_shared<FailingGenerator>();
        } else if (name == "identity") {
          std::map<std::string, std::string> uris;
          for (const auto& [id, img] : need_dataset(name).images()) uris.emplace(id, img.uri);
          b.generator = std::make_shared<IdentityGenerator>(std::move(uris));
        } else {
          throw wrong_role();
        }
      } else if (role == "captioner") {
        if (name == "echo") {
          std::map<std::string, std::string> by_uri;
          std::map<std::string, std::string> by_prompt;
          HashedBowEmbedder bow;
          for (const auto& [id, caps] : need_dataset(name).captions_by_image()) {
            if (caps.empty()) continue;
            by_uri.emplace(need_dataset(name).find_image(id)->uri, caps.front().text);
            by_prompt.emplace(build_prompt(caps, ctx.prompt, &bow).prompt_id, caps.front().text);
          }
          b.captioner = std::make_shared<ReferenceEchoCaptioner>(std::move(by_uri), std::move(by_prompt));
        } else if (name.rfind("constant:", 0) == 0) {
          b.captioner = std::make_shared<ConstantCaptioner>(name.substr(9));
        } else {
          throw wrong_role();
        }
      } else if (role == "embedder") {
        if (name != "bow") throw wrong_role();
        b.embedder = std::make_shared<HashedBowEmbedder>();
      } else if (role == "scorer") {
        if (name != "hash-scorer") throw wrong_role();
        b.scorer = std::make_shared<HashPairScorer>();
      }
      continue;
    }
    const auto client = client_for(command);
    if (role == "loss" && client->supports(protocol::kOpLossBatch)) {
      b.loss = std::make_shared<protocol::RemoteLossOracle>(client);
    } else if (role == "generator" && client->supports(protocol::kOpGenerateImage)) {
      b.generator = std::make_shared<protocol::RemoteGenerator>(client);
    } else if (role == "captioner" && client->supports(protocol::kOpCaptionBatch)) {
      b.captioner = std::make_shared<protocol::RemoteCaptioner>(client);
    } else if (role == "embedder" && client->supports(protocol::kOpEmbedBatch)) {
      b.embedder = std::make_shared<protocol::RemoteEmbedder>(client);
    } else if (role == "scorer" && client->supports(protocol::kOpPairScoreBatch)) {
      b.scorer = std::make_shared<protocol::RemotePairScorer>(client);
    } else {
      spdlog::warn("backend '{}' does not serve role '{}'", command, role);
    }
  }
  return b;
}

Dataset select_shots(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > dataset.sample_count()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot draw " + std::to_string(k) + " shots from " +
                                                 std::to_string(dataset.sample_count()) + " samples");
  }
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& s : dataset.samples()) {
    ranked.emplace_back(hash64({seed, std::string_view("shot"), std::string_view(s.sample_id)}), s.sample_id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<CurationAction> removals;
  for (std::size_t i = k; i < ranked.size(); ++i) removals.push_back({0, RemoveAction{ranked[i].second}});
  return replay_actions(dataset, removals);
}

Dataset load_run_source(const fs::path& snapshot_dir) { return load_dataset(snapshot_dir / "source.json"); }

RunResult run(const RunConfig& config, const Dataset& dataset, Backends& backends) {
  if (config.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "run needs a non-empty dataset");
  if (config.snapshot_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "snapshot_dir is required");
  const RunDir dir(config.snapshot_dir);
  std::error_code ec;
  fs::create_directories(config.snapshot_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, config.snapshot_dir.string() + ": " + ec.message());
  if (fs::exists(dir.path("run.json"))) {
    throw Error(ErrorCode::kInvalidArgument, config.snapshot_dir.string() + " already holds a run; use resume");
  }
  write_file_atomic(dir.path("run.json"),
                    nlohmann::json{{"config", to_json(config)}, {"config_hash", config_hash(config)}}.dump(2) + "\n");
  save_dataset(dataset, dir.path("source.json"));

  GenerationContext gen{backends.generator.get(), backends.embedder.get(), config.prompt,
                        config.effective_cache_dir(), config.rng_seed, true};
  RunResult r;
  CurationResult zero;
  switch (config.mode.kind) {
    case RunMode::Kind::kDynamic: zero.snapshot = {0, dataset, {}}; break;
    case RunMode::Kind::kStaticPre: zero = apply_static_replace(dataset, config.mode.static_mode, gen); break;
    case RunMode::Kind::kFewShot: {
      // The shot subset and its augmentation together form snapshot 0; the
      // removals that carve the subset out of the source are logged too.
      const Dataset shots = select_shots(dataset, config.mode.shots, config.rng_seed);
      zero = few_shot_augment(shots, config.mode.n_extra, gen);
      std::vector<CurationAction> actions;
      std::set<std::string> kept;
      for (const auto& s : shots.samples()) kept.insert(s.sample_id);
      for (const auto& s : dataset.samples()) {
        if (!kept.contains(s.sample_id)) actions.push_back({0, RemoveAction{s.sample_id}});
      }
      actions.insert(actions.end(), zero.snapshot.actions.begin(), zero.snapshot.actions.end());
      zero.snapshot.actions = std::move(actions);
      break;
    }
  }
  dir.persist_epoch(0, zero.snapshot, r.ledger, zero.issues);
  r.snapshots.push_back(std::move(zero.snapshot));
  r.issues.push_back(std::move(zero.issues));
  run_epochs(config, backends, r, 1);
  return r;
}

RunResult resume(const RunConfig& config, Backends& backends) {
  const RunDir dir(config.snapshot_dir);
  const auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::kCorruptState, config.snapshot_dir.string() + ": " + why);
  };
  if (!fs::is_regular_file(dir.path("run.json"))) throw corrupt("no run.json (empty or foreign directory)");
  try {
    const auto saved = nlohmann::json::parse(read_file(dir.path("run.json")));
    if (saved.at("config_hash").get<std::string>() != config_hash(config)) {
      throw corrupt("config hash mismatch; refusing to resume with a different configuration");
    }
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("unreadable run.json: ") + e.what());
  }

  RunResult r;
  try {
    const Dataset source = load_run_source(config.snapshot_dir);
    for (int t = 0; fs::exists(dir.sealed(t)); ++t) {
      if (t > config.epochs) break;
      DatasetSnapshot snap = load_snapshot(dir.snapshot(t));
      if (snap.epoch != t) throw corrupt(epoch_stem(t) + " carries epoch " + std::to_string(snap.epoch));
      const Dataset& base = t == 0 ? source : r.snapshots.back().dataset;
      if (!(replay_actions(base, snap.actions) == snap.dataset)) {
        throw corrupt(epoch_stem(t) + " does not match its action log");
      }
      if (t > 0) {
        const auto records = parse_loss_ndjson(read_file(dir.path(epoch_stem(t) + ".ledger.ndjson")));
        r.ledger.record_epoch(records, t, std::span<const Sample>(r.snapshots.back().dataset.samples()));
      }
      const auto marker = nlohmann::json::parse(read_file(dir.sealed(t)));
      r.issues.push_back(issues_from_json(marker.at("issues")));
      r.snapshots.push_back(std::move(snap));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptState) throw;
    throw corrupt(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }
  if (r.snapshots.empty()) throw corrupt("no sealed epochs");
  const int next = static_cast<int>(r.snapshots.size());
  spdlog::info("resuming after sealed epoch {}", next - 1);
  if (next > config.epochs) {
    RunDir(config.snapshot_dir).finish(config, r);
    return r;
  }
  run_epochs(config, backends, r, next);
  return r;
}

}  // namespace curette
