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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "curette/analysis.hpp"
#include "curette/capmetrics.hpp"
#include "curette/curation.hpp"
#include "curette/dataset.hpp"
#include "curette/error.hpp"
#include "curette/orchestrator.hpp"
#include "curette/protocol.hpp"
#include "curette/roundtrip.hpp"

namespace fs = std::filesystem;
using namespace curette;

namespace {

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
    spdlog::info("wrote {}", out_path);
  }
}

// A caption file is either {image_id: [captions]} or a corpus JSON.
metrics::CaptionSet read_caption_set(const fs::path& path) {
  const auto j = read_json(path);
  metrics::CaptionSet out;
  if (j.is_object() && j.contains("images")) {
    const Dataset d = dataset_from_json(j);
    for (const auto& [id, caps] : d.captions_by_image()) {
      for (const auto& c : caps) out[id].push_back(c.text);
    }
    return out;
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, path.string() + ": expected an object of image_id -> captions");
  for (const auto& [id, v] : j.items()) {
    if (v.is_string()) {
      out[id].push_back(v.get<std::string>());
    } else {
      out[id] = v.get<std::vector<std::string>>();
    }
  }
  return out;
}

PromptSpec prompt_from_flags(const std::string& strategy, std::size_t index, const std::string& styler, bool no_styler) {
  nlohmann::json j{{"strategy", strategy}, {"index", index}};
  if (no_styler) {
    j["styler"] = false;
  } else if (!styler.empty()) {
    j["styler"] = styler;
  }
  return prompt_spec_from_json(j);
}

struct PromptFlags {
  std::string strategy = "concat";
  std::size_t index = 0;
  std::string styler;
  bool no_styler = false;

  void add(CLI::App* app) {
    app->add_option("--prompt-strategy", strategy, "concat | representative | single")
        ->check(CLI::IsMember({"concat", "representative", "sbert", "single"}));
    app->add_option("--caption-index", index, "caption index for --prompt-strategy single");
    app->add_option("--styler", styler, "styler suffix (default: the photography styler)");
    app->add_flag("--no-styler", no_styler, "do not append a styler");
  }
  PromptSpec spec() const { return prompt_from_flags(strategy, index, styler, no_styler); }
};

void save_result(const CurationResult& r, const std::string& out) {
  save_snapshot(r.snapshot, out);
  std::size_t failed = 0;
  for (const auto& i : r.issues) failed += i.kind == CurationIssue::Kind::kGenerationFailed;
  spdlog::info("{} actions, {} samples, {} issues ({} generation failures)", r.snapshot.actions.size(),
               r.snapshot.dataset.sample_count(), r.issues.size(), failed);
}

int serve_backends(const std::string& dataset_path, std::uint64_t seed, const std::map<std::string, std::string>& roles) {
  Dataset dataset;
  if (!dataset_path.empty()) dataset = load_dataset(dataset_path);
  BackendContext ctx;
  ctx.dataset = &dataset;
  ctx.rng_seed = seed;
  ctx.synthetic.rng_seed = seed;
  Backends b = make_backends(roles, ctx);
  protocol::Server server({b.loss.get(), b.captioner.get(), b.generator.get(), b.embedder.get(), b.scorer.get()});
  server.serve(std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curette: loss-driven curation for image-captioning corpora"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  // curate
  auto* curate = app.add_subcommand("curate", "run the epoch loop from a run config");
  std::string config_path;
  std::string dataset_path;
  std::string snapshot_dir;
  bool do_resume = false;
  int stop_after = 0;
  curate->add_option("--config", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
  curate->add_option("--dataset", dataset_path, "corpus JSON (not needed with --resume)");
  curate->add_option("--snapshot-dir", snapshot_dir, "overrides the config's snapshot_dir");
  curate->add_flag("--resume", do_resume, "continue an interrupted run");
  curate->add_option("--stop-after", stop_after, "stop after sealing this epoch");

  // static-replace
  auto* stat = app.add_subcommand("static-replace", "one-shot image replacement before training");
  std::string out_path;
  std::string generator_cmd = "builtin:stub";
  std::string embedder_cmd;
  std::string cache_dir = "generated";
  std::uint64_t seed = 0;
  std::size_t per_image = 0;
  double coin = -1.0;
  PromptFlags prompt_flags;
  stat->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  stat->add_option("--out", out_path, "snapshot path (actions go next to it)")->required();
  auto* per_opt = stat->add_option("--per-image-count", per_image, "replace the first k captions' samples per image");
  auto* coin_opt = stat->add_option("--coin-flip", coin, "replace each sample with probability p");
  per_opt->excludes(coin_opt);
  stat->add_option("--seed", seed);
  stat->add_option("--generator", generator_cmd, "backend command or builtin:stub");
  stat->add_option("--embedder", embedder_cmd, "backend command or builtin:bow");
  stat->add_option("--cache-dir", cache_dir);
  prompt_flags.add(stat);

  // fewshot
  auto* fewshot = app.add_subcommand("fewshot", "draw K shots and append synthesized extra shots");
  std::size_t shots = 16;
  std::size_t extra = 4;
  fewshot->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  fewshot->add_option("--out", out_path)->required();
  fewshot->add_option("--k", shots, "number of shots drawn from the dataset (0 = use it whole)");
  fewshot->add_option("--extra", extra, "synthesized shots to add");
  fewshot->add_option("--seed", seed);
  fewshot->add_option("--generator", generator_cmd);
  fewshot->add_option("--cache-dir", cache_dir);
  fewshot->add_option("--styler", prompt_flags.styler);
  fewshot->add_flag("--no-styler", prompt_flags.no_styler);

  // roundtrip
  auto* rt = app.add_subcommand("roundtrip", "round-trip captioning evaluation");
  std::vector<std::string> rt_configs;
  std::string captioner_cmd = "builtin:echo";
  std::string rank_metric = "bleu4";
  rt->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  rt->add_option("--config", rt_configs, "round-trip config JSON (repeat to compare)")->check(CLI::ExistingFile);
  rt->add_option("--generator", generator_cmd);
  rt->add_option("--captioner", captioner_cmd);
  rt->add_option("--embedder", embedder_cmd);
  rt->add_option("--seed", seed);
  rt->add_option("--cache-dir", cache_dir);
  rt->add_option("--rank-by", rank_metric);
  rt->add_option("--out", out_path, "report JSON (stdout by default)");
  prompt_flags.add(rt);

  // score
  auto* score = app.add_subcommand("score", "score candidate captions against references");
  std::string cand_path;
  std::string ref_path;
  std::vector<std::string> metric_names;
  bool as_csv = false;
  score->add_option("--candidates", cand_path, "{image_id: caption} JSON")->required()->check(CLI::ExistingFile);
  score->add_option("--references", ref_path, "{image_id: [captions]} or corpus JSON")->required()->check(CLI::ExistingFile);
  score->add_option("--metrics", metric_names, "subset of bleu1..4, rougeL, cider, meteor_lite");
  score->add_flag("--csv", as_csv, "per-sample CSV instead of JSON");
  score->add_option("--out", out_path);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "post-hoc reports");
  analyze->require_subcommand(1);
  auto* ann = analyze->add_subcommand("annotations", "aggregate human error annotations");
  std::string csv_path;
  std::string taxonomy_path;
  std::size_t min_annotators = 3;
  std::string images_out;
  ann->add_option("--csv", csv_path)->required()->check(CLI::ExistingFile);
  ann->add_option("--taxonomy", taxonomy_path, "JSON string array")->check(CLI::ExistingFile);
  ann->add_option("--min-annotators", min_annotators);
  ann->add_option("--out", out_path, "summary JSON");
  ann->add_option("--images-csv", images_out, "per-image mean error CSV");
  auto* sweep = analyze->add_subcommand("sweep", "ratio-vs-score table over run dirs");
  std::vector<std::string> run_dirs;
  sweep->add_option("runs", run_dirs)->required();
  sweep->add_option("--out", out_path);
  auto* losses = analyze->add_subcommand("losses", "per-epoch loss histograms of a run");
  std::string run_dir;
  losses->add_option("run", run_dir)->required()->check(CLI::ExistingDirectory);
  losses->add_option("--out", out_path);
  auto* lengths = analyze->add_subcommand("lengths", "caption length histogram");
  lengths->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);

  // backend
  auto* backend = app.add_subcommand("backend", "curette/1 protocol utilities");
  backend->require_subcommand(1);
  auto* serve = backend->add_subcommand("serve", "serve builtin backends on stdin/stdout");
  std::map<std::string, std::string> roles{{"loss", "builtin:synthetic-loss"},
                                           {"generator", "builtin:stub"},
                                           {"captioner", "builtin:echo"},
                                           {"embedder", "builtin:bow"},
                                           {"scorer", "builtin:hash-scorer"}};
  std::vector<std::string> role_overrides;
  serve->add_option("--dataset", dataset_path, "corpus for the synthetic oracle and echo captioner");
  serve->add_option("--seed", seed);
  serve->add_option("--role", role_overrides, "role=builtin:name (repeatable); role= disables");
  auto* check = backend->add_subcommand("check", "replay a golden transcript against a backend command");
  std::string command;
  std::string transcript_path;
  double tolerance = 1e-6;
  check->add_option("--command", command)->required();
  check->add_option("--transcript", transcript_path)->required()->check(CLI::ExistingFile);
  check->add_option("--tolerance", tolerance);
  auto* record = backend->add_subcommand("record", "record a transcript from builtin backends");
  std::string requests_path;
  record->add_option("--requests", requests_path, "NDJSON requests")->required()->check(CLI::ExistingFile);
  record->add_option("--dataset", dataset_path);
  record->add_option("--seed", seed);
  record->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("curette");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*curate) {
      RunConfig config = run_config_from_json(read_json(config_path));
      if (!snapshot_dir.empty()) config.snapshot_dir = snapshot_dir;
      if (stop_after > 0) config.stop_after = stop_after;
      if (config.snapshot_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "no snapshot_dir given");
      if (!do_resume && dataset_path.empty()) throw Error(ErrorCode::kInvalidArgument, "--dataset is required");
      const Dataset dataset = do_resume ? load_run_source(config.snapshot_dir) : load_dataset(dataset_path);
      BackendContext ctx{&dataset, config.rng_seed, config.synthetic, config.prompt, config.client};
      Backends backends = make_backends(config.backends, ctx);
      const RunResult r = do_resume ? resume(config, backends) : run(config, dataset, backends);
      if (!r.completed) {
        spdlog::warn("run stopped after epoch {}; continue with --resume", r.snapshots.size() - 1);
        return 3;
      }
      spdlog::info("run complete: {} samples after {} epochs", r.snapshots.back().dataset.sample_count(),
                   config.epochs);
      return 0;
    }
    if (*stat) {
      if (per_opt->count() == 0 && coin_opt->count() == 0) {
        throw Error(ErrorCode::kInvalidArgument, "give --per-image-count or --coin-flip");
      }
      const Dataset dataset = load_dataset(dataset_path);
      BackendContext ctx{&dataset, seed, {}, prompt_flags.spec(), {}};
      Backends b = make_backends({{"generator", generator_cmd}, {"embedder", embedder_cmd}}, ctx);
      GenerationContext gen{b.generator.get(), b.embedder.get(), prompt_flags.spec(), cache_dir, seed, true};
      const StaticMode mode = per_opt->count() ? StaticMode::per_image_count(per_image) : StaticMode::coin_flip(coin);
      save_result(apply_static_replace(dataset, mode, gen), out_path);
      return 0;
    }
    if (*fewshot) {
      const Dataset dataset = load_dataset(dataset_path);
      const Dataset subset = shots == 0 ? dataset : select_shots(dataset, shots, seed);
      BackendContext ctx{&dataset, seed, {}, {}, {}};
      Backends b = make_backends({{"generator", generator_cmd}}, ctx);
      PromptSpec spec = prompt_flags.spec();
      spec.strategy = PromptStrategy::single(0);
      GenerationContext gen{b.generator.get(), nullptr, spec, cache_dir, seed, true};
      save_result(few_shot_augment(subset, extra, gen), out_path);
      return 0;
    }
    if (*rt) {
      const Dataset dataset = load_dataset(dataset_path);
      std::vector<RoundTripConfig> configs;
      for (const auto& p : rt_configs) configs.push_back(roundtrip_config_from_json(read_json(p)));
      if (configs.empty()) {
        RoundTripConfig c;
        c.prompt = prompt_flags.spec();
        c.seed = seed;
        c.cache_dir = cache_dir;
        configs.push_back(c);
      }
      std::vector<Backends> held;
      std::vector<ConfigRun> runs;
      held.reserve(configs.size());
      for (auto& c : configs) {
        if (c.generator.empty()) c.generator = generator_cmd;
        if (c.captioner.empty()) c.captioner = captioner_cmd;
        BackendContext ctx{&dataset, c.seed, {}, c.prompt, {}};
        held.push_back(make_backends({{"generator", c.generator}, {"captioner", c.captioner}, {"embedder", embedder_cmd}}, ctx));
        runs.push_back({c, {held.back().generator.get(), held.back().captioner.get(), held.back().embedder.get()}});
      }
      if (runs.size() == 1) {
        const auto report = run_roundtrip(dataset, runs[0].config, runs[0].backends);
        emit(to_json(report).dump(2) + "\n", out_path);
        return 0;
      }
      const auto metric = metrics::parse_metric(rank_metric);
      const auto rows = compare_configs(dataset, runs, metric);
      nlohmann::json j = nlohmann::json::array();
      for (const auto& row : rows) {
        nlohmann::json r{{"name", row.name}, {"index", row.index}};
        if (row.report) {
          r["report"] = to_json(*row.report);
        } else {
          r["error"] = row.error;
        }
        j.push_back(std::move(r));
      }
      std::cerr << comparison_csv(rows, metric);
      emit(j.dump(2) + "\n", out_path);
      bool any_failed = false;
      for (const auto& row : rows) any_failed |= !row.report.has_value();
      return any_failed ? 1 : 0;
    }
    if (*score) {
      std::set<metrics::Metric> chosen;
      for (const auto& m : metric_names) chosen.insert(metrics::parse_metric(m));
      if (chosen.empty()) chosen = metrics::all_metrics();
      const auto report = metrics::score_corpus(read_caption_set(cand_path), read_caption_set(ref_path), chosen);
      emit(as_csv ? metrics::to_csv(report) : metrics::to_json(report).dump(2) + "\n", out_path);
      return 0;
    }
    if (*ann) {
      const auto taxonomy = taxonomy_path.empty() ? analysis::default_taxonomy()
                                                  : analysis::parse_taxonomy(read_file(taxonomy_path));
      const auto records = analysis::parse_annotations_csv(read_file(csv_path));
      const auto summary = analysis::aggregate_annotations(records, taxonomy, min_annotators);
      if (!images_out.empty()) write_file_atomic(images_out, analysis::image_errors_csv(summary));
      emit(analysis::to_json(summary).dump(2) + "\n", out_path);
      return 0;
    }
    if (*sweep) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      emit(analysis::sweep_report(dirs), out_path);
      return 0;
    }
    if (*losses) {
      const fs::path p = fs::path(run_dir) / "loss_distribution.csv";
      if (!fs::exists(p)) throw Error(ErrorCode::kIncompleteRun, run_dir + ": missing loss_distribution.csv");
      emit(read_file(p), out_path);
      return 0;
    }
    if (*lengths) {
      const auto stats = caption_length_stats(load_dataset(dataset_path));
      std::printf("tokens,count\n");
      for (const auto& [tokens, count] : stats.histogram) std::printf("%zu,%zu\n", tokens, count);
      std::fprintf(stderr, "mean %.2f, max %zu, %zu captions above the mean\n", stats.mean, stats.max,
                   stats.above_mean.size());
      return 0;
    }
    if (*serve) {
      for (const auto& o : role_overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "--role expects role=command");
        roles[o.substr(0, eq)] = o.substr(eq + 1);
      }
      if (dataset_path.empty()) {
        roles.erase("loss");
        roles.erase("captioner");
      }
      spdlog::set_level(spdlog::level::warn);
      return serve_backends(dataset_path, seed, roles);
    }
    if (*check) {
      protocol::ProcessTransport transport(command);
      const auto result = protocol::replay_transcript(transport, read_file(transcript_path), tolerance);
      for (const auto& m : result.mismatches) std::cout << "MISMATCH " << m << "\n";
      std::cout << (result.passed() ? "PASS" : "FAIL") << " " << result.exchanges << " exchanges\n";
      return result.passed() ? 0 : 1;
    }
    if (*record) {
      Dataset dataset;
      if (!dataset_path.empty()) dataset = load_dataset(dataset_path);
      BackendContext ctx{&dataset, seed, {}, {}, {}};
      ctx.synthetic.rng_seed = seed;
      auto r = roles;
      if (dataset_path.empty()) {
        r.erase("loss");
        r.erase("captioner");
      }
      Backends b = make_backends(r, ctx);
      protocol::Server server({b.loss.get(), b.captioner.get(), b.generator.get(), b.embedder.get(), b.scorer.get()});
      std::vector<protocol::Request> requests;
      std::istringstream in(read_file(requests_path));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) requests.push_back(protocol::request_from_json(nlohmann::json::parse(line)));
      }
      emit(protocol::record_transcript(server, requests), out_path);
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 2;
  }
  return 0;
}
