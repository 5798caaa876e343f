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

#include <benchmark/benchmark.h>

#include "corpus.hpp"
#include "curette/capmetrics.hpp"

namespace m = curette::metrics;

namespace {

struct Eval {
  m::CaptionSet candidates;
  m::CaptionSet references;
};

Eval make_eval(std::size_t images) {
  std::mt19937_64 rng(3);
  Eval e;
  const auto d = bench::flickr_like(images);
  for (const auto& [id, caps] : d.captions_by_image()) {
    e.candidates[id] = {bench::random_caption(rng, 10)};
    for (const auto& c : caps) e.references[id].push_back(c.text);
  }
  return e;
}

void BM_ScoreCorpus(benchmark::State& state, m::Metric metric) {
  const auto e = make_eval(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m::score_corpus(e.candidates, e.references, {metric}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreCorpusAll(benchmark::State& state) {
  const auto e = make_eval(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m::score_corpus(e.candidates, e.references, m::all_metrics()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Tokenize(benchmark::State& state) {
  const std::string text = "A brown Dog, running across the green grass in a public park on a sunny day!";
  for (auto _ : state) benchmark::DoNotOptimize(m::tokenize(text));
}

}  // namespace

BENCHMARK_CAPTURE(BM_ScoreCorpus, bleu4, m::Metric::kBleu4)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScoreCorpus, rougeL, m::Metric::kRougeL)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScoreCorpus, meteor_lite, m::Metric::kMeteorLite)->Arg(1000);
BENCHMARK_CAPTURE(BM_ScoreCorpus, cider, m::Metric::kCider)->Arg(1000);
BENCHMARK(BM_ScoreCorpusAll)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tokenize);
